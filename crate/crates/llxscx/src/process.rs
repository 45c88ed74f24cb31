//! Per-process operation context and the three primitives.
//!
//! LLX takes a consistent snapshot of one record's mutable fields, or reports
//! that the record is finalized, or fails if a conflicting SCX was in flight.
//! SCX atomically changes one mutable field of one record while ensuring that
//! none of a set of records (each covered by an earlier linked LLX) has
//! changed since, optionally finalizing some of them. VLX just revalidates
//! that a set of records is unchanged. SCX publishes a descriptor and runs a
//! help routine any thread can execute, so a stalled operation never blocks
//! others: whoever finds a record frozen for an in-progress descriptor
//! completes or aborts that descriptor before moving on.
//!
//! A [`Process`] owns the local table of LLX results that links LLXs to a
//! later SCX or VLX. The table keeps the most recent successful LLX per
//! record; any subsequent `llx`, `scx`, or `vlx` naming that record drops the
//! entry, so an entry can back at most one dependent operation.

use std::collections::HashMap;
use std::sync::atomic::Ordering;
use std::sync::Arc;

use serde::Serialize;

use crate::descriptor::{ScxRecord, ScxState};
use crate::domain::Domain;
use crate::record::{DataRecordHandle, Field, FieldRef};
use crate::step::{yield_point, StepLabel};
use crate::trace::{AuditEvent, LlxOutcome};
use crate::word::Word;

/// Result of an LLX.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LlxResult {
    /// A consistent snapshot of the record's mutable fields.
    Snapshot(Snapshot),
    /// A conflicting SCX was in progress; nothing can be said about the record.
    Fail,
    /// The record has been finalized: it was permanently removed from the
    /// data structure and its fields will never change again.
    Finalized,
}

impl LlxResult {
    pub fn is_snapshot(&self) -> bool {
        matches!(self, LlxResult::Snapshot(_))
    }

    /// The snapshot, if this result is one.
    pub fn snapshot(self) -> Option<Snapshot> {
        match self {
            LlxResult::Snapshot(s) => Some(s),
            _ => None,
        }
    }
}

/// The values of a record's `y` mutable fields, read atomically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    words: Box<[Word]>,
}

impl Snapshot {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, index: usize) -> Word {
        self.words[index]
    }

    /// The field as a plain value; panics if it is a handle field.
    pub fn value(&self, index: usize) -> u64 {
        self.words[index]
            .as_value()
            .expect("snapshot field is a handle, not a value")
    }

    /// The field as a handle; panics if it is a value field.
    pub fn handle(&self, index: usize) -> Option<DataRecordHandle> {
        self.words[index]
            .as_handle()
            .expect("snapshot field is a value, not a handle")
    }
}

/// Step tallies for the most recent primitive invocation, reset when the
/// invocation starts. `writes` counts mark steps plus the frozen and
/// commit/abort steps; reads of marked/info/state/all-frozen bits and of
/// record fields all land in `shared_reads`.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StepCounters {
    pub freezing_cas: u64,
    pub update_cas: u64,
    pub writes: u64,
    pub shared_reads: u64,
}

impl StepCounters {
    /// Total CAS steps, freezing plus update.
    pub fn cas_total(&self) -> u64 {
        self.freezing_cas + self.update_cas
    }
}

/// Cumulative per-process outcome tallies, never reset.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ProcessStats {
    pub llx_snapshot: u64,
    pub llx_fail: u64,
    pub llx_finalized: u64,
    pub scx_true: u64,
    pub scx_false: u64,
    pub vlx_true: u64,
    pub vlx_false: u64,
    pub freezing_cas_failed: u64,
    pub update_cas_failed: u64,
    /// Operation-level retries recorded by data structures built on the
    /// primitives (one per abandoned attempt loop iteration).
    pub retries: u64,
}

struct TableEntry {
    info: *mut ScxRecord,
    raw: Box<[u64]>,
}

/// A registered process: the owner of one local table of LLX results and the
/// context every primitive invocation runs in.
pub struct Process {
    domain: Arc<Domain>,
    id: u32,
    table: HashMap<DataRecordHandle, TableEntry>,
    counters: StepCounters,
    stats: ProcessStats,
}

// The table holds raw descriptor pointers, which stay valid as long as the
// domain the process belongs to; the Arc keeps it alive. Nothing in a
// Process is tied to the thread that created it.
unsafe impl Send for Process {}

impl Process {
    pub(crate) fn new(domain: Arc<Domain>, id: u32) -> Process {
        Process {
            domain,
            id,
            table: HashMap::new(),
            counters: StepCounters::default(),
            stats: ProcessStats::default(),
        }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    /// Step tallies of the most recent `llx`/`scx`/`vlx`/`read_field` call.
    pub fn last_counters(&self) -> StepCounters {
        self.counters
    }

    pub fn stats(&self) -> ProcessStats {
        self.stats
    }

    pub(crate) fn note_retry(&mut self) {
        self.stats.retries += 1;
    }

    /// Load-link extended. Returns a snapshot of `r`'s mutable fields and
    /// remembers it so a later `scx`/`vlx` can include `r` in its V sequence,
    /// or reports `r` finalized, or fails on conflict with a concurrent SCX.
    pub fn llx(&mut self, r: DataRecordHandle) -> LlxResult {
        self.counters = StepCounters::default();
        self.table.remove(&r);
        let pid = self.id;
        let record_id = unsafe { r.get() }.id;
        self.domain.emit(|| AuditEvent::LlxBegin {
            process: pid,
            record: record_id,
        });

        let marked1 = self.read_marked(r);
        let rinfo = self.read_info(r);
        let state = self.read_state(rinfo);
        let marked2 = self.read_marked(r);
        // Not frozen at the time state was read: safe to try reading fields.
        if state == ScxState::Aborted || (state == ScxState::Committed && !marked2) {
            let schema = Arc::clone(&unsafe { r.get() }.schema);
            let y = schema.mutable_len();
            let mut raw = Vec::with_capacity(y);
            for i in 0..y {
                raw.push(self.read_mutable(r, i));
            }
            // The fields are a snapshot iff no SCX froze r in the meantime.
            if self.read_info(r) == rinfo {
                let words = raw
                    .iter()
                    .enumerate()
                    .map(|(i, &w)| Word::decode(schema.mutable_kind(i), w))
                    .collect();
                self.table.insert(
                    r,
                    TableEntry {
                        info: rinfo,
                        raw: raw.into_boxed_slice(),
                    },
                );
                self.stats.llx_snapshot += 1;
                self.emit_llx_end(record_id, LlxOutcome::Snapshot);
                return LlxResult::Snapshot(Snapshot { words });
            }
        }
        // r was frozen. If the freezing SCX finalizes r and is guaranteed to
        // commit, r is gone for good; otherwise report the conflict, helping
        // the in-flight operation along first.
        if (self.read_state(rinfo) == ScxState::Committed
            || (self.read_state(rinfo) == ScxState::InProgress && self.help(rinfo)))
            && marked1
        {
            self.stats.llx_finalized += 1;
            self.emit_llx_end(record_id, LlxOutcome::Finalized);
            return LlxResult::Finalized;
        }
        let cur = self.read_info(r);
        if self.read_state(cur) == ScxState::InProgress {
            let cur = self.read_info(r);
            self.help(cur);
        }
        self.stats.llx_fail += 1;
        self.emit_llx_end(record_id, LlxOutcome::Fail);
        LlxResult::Fail
    }

    /// Store-conditional extended. Attempts to set `fld` (a mutable field of
    /// one record in `v`) to `new`, succeeding only if no record in `v` has
    /// been changed by another SCX since this process's linked LLX of it, and
    /// finalizing every record in `r_seq` on success.
    ///
    /// Caller contract, enforced by assertion: `v` non-empty and duplicate
    /// free, `r_seq` a subsequence of `v`, `fld` a mutable field of a record
    /// in `v`, `new` of the field's kind, and a linked LLX result on file for
    /// every record in `v`. The caller must also never store a value that
    /// `fld` previously held (kept true by construction in the data
    /// structures here; the trace auditors flag violations).
    pub fn scx(
        &mut self,
        v: &[DataRecordHandle],
        r_seq: &[DataRecordHandle],
        fld: FieldRef,
        new: Word,
    ) -> bool {
        self.counters = StepCounters::default();
        assert!(!v.is_empty(), "scx: V must be non-empty");
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                assert!(v[i] != v[j], "scx: duplicate record in V");
            }
        }
        {
            let mut rest = v.iter();
            for want in r_seq {
                assert!(
                    rest.any(|have| have == want),
                    "scx: R must be a subsequence of V"
                );
            }
        }
        assert!(
            v.contains(&fld.record),
            "scx: fld must be a field of a record in V"
        );
        let schema = Arc::clone(&unsafe { fld.record.get() }.schema);
        assert!(
            fld.field < schema.mutable_len(),
            "scx: fld index out of range"
        );
        assert_eq!(
            new.kind(),
            schema.mutable_kind(fld.field),
            "scx: new value has the wrong kind for fld"
        );

        let mut info_fields = Vec::with_capacity(v.len());
        let mut old = None;
        for rec in v {
            let entry = self
                .table
                .get(rec)
                .expect("scx: no linked llx result for a record in V");
            info_fields.push(entry.info);
            if *rec == fld.record {
                old = Some(entry.raw[fld.field]);
            }
        }
        let old = old.unwrap();
        for rec in v {
            self.table.remove(rec);
        }

        let desc = self.domain.new_descriptor(
            v.into(),
            r_seq.into(),
            fld,
            old,
            new.encode(),
            info_fields.into_boxed_slice(),
        );
        let desc_id = unsafe { &*desc }.id;
        let pid = self.id;
        self.domain.emit(|| AuditEvent::ScxBegin {
            process: pid,
            desc: desc_id,
        });
        let ok = self.help(desc);
        if ok {
            self.stats.scx_true += 1;
        } else {
            self.stats.scx_false += 1;
        }
        self.domain.emit(|| AuditEvent::ScxEnd {
            process: pid,
            desc: desc_id,
            success: ok,
        });
        ok
    }

    /// Validate extended. True iff none of the records in `v` has been frozen
    /// by another SCX since this process's linked LLX of it. Consumes the
    /// linked results either way. Reads exactly one shared word per record
    /// (fewer if validation fails early).
    pub fn vlx(&mut self, v: &[DataRecordHandle]) -> bool {
        self.counters = StepCounters::default();
        let pid = self.id;
        self.domain.emit(|| AuditEvent::VlxBegin {
            process: pid,
            v: v.iter().map(|h| unsafe { h.get() }.id).collect(),
        });
        let infos: Vec<*mut ScxRecord> = v
            .iter()
            .map(|rec| {
                self.table
                    .get(rec)
                    .expect("vlx: no linked llx result for a record in V")
                    .info
            })
            .collect();
        for rec in v {
            self.table.remove(rec);
        }
        let mut ok = true;
        for (rec, rinfo) in v.iter().zip(infos) {
            if self.read_info(*rec) != rinfo {
                ok = false;
                break;
            }
        }
        if ok {
            self.stats.vlx_true += 1;
        } else {
            self.stats.vlx_false += 1;
        }
        self.domain.emit(|| AuditEvent::VlxEnd {
            process: pid,
            success: ok,
        });
        ok
    }

    /// Reads one field of `r`: a single shared read, linearized at that read.
    pub fn read_field(&mut self, r: DataRecordHandle, field: Field) -> Word {
        self.counters = StepCounters::default();
        let rec = unsafe { r.get() };
        match field {
            Field::Mutable(i) => {
                assert!(
                    i < rec.schema.mutable_len(),
                    "read_field: mutable index out of range"
                );
                let raw = self.read_mutable(r, i);
                Word::decode(rec.schema.mutable_kind(i), raw)
            }
            Field::Immutable(i) => {
                assert!(
                    i < rec.schema.immutable_len(),
                    "read_field: immutable index out of range"
                );
                yield_point(StepLabel::ReadImmutable);
                self.counters.shared_reads += 1;
                Word::decode(rec.schema.immutable_kind(i), rec.immutable[i])
            }
        }
    }

    /// Drives the descriptor to completion (or abortion): freeze each record
    /// in V in order, then set all-frozen, mark the records in R, CAS the
    /// target field, and commit. Any failed freeze on a record not already
    /// frozen for this descriptor settles the outcome: committed if the
    /// all-frozen bit is up, aborted otherwise.
    fn help(&mut self, scx_ptr: *mut ScxRecord) -> bool {
        let u = unsafe { &*scx_ptr };
        debug_assert!(u.fld.is_some(), "help: dummy descriptor is not helpable");
        for i in 0..u.v.len() {
            let rec = u.v[i];
            let expected = u.info_fields[i];
            if !self.freezing_cas(rec, expected, scx_ptr) && self.read_info(rec) != scx_ptr {
                let ok = if self.read_all_frozen(scx_ptr) {
                    true
                } else {
                    self.abort_step(scx_ptr);
                    false
                };
                self.emit_help_return(scx_ptr, ok);
                return ok;
            }
        }
        self.frozen_step(scx_ptr);
        for &rec in u.r.iter() {
            self.mark_step(rec, scx_ptr);
        }
        self.update_cas(scx_ptr);
        self.commit_step(scx_ptr);
        self.emit_help_return(scx_ptr, true);
        true
    }

    // Shared-memory steps. Each announces a yield point, bumps the invocation
    // counters, then performs the access (paired with its audit event under
    // the trace lock when auditing is on).

    fn read_marked(&mut self, r: DataRecordHandle) -> bool {
        yield_point(StepLabel::ReadMarked);
        self.counters.shared_reads += 1;
        let rec = unsafe { r.get() };
        let pid = self.id;
        self.domain.step(
            || rec.marked.load(Ordering::SeqCst),
            |value| AuditEvent::ReadMarked {
                process: pid,
                record: rec.id,
                value: *value,
            },
        )
    }

    fn read_info(&mut self, r: DataRecordHandle) -> *mut ScxRecord {
        yield_point(StepLabel::ReadInfo);
        self.counters.shared_reads += 1;
        let rec = unsafe { r.get() };
        let pid = self.id;
        self.domain.step(
            || rec.info.load(Ordering::SeqCst),
            |ptr| AuditEvent::ReadInfo {
                process: pid,
                record: rec.id,
                desc: unsafe { &**ptr }.id,
            },
        )
    }

    fn read_state(&mut self, desc: *mut ScxRecord) -> ScxState {
        yield_point(StepLabel::ReadState);
        self.counters.shared_reads += 1;
        let u = unsafe { &*desc };
        let pid = self.id;
        self.domain.step(
            || u.load_state(),
            |state| AuditEvent::ReadState {
                process: pid,
                desc: u.id,
                state: *state,
            },
        )
    }

    fn read_all_frozen(&mut self, desc: *mut ScxRecord) -> bool {
        yield_point(StepLabel::ReadAllFrozen);
        self.counters.shared_reads += 1;
        let u = unsafe { &*desc };
        let pid = self.id;
        self.domain.step(
            || u.all_frozen.load(Ordering::SeqCst),
            |value| AuditEvent::ReadAllFrozen {
                process: pid,
                desc: u.id,
                value: *value,
            },
        )
    }

    fn read_mutable(&mut self, r: DataRecordHandle, field: usize) -> u64 {
        yield_point(StepLabel::ReadMutable);
        self.counters.shared_reads += 1;
        let rec = unsafe { r.get() };
        let pid = self.id;
        self.domain.step(
            || rec.mutable[field].load(Ordering::SeqCst),
            |raw| AuditEvent::ReadMutable {
                process: pid,
                record: rec.id,
                field,
                value: self.domain.raw_repr(rec.schema.mutable_kind(field), *raw),
            },
        )
    }

    fn freezing_cas(
        &mut self,
        r: DataRecordHandle,
        expected: *mut ScxRecord,
        desc: *mut ScxRecord,
    ) -> bool {
        yield_point(StepLabel::FreezingCas);
        self.counters.freezing_cas += 1;
        let rec = unsafe { r.get() };
        let pid = self.id;
        let ok = self
            .domain
            .step(
                || {
                    rec.info
                        .compare_exchange(expected, desc, Ordering::SeqCst, Ordering::SeqCst)
                },
                |res| {
                    let observed = match res {
                        Ok(prev) => *prev,
                        Err(actual) => *actual,
                    };
                    AuditEvent::FreezingCas {
                        process: pid,
                        record: rec.id,
                        desc: unsafe { &*desc }.id,
                        expected: unsafe { &*expected }.id,
                        observed: unsafe { &*observed }.id,
                        success: res.is_ok(),
                    }
                },
            )
            .is_ok();
        if !ok {
            self.stats.freezing_cas_failed += 1;
        }
        ok
    }

    fn frozen_step(&mut self, desc: *mut ScxRecord) {
        yield_point(StepLabel::FrozenStep);
        self.counters.writes += 1;
        let u = unsafe { &*desc };
        let pid = self.id;
        self.domain.step(
            || u.all_frozen.swap(true, Ordering::SeqCst),
            |prev| AuditEvent::FrozenStep {
                process: pid,
                desc: u.id,
                prev: *prev,
            },
        );
    }

    fn mark_step(&mut self, r: DataRecordHandle, desc: *mut ScxRecord) {
        yield_point(StepLabel::MarkStep);
        self.counters.writes += 1;
        let rec = unsafe { r.get() };
        let pid = self.id;
        self.domain.step(
            || rec.marked.swap(true, Ordering::SeqCst),
            |prev| AuditEvent::MarkStep {
                process: pid,
                record: rec.id,
                desc: unsafe { &*desc }.id,
                prev: *prev,
            },
        );
    }

    fn update_cas(&mut self, desc: *mut ScxRecord) {
        yield_point(StepLabel::UpdateCas);
        self.counters.update_cas += 1;
        let u = unsafe { &*desc };
        let fld = u.fld.expect("update_cas: dummy descriptor");
        let rec = unsafe { fld.record.get() };
        let kind = rec.schema.mutable_kind(fld.field);
        let pid = self.id;
        let ok = self
            .domain
            .step(
                || {
                    rec.mutable[fld.field].compare_exchange(
                        u.old,
                        u.new,
                        Ordering::SeqCst,
                        Ordering::SeqCst,
                    )
                },
                |res| {
                    let observed = match res {
                        Ok(prev) => *prev,
                        Err(actual) => *actual,
                    };
                    AuditEvent::UpdateCas {
                        process: pid,
                        desc: u.id,
                        record: rec.id,
                        field: fld.field,
                        old: self.domain.raw_repr(kind, u.old),
                        new: self.domain.raw_repr(kind, u.new),
                        observed: self.domain.raw_repr(kind, observed),
                        success: res.is_ok(),
                    }
                },
            )
            .is_ok();
        if !ok {
            self.stats.update_cas_failed += 1;
        }
    }

    fn commit_step(&mut self, desc: *mut ScxRecord) {
        yield_point(StepLabel::CommitStep);
        self.counters.writes += 1;
        let u = unsafe { &*desc };
        let pid = self.id;
        self.domain.step(
            || u.swap_state(ScxState::Committed),
            |prev| AuditEvent::CommitStep {
                process: pid,
                desc: u.id,
                prev: *prev,
            },
        );
    }

    fn abort_step(&mut self, desc: *mut ScxRecord) {
        yield_point(StepLabel::AbortStep);
        self.counters.writes += 1;
        let u = unsafe { &*desc };
        let pid = self.id;
        self.domain.step(
            || u.swap_state(ScxState::Aborted),
            |prev| AuditEvent::AbortStep {
                process: pid,
                desc: u.id,
                prev: *prev,
            },
        );
    }

    fn emit_llx_end(&self, record: u64, outcome: LlxOutcome) {
        let pid = self.id;
        self.domain.emit(|| AuditEvent::LlxEnd {
            process: pid,
            record,
            outcome,
        });
    }

    fn emit_help_return(&self, desc: *mut ScxRecord, success: bool) {
        let pid = self.id;
        let desc_id = unsafe { &*desc }.id;
        self.domain.emit(|| AuditEvent::HelpReturn {
            process: pid,
            desc: desc_id,
            success,
        });
    }

    pub(crate) fn emit_warning(&self, message: String) {
        let pid = self.id;
        self.domain.emit(|| AuditEvent::Warning {
            process: pid,
            message,
        });
    }
}
