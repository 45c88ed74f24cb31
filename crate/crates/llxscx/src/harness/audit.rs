//! Trace auditors for the primitive-level invariants.
//!
//! `audit_invariants` replays an audit trace (whose order is the order the
//! steps hit shared memory) through a model of every record and descriptor
//! and flags violations of the protocol's structural guarantees:
//!
//! - `state-machine`: a descriptor's frozen/commit/abort steps must follow
//!   the legal lifecycle (no commit after abort, no abort after the frozen
//!   step or after a commit, no frozen step on an aborted descriptor, no
//!   commit before the frozen step or before the target field changed).
//! - `info-freshness`: a record's info field never holds the same
//!   descriptor twice, so a successful freeze toward a previously seen
//!   descriptor is flagged.
//! - `single-update`: at most one update CAS per descriptor succeeds, and
//!   only as the descriptor's first update attempt.
//! - `helper-agreement`: every help invocation for one descriptor returns
//!   the same verdict.
//! - `freeze-order`: freezing CASes for a descriptor target its V sequence
//!   in order; none may target V[i] before V[i-1] froze successfully.
//! - `permafrozen`: once a descriptor that finalizes a record commits, no
//!   successful freeze or update touches that record again.
//! - `field-freshness`: a successful update CAS never installs a value the
//!   field held before (the ABA precondition callers must maintain).
//! - `fail-overlap`: an LLX may fail only while some SCX naming that record
//!   is threatening it, between the SCX's first freezing CAS and its first
//!   commit or abort step.
//! - `mark-step`: mark steps target only records in the descriptor's R,
//!   after its frozen step, and never for an aborted descriptor.
//! - `trace-form`: the trace itself is inconsistent (unknown ids, observed
//!   values that contradict the replayed memory, malformed descriptors).
//!
//! `quiescent_sweep` drives the post-drain structural criterion: with no
//! operation in flight, every record must LLX to a snapshot or be
//! finalized, and a VLX over the snapshotted records must validate.

use std::collections::HashMap;

use crate::descriptor::ScxState;
use crate::process::{LlxResult, Process};
use crate::record::DataRecordHandle;
use crate::trace::{AuditEvent, LlxOutcome, Trace, WordRepr};

#[derive(Debug, Clone)]
pub struct Violation {
    pub invariant: &'static str,
    pub seq: u64,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] step {}: {}", self.invariant, self.seq, self.detail)
    }
}

#[derive(Debug, Clone, Default)]
pub struct AuditReport {
    pub events: usize,
    pub records: usize,
    pub descriptors: usize,
    pub warnings: usize,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn named<'a>(&'a self, invariant: &'a str) -> impl Iterator<Item = &'a Violation> {
        self.violations
            .iter()
            .filter(move |v| v.invariant == invariant)
    }

    pub fn summary(&self) -> String {
        format!(
            "{} events, {} records, {} descriptors, {} warnings, {} violations",
            self.events,
            self.records,
            self.descriptors,
            self.warnings,
            self.violations.len()
        )
    }
}

struct DescMeta {
    v: Vec<u64>,
    r: Vec<u64>,
    fld_record: u64,
    fld_index: usize,
    old: WordRepr,
    new: WordRepr,
    state: ScxState,
    all_frozen: bool,
    frozen_ok: Vec<bool>,
    update_attempts: u64,
    update_successes: u64,
    help_returns: Vec<bool>,
    first_freeze: Option<u64>,
    settled: Option<u64>,
}

impl DescMeta {
    fn dummy() -> Self {
        DescMeta {
            v: Vec::new(),
            r: Vec::new(),
            fld_record: 0,
            fld_index: 0,
            old: WordRepr::Nil,
            new: WordRepr::Nil,
            state: ScxState::Aborted,
            all_frozen: false,
            frozen_ok: Vec::new(),
            update_attempts: 0,
            update_successes: 0,
            help_returns: Vec::new(),
            first_freeze: None,
            settled: None,
        }
    }
}

struct RecMeta {
    info_history: Vec<u64>,
    fields: Vec<Vec<WordRepr>>,
    marked: bool,
    finalized_at: Option<u64>,
}

type Pending = Vec<(&'static str, String)>;

struct Auditor {
    descs: HashMap<u64, DescMeta>,
    recs: HashMap<u64, RecMeta>,
    open_llx: HashMap<(u32, u64), u64>,
    // (begin, end, process, record) of every failed LLX, checked in pass 2.
    fails: Vec<(u64, u64, u32, u64)>,
    warnings: usize,
    violations: Vec<Violation>,
}

impl Auditor {
    fn new() -> Self {
        let mut descs = HashMap::new();
        descs.insert(0, DescMeta::dummy());
        Auditor {
            descs,
            recs: HashMap::new(),
            open_llx: HashMap::new(),
            fails: Vec::new(),
            warnings: 0,
            violations: Vec::new(),
        }
    }

    fn flag(&mut self, invariant: &'static str, seq: u64, detail: String) {
        self.violations.push(Violation {
            invariant,
            seq,
            detail,
        });
    }

    fn flush(&mut self, seq: u64, pending: Pending) {
        for (invariant, detail) in pending {
            self.flag(invariant, seq, detail);
        }
    }

    /// Looks up a descriptor, flagging unknown ids.
    fn desc(&mut self, seq: u64, id: u64) -> Option<&mut DescMeta> {
        if !self.descs.contains_key(&id) {
            self.flag("trace-form", seq, format!("unknown descriptor {}", id));
            return None;
        }
        self.descs.get_mut(&id)
    }

    fn rec(&mut self, seq: u64, id: u64) -> Option<&mut RecMeta> {
        if !self.recs.contains_key(&id) {
            self.flag("trace-form", seq, format!("unknown record {}", id));
            return None;
        }
        self.recs.get_mut(&id)
    }

    fn event(&mut self, seq: u64, ev: &AuditEvent) {
        match ev {
            AuditEvent::RecordCreated { record, fields } => {
                let meta = RecMeta {
                    info_history: vec![0],
                    fields: fields.iter().map(|&w| vec![w]).collect(),
                    marked: false,
                    finalized_at: None,
                };
                if self.recs.insert(*record, meta).is_some() {
                    self.flag(
                        "trace-form",
                        seq,
                        format!("record {} created twice", record),
                    );
                }
            }
            AuditEvent::ScxCreated {
                desc,
                v,
                r,
                fld_record,
                fld_index,
                old,
                new,
                infos,
            } => self.scx_created(seq, *desc, v, r, *fld_record, *fld_index, *old, *new, infos),
            AuditEvent::LlxBegin { process, record } => {
                self.open_llx.insert((*process, *record), seq);
            }
            AuditEvent::LlxEnd {
                process,
                record,
                outcome,
            } => {
                let begin = self.open_llx.remove(&(*process, *record));
                if *outcome == LlxOutcome::Fail {
                    match begin {
                        Some(b) => self.fails.push((b, seq, *process, *record)),
                        None => self.flag(
                            "trace-form",
                            seq,
                            format!(
                                "llx end for process {} record {} with no begin",
                                process, record
                            ),
                        ),
                    }
                }
            }
            AuditEvent::HelpReturn { desc, success, .. } => {
                let mut pending = Pending::new();
                if let Some(d) = self.desc(seq, *desc) {
                    if d.help_returns.iter().any(|&prev| prev != *success) {
                        pending.push((
                            "helper-agreement",
                            format!(
                                "descriptor {}: help returned {} after an earlier return of {}",
                                desc, success, !success
                            ),
                        ));
                    } else {
                        d.help_returns.push(*success);
                    }
                }
                self.flush(seq, pending);
            }
            AuditEvent::ScxEnd { desc, success, .. } => {
                let mut pending = Pending::new();
                if let Some(d) = self.desc(seq, *desc) {
                    if d.help_returns.iter().any(|&prev| prev != *success) {
                        pending.push((
                            "helper-agreement",
                            format!(
                                "descriptor {}: scx returned {} but a help invocation returned {}",
                                desc, success, !success
                            ),
                        ));
                    }
                }
                self.flush(seq, pending);
            }
            AuditEvent::ReadMarked { record, value, .. } => {
                let mut pending = Pending::new();
                if let Some(r) = self.rec(seq, *record) {
                    if r.marked != *value {
                        pending.push((
                            "trace-form",
                            format!(
                                "read of record {} marked bit observed {} but memory holds {}",
                                record, value, r.marked
                            ),
                        ));
                    }
                }
                self.flush(seq, pending);
            }
            AuditEvent::ReadInfo { record, desc, .. } => {
                let mut pending = Pending::new();
                if let Some(r) = self.rec(seq, *record) {
                    let current = *r.info_history.last().unwrap();
                    if current != *desc {
                        pending.push((
                            "trace-form",
                            format!(
                                "read of record {} info observed descriptor {} but memory holds {}",
                                record, desc, current
                            ),
                        ));
                    }
                }
                self.flush(seq, pending);
            }
            AuditEvent::ReadState { desc, state, .. } => {
                let mut pending = Pending::new();
                if let Some(d) = self.desc(seq, *desc) {
                    if d.state != *state {
                        pending.push((
                            "trace-form",
                            format!(
                                "read of descriptor {} state observed {:?} but memory holds {:?}",
                                desc, state, d.state
                            ),
                        ));
                    }
                }
                self.flush(seq, pending);
            }
            AuditEvent::ReadAllFrozen { desc, value, .. } => {
                let mut pending = Pending::new();
                if let Some(d) = self.desc(seq, *desc) {
                    if d.all_frozen != *value {
                        pending.push((
                            "trace-form",
                            format!(
                                "read of descriptor {} all-frozen observed {} but memory holds {}",
                                desc, value, d.all_frozen
                            ),
                        ));
                    }
                }
                self.flush(seq, pending);
            }
            AuditEvent::ReadMutable {
                record,
                field,
                value,
                ..
            } => {
                let mut pending = Pending::new();
                if let Some(r) = self.rec(seq, *record) {
                    match r.fields.get(*field).and_then(|h| h.last()) {
                        Some(current) if current == value => {}
                        Some(current) => {
                            pending.push((
                                "trace-form",
                                format!(
                                    "read of record {} field {} observed {:?} but memory holds {:?}",
                                    record, field, value, current
                                ),
                            ));
                        }
                        None => {
                            pending.push((
                                "trace-form",
                                format!("read of record {} field {} out of range", record, field),
                            ));
                        }
                    }
                }
                self.flush(seq, pending);
            }
            AuditEvent::FreezingCas {
                record,
                desc,
                expected,
                observed,
                success,
                ..
            } => self.freezing_cas(seq, *record, *desc, *expected, *observed, *success),
            AuditEvent::FrozenStep { desc, prev, .. } => self.frozen_step(seq, *desc, *prev),
            AuditEvent::MarkStep {
                record, desc, prev, ..
            } => self.mark_step(seq, *record, *desc, *prev),
            AuditEvent::UpdateCas {
                desc,
                record,
                field,
                old,
                new,
                observed,
                success,
                ..
            } => self.update_cas(seq, *desc, *record, *field, *old, *new, *observed, *success),
            AuditEvent::CommitStep { desc, prev, .. } => self.commit_step(seq, *desc, *prev),
            AuditEvent::AbortStep { desc, prev, .. } => self.abort_step(seq, *desc, *prev),
            AuditEvent::Warning { .. } => self.warnings += 1,
            AuditEvent::ScxBegin { .. }
            | AuditEvent::VlxBegin { .. }
            | AuditEvent::VlxEnd { .. } => {}
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn scx_created(
        &mut self,
        seq: u64,
        desc: u64,
        v: &[u64],
        r: &[u64],
        fld_record: u64,
        fld_index: usize,
        old: WordRepr,
        new: WordRepr,
        infos: &[u64],
    ) {
        if v.is_empty() {
            self.flag(
                "trace-form",
                seq,
                format!("descriptor {} has empty V", desc),
            );
        }
        if infos.len() != v.len() {
            self.flag(
                "trace-form",
                seq,
                format!(
                    "descriptor {} has {} infos for |V|={}",
                    desc,
                    infos.len(),
                    v.len()
                ),
            );
        }
        let mut rest = v.iter();
        for want in r {
            if !rest.any(|have| have == want) {
                self.flag(
                    "trace-form",
                    seq,
                    format!("descriptor {}: R is not a subsequence of V", desc),
                );
                break;
            }
        }
        if !v.contains(&fld_record) {
            self.flag(
                "trace-form",
                seq,
                format!("descriptor {}: fld record {} not in V", desc, fld_record),
            );
        }
        let meta = DescMeta {
            v: v.to_vec(),
            r: r.to_vec(),
            fld_record,
            fld_index,
            old,
            new,
            state: ScxState::InProgress,
            all_frozen: false,
            frozen_ok: vec![false; v.len()],
            update_attempts: 0,
            update_successes: 0,
            help_returns: Vec::new(),
            first_freeze: None,
            settled: None,
        };
        if self.descs.insert(desc, meta).is_some() {
            self.flag(
                "trace-form",
                seq,
                format!("descriptor {} created twice", desc),
            );
        }
    }

    fn freezing_cas(
        &mut self,
        seq: u64,
        record: u64,
        desc: u64,
        expected: u64,
        observed: u64,
        success: bool,
    ) {
        if desc == 0 {
            self.flag(
                "trace-form",
                seq,
                "freezing CAS toward the dummy descriptor".into(),
            );
            return;
        }
        let mut pending = Pending::new();
        let Some(d) = self.desc(seq, desc) else {
            return;
        };
        match d.v.iter().position(|&r| r == record) {
            Some(index) => {
                if index > 0 && !d.frozen_ok[index - 1] {
                    pending.push((
                        "freeze-order",
                        format!(
                            "freezing CAS for descriptor {} targets V[{}] before V[{}] froze",
                            desc,
                            index,
                            index - 1
                        ),
                    ));
                }
                if d.first_freeze.is_none() {
                    d.first_freeze = Some(seq);
                }
                if success {
                    d.frozen_ok[index] = true;
                }
            }
            None => {
                pending.push((
                    "freeze-order",
                    format!(
                        "freezing CAS for descriptor {} targets record {} outside its V",
                        desc, record
                    ),
                ));
                if d.first_freeze.is_none() {
                    d.first_freeze = Some(seq);
                }
            }
        }
        let finalized = self
            .recs
            .get(&record)
            .and_then(|r| r.finalized_at)
            .is_some();
        if success && finalized {
            pending.push((
                "permafrozen",
                format!(
                    "successful freezing CAS on record {} after it was finalized",
                    record
                ),
            ));
        }
        if let Some(r) = self.rec(seq, record) {
            let current = *r.info_history.last().unwrap();
            if success {
                if expected != current || observed != expected {
                    pending.push((
                        "trace-form",
                        format!(
                            "freezing CAS on record {} succeeded expecting descriptor {} but memory holds {}",
                            record, expected, current
                        ),
                    ));
                }
                if r.info_history.contains(&desc) {
                    pending.push((
                        "info-freshness",
                        format!(
                            "record {} info field set to descriptor {} a second time",
                            record, desc
                        ),
                    ));
                }
                r.info_history.push(desc);
            } else {
                if observed != current {
                    pending.push((
                        "trace-form",
                        format!(
                            "failed freezing CAS on record {} observed descriptor {} but memory holds {}",
                            record, observed, current
                        ),
                    ));
                }
                if observed == expected {
                    pending.push((
                        "trace-form",
                        format!(
                            "freezing CAS on record {} failed while memory held the expected descriptor {}",
                            record, expected
                        ),
                    ));
                }
            }
        }
        self.flush(seq, pending);
    }

    fn frozen_step(&mut self, seq: u64, desc: u64, prev: bool) {
        if desc == 0 {
            self.flag(
                "trace-form",
                seq,
                "frozen step on the dummy descriptor".into(),
            );
            return;
        }
        let mut pending = Pending::new();
        if let Some(d) = self.desc(seq, desc) {
            if d.state == ScxState::Aborted {
                pending.push((
                    "state-machine",
                    format!("frozen step on aborted descriptor {}", desc),
                ));
            } else {
                if !d.frozen_ok.iter().all(|&ok| ok) {
                    pending.push((
                        "state-machine",
                        format!(
                            "frozen step on descriptor {} before every record in V froze",
                            desc
                        ),
                    ));
                }
                if d.all_frozen != prev {
                    pending.push((
                        "trace-form",
                        format!(
                            "frozen step on descriptor {} observed previous value {} but memory holds {}",
                            desc, prev, d.all_frozen
                        ),
                    ));
                }
                d.all_frozen = true;
            }
        }
        self.flush(seq, pending);
    }

    fn mark_step(&mut self, seq: u64, record: u64, desc: u64, prev: bool) {
        if desc == 0 {
            self.flag(
                "trace-form",
                seq,
                "mark step for the dummy descriptor".into(),
            );
            return;
        }
        let mut pending = Pending::new();
        if let Some(d) = self.desc(seq, desc) {
            if !d.r.contains(&record) {
                pending.push((
                    "mark-step",
                    format!(
                        "mark step for descriptor {} targets record {} outside its R",
                        desc, record
                    ),
                ));
            }
            if d.state == ScxState::Aborted {
                pending.push((
                    "mark-step",
                    format!("mark step for aborted descriptor {}", desc),
                ));
            }
            if !d.all_frozen {
                pending.push((
                    "mark-step",
                    format!("mark step for descriptor {} before its frozen step", desc),
                ));
            }
        }
        if let Some(r) = self.rec(seq, record) {
            if r.marked != prev {
                pending.push((
                    "trace-form",
                    format!(
                        "mark step on record {} observed previous value {} but memory holds {}",
                        record, prev, r.marked
                    ),
                ));
            }
            r.marked = true;
        }
        self.flush(seq, pending);
    }

    #[allow(clippy::too_many_arguments)]
    fn update_cas(
        &mut self,
        seq: u64,
        desc: u64,
        record: u64,
        field: usize,
        old: WordRepr,
        new: WordRepr,
        observed: WordRepr,
        success: bool,
    ) {
        if desc == 0 {
            self.flag(
                "trace-form",
                seq,
                "update CAS for the dummy descriptor".into(),
            );
            return;
        }
        let mut pending = Pending::new();
        let Some(d) = self.desc(seq, desc) else {
            return;
        };
        if d.fld_record != record || d.fld_index != field {
            let detail = format!(
                "update CAS for descriptor {} targets record {} field {} instead of record {} field {}",
                desc, record, field, d.fld_record, d.fld_index
            );
            self.flag("trace-form", seq, detail);
            return;
        }
        if d.old != old || d.new != new {
            pending.push((
                "trace-form",
                format!(
                    "update CAS for descriptor {} carries old {:?} new {:?} but the descriptor holds old {:?} new {:?}",
                    desc, old, new, d.old, d.new
                ),
            ));
        }
        d.update_attempts += 1;
        let attempts = d.update_attempts;
        if success {
            d.update_successes += 1;
            if d.update_successes > 1 {
                pending.push((
                    "single-update",
                    format!("second successful update CAS for descriptor {}", desc),
                ));
            } else if attempts > 1 {
                pending.push((
                    "single-update",
                    format!(
                        "update CAS for descriptor {} succeeded on attempt {}",
                        desc, attempts
                    ),
                ));
            }
        }
        let finalized = self
            .recs
            .get(&record)
            .and_then(|r| r.finalized_at)
            .is_some();
        if success && finalized {
            pending.push((
                "permafrozen",
                format!(
                    "successful update CAS on record {} after it was finalized",
                    record
                ),
            ));
        }
        if let Some(r) = self.rec(seq, record) {
            let current = r.fields.get(field).and_then(|h| h.last()).copied();
            if success {
                if current != Some(old) || observed != old {
                    pending.push((
                        "trace-form",
                        format!(
                            "successful update CAS on record {} field {} disagrees with replayed memory",
                            record, field
                        ),
                    ));
                }
                if r.fields.get(field).is_some_and(|h| h.contains(&new)) {
                    pending.push((
                        "field-freshness",
                        format!(
                            "update CAS on record {} field {} installs {:?}, a value the field already held",
                            record, field, new
                        ),
                    ));
                }
                if let Some(h) = r.fields.get_mut(field) {
                    h.push(new);
                }
            } else if current != Some(observed) {
                pending.push((
                    "trace-form",
                    format!(
                        "failed update CAS on record {} field {} observed {:?} but memory holds {:?}",
                        record, field, observed, current
                    ),
                ));
            }
        }
        self.flush(seq, pending);
    }

    fn commit_step(&mut self, seq: u64, desc: u64, prev: ScxState) {
        if desc == 0 {
            self.flag(
                "trace-form",
                seq,
                "commit step on the dummy descriptor".into(),
            );
            return;
        }
        let mut pending = Pending::new();
        let mut finalize = Vec::new();
        if let Some(d) = self.desc(seq, desc) {
            let first = d.state == ScxState::InProgress;
            match (d.state, d.all_frozen) {
                (ScxState::Aborted, _) => {
                    pending.push((
                        "state-machine",
                        format!("commit step on aborted descriptor {}", desc),
                    ));
                }
                (ScxState::InProgress, false) => {
                    pending.push((
                        "state-machine",
                        format!("commit step on descriptor {} before its frozen step", desc),
                    ));
                }
                _ => {}
            }
            if d.state != ScxState::Aborted {
                if first && d.update_successes == 0 {
                    pending.push((
                        "state-machine",
                        format!(
                            "commit step on descriptor {} before its update CAS succeeded",
                            desc
                        ),
                    ));
                }
                if d.state != prev {
                    pending.push((
                        "trace-form",
                        format!(
                            "commit step on descriptor {} observed previous state {:?} but memory holds {:?}",
                            desc, prev, d.state
                        ),
                    ));
                }
                d.state = ScxState::Committed;
                if d.settled.is_none() {
                    d.settled = Some(seq);
                }
                if first {
                    finalize = d.r.clone();
                }
            }
        }
        for rec_id in finalize {
            if let Some(r) = self.recs.get_mut(&rec_id) {
                r.finalized_at.get_or_insert(seq);
            }
        }
        self.flush(seq, pending);
    }

    fn abort_step(&mut self, seq: u64, desc: u64, prev: ScxState) {
        if desc == 0 {
            self.flag(
                "trace-form",
                seq,
                "abort step on the dummy descriptor".into(),
            );
            return;
        }
        let mut pending = Pending::new();
        if let Some(d) = self.desc(seq, desc) {
            match (d.state, d.all_frozen) {
                (ScxState::Committed, _) => {
                    pending.push((
                        "state-machine",
                        format!("abort step on committed descriptor {}", desc),
                    ));
                }
                (state, true) => {
                    pending.push((
                        "state-machine",
                        format!("abort step on descriptor {} after its frozen step", desc),
                    ));
                    let _ = state;
                }
                (state, false) => {
                    if state != prev {
                        pending.push((
                            "trace-form",
                            format!(
                                "abort step on descriptor {} observed previous state {:?} but memory holds {:?}",
                                desc, prev, state
                            ),
                        ));
                    }
                    d.state = ScxState::Aborted;
                    if d.settled.is_none() {
                        d.settled = Some(seq);
                    }
                }
            }
        }
        self.flush(seq, pending);
    }

    fn finish(mut self, events: usize) -> AuditReport {
        let fails = std::mem::take(&mut self.fails);
        for (begin, end, process, record) in fails {
            let threatened = self.descs.values().any(|d| {
                d.v.contains(&record)
                    && match d.first_freeze {
                        Some(s) => s <= end && begin <= d.settled.unwrap_or(u64::MAX),
                        None => false,
                    }
            });
            if !threatened {
                let detail = format!(
                    "llx by process {} on record {} failed with no overlapping threat",
                    process, record
                );
                self.flag("fail-overlap", end, detail);
            }
        }
        AuditReport {
            events,
            records: self.recs.len(),
            descriptors: self.descs.len() - 1,
            warnings: self.warnings,
            violations: self.violations,
        }
    }
}

/// Replays `trace` and reports every invariant violation found.
pub fn audit_invariants(trace: &Trace) -> AuditReport {
    let mut auditor = Auditor::new();
    for entry in &trace.entries {
        auditor.event(entry.seq, &entry.event);
    }
    auditor.finish(trace.entries.len())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepOutcome {
    pub snapshots: usize,
    pub finalized: usize,
    pub fails: usize,
    /// Whether a VLX over every snapshotted record validated. Vacuously true
    /// when nothing snapshotted.
    pub vlx_ok: bool,
}

/// With no operation in flight, LLXes every record and validates the
/// snapshotted ones with one VLX. In a quiescent domain every LLX must
/// return a snapshot or report the record finalized, and the VLX must
/// succeed.
pub fn quiescent_sweep(p: &mut Process, records: &[DataRecordHandle]) -> SweepOutcome {
    let mut out = SweepOutcome {
        vlx_ok: true,
        ..SweepOutcome::default()
    };
    let mut snapshotted = Vec::new();
    for &r in records {
        match p.llx(r) {
            LlxResult::Snapshot(_) => {
                out.snapshots += 1;
                snapshotted.push(r);
            }
            LlxResult::Finalized => out.finalized += 1,
            LlxResult::Fail => out.fails += 1,
        }
    }
    if !snapshotted.is_empty() {
        out.vlx_ok = p.vlx(&snapshotted);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiset::Multiset;
    use crate::trace::TraceEntry;
    use crate::Domain;

    fn traced_run(ops: impl FnOnce(&mut Process, &Multiset)) -> (Trace, std::sync::Arc<Domain>) {
        let domain = Domain::with_audit();
        let set = Multiset::new(domain.clone());
        let mut p = domain.process();
        ops(&mut p, &set);
        (domain.trace(), domain)
    }

    fn append(trace: &mut Trace, event: AuditEvent) {
        let seq = trace.entries.last().map_or(0, |e| e.seq + 1);
        trace.entries.push(TraceEntry { seq, event });
    }

    #[test]
    fn clean_runs_audit_clean() {
        let (trace, _domain) = traced_run(|p, set| {
            set.insert(p, 1, 2);
            set.insert(p, 3, 1);
            set.insert(p, 1, 1);
            assert!(set.delete(p, 1, 2));
            assert!(set.delete(p, 3, 1));
            assert!(!set.delete(p, 9, 1));
            assert_eq!(set.get(p, 1), 1);
        });
        let report = audit_invariants(&trace);
        assert!(report.passed(), "violations: {:?}", report.violations);
        assert!(report.descriptors >= 5);
        assert!(report.records >= 4);
    }

    #[test]
    fn forged_abort_after_commit_is_flagged_once() {
        let (mut trace, _domain) = traced_run(|p, set| set.insert(p, 1, 1));
        let desc = trace
            .entries
            .iter()
            .find_map(|e| match e.event {
                AuditEvent::CommitStep { desc, .. } => Some(desc),
                _ => None,
            })
            .expect("an insert commits");
        append(
            &mut trace,
            AuditEvent::AbortStep {
                process: 0,
                desc,
                prev: ScxState::Committed,
            },
        );
        let report = audit_invariants(&trace);
        assert_eq!(report.violations.len(), 1, "{:?}", report.violations);
        assert_eq!(report.named("state-machine").count(), 1);
    }

    #[test]
    fn forged_duplicate_freeze_is_flagged_once() {
        let (mut trace, _domain) = traced_run(|p, set| set.insert(p, 1, 1));
        let (record, desc) = trace
            .entries
            .iter()
            .rev()
            .find_map(|e| match e.event {
                AuditEvent::FreezingCas {
                    record,
                    desc,
                    success: true,
                    ..
                } => Some((record, desc)),
                _ => None,
            })
            .expect("the insert freezes a record");
        append(
            &mut trace,
            AuditEvent::FreezingCas {
                process: 0,
                record,
                desc,
                expected: desc,
                observed: desc,
                success: true,
            },
        );
        let report = audit_invariants(&trace);
        assert_eq!(report.violations.len(), 1, "{:?}", report.violations);
        assert_eq!(report.named("info-freshness").count(), 1);
    }

    #[test]
    fn forged_mark_outside_r_is_flagged() {
        let (mut trace, domain) = traced_run(|p, set| {
            set.insert(p, 1, 1);
            assert!(set.delete(p, 1, 1));
        });
        let head_like = domain.record_id(domain.all_records()[1]);
        let desc = trace
            .entries
            .iter()
            .find_map(|e| match e.event {
                AuditEvent::MarkStep { desc, .. } => Some(desc),
                _ => None,
            })
            .expect("the delete marks its removals");
        append(
            &mut trace,
            AuditEvent::MarkStep {
                process: 0,
                record: head_like,
                desc,
                prev: false,
            },
        );
        let report = audit_invariants(&trace);
        assert_eq!(
            report.named("mark-step").count(),
            1,
            "{:?}",
            report.violations
        );
    }

    #[test]
    fn forged_unthreatened_llx_fail_is_flagged() {
        let (mut trace, domain) = traced_run(|p, set| set.insert(p, 1, 1));
        let record = domain.record_id(domain.all_records()[0]);
        append(&mut trace, AuditEvent::LlxBegin { process: 5, record });
        append(
            &mut trace,
            AuditEvent::LlxEnd {
                process: 5,
                record,
                outcome: LlxOutcome::Fail,
            },
        );
        let report = audit_invariants(&trace);
        assert_eq!(report.violations.len(), 1, "{:?}", report.violations);
        assert_eq!(report.named("fail-overlap").count(), 1);
    }

    #[test]
    fn unknown_ids_are_trace_form_violations() {
        let mut trace = Trace::default();
        append(
            &mut trace,
            AuditEvent::ReadMarked {
                process: 0,
                record: 404,
                value: false,
            },
        );
        let report = audit_invariants(&trace);
        assert_eq!(report.named("trace-form").count(), 1);
    }

    #[test]
    fn quiescent_sweep_sees_only_snapshots_and_finalized_records() {
        let domain = Domain::new();
        let set = Multiset::new(domain.clone());
        let mut p = domain.process();
        for k in 0..6 {
            set.insert(&mut p, k, (k as u64) + 1);
        }
        for k in 0..3 {
            assert!(set.delete(&mut p, k, 1));
        }
        assert!(set.delete(&mut p, 3, 4));
        let records = domain.all_records();
        let out = quiescent_sweep(&mut p, &records);
        assert_eq!(out.fails, 0);
        assert!(out.vlx_ok);
        assert_eq!(out.snapshots + out.finalized, records.len());
        assert!(out.finalized > 0);
    }
}
