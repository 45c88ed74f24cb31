//! Allocation domain.
//!
//! A [`Domain`] owns every record and descriptor created within it and frees
//! them when dropped; nothing is reclaimed earlier. That sidesteps safe memory
//! reclamation entirely — handles stay valid while the domain is alive, so a
//! descriptor address observed in an info field can never be reused for a
//! different descriptor, which is what makes the freezing CAS immune to ABA.
//! The domain also owns the audit machinery: when auditing is on, each
//! shared-memory step executes under the trace lock so the trace order is the
//! order the steps took effect.

use std::env;
use std::fs::OpenOptions;
use std::io::Write;
use std::ptr::NonNull;
use std::sync::atomic::{AtomicBool, AtomicPtr, AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::descriptor::ScxRecord;
use crate::process::Process;
use crate::record::{DataRecord, DataRecordHandle, FieldRef};
use crate::trace::{AuditEvent, Trace, TraceEntry, WordRepr};
use crate::word::{FieldKind, RecordSchema, Word};

/// Environment variable enabling audit output. When set, domains audit and
/// stream each event as one JSON line: to standard error if the value is `1`,
/// `true`, or `stderr`, otherwise appending to the file it names.
pub const AUDIT_ENV: &str = "LLXSCX_AUDIT";

enum TeeTarget {
    Stderr,
    File(String),
}

struct AuditLog {
    entries: Vec<TraceEntry>,
    tee: Option<TeeTarget>,
    tee_writer: Option<Box<dyn Write + Send>>,
}

impl AuditLog {
    fn push(&mut self, event: AuditEvent) {
        let entry = TraceEntry {
            seq: self.entries.len() as u64,
            event,
        };
        if self.tee.is_some() || self.tee_writer.is_some() {
            // Open the sink lazily so idle domains never touch the file.
            if self.tee_writer.is_none() {
                self.tee_writer = match self.tee.take() {
                    Some(TeeTarget::Stderr) => Some(Box::new(std::io::stderr())),
                    Some(TeeTarget::File(path)) => OpenOptions::new()
                        .create(true)
                        .append(true)
                        .open(&path)
                        .ok()
                        .map(|f| Box::new(f) as Box<dyn Write + Send>),
                    None => None,
                };
            }
            if let Some(w) = &mut self.tee_writer {
                let _ = serde_json::to_writer(&mut *w, &entry);
                let _ = w.write_all(b"\n");
            }
        }
        self.entries.push(entry);
    }
}

pub struct Domain {
    records: Mutex<Vec<NonNull<DataRecord>>>,
    descriptors: Mutex<Vec<NonNull<ScxRecord>>>,
    dummy: *mut ScxRecord,
    next_record_id: AtomicU64,
    next_desc_id: AtomicU64,
    next_process_id: AtomicU32,
    audit: Option<Mutex<AuditLog>>,
}

unsafe impl Send for Domain {}
unsafe impl Sync for Domain {}

impl Domain {
    /// Creates a domain. Auditing is enabled only if [`AUDIT_ENV`] is set.
    pub fn new() -> Arc<Domain> {
        Self::build(env_tee().is_some())
    }

    /// Creates a domain with in-memory auditing on, regardless of the
    /// environment ([`AUDIT_ENV`] still adds a streamed copy if set).
    pub fn with_audit() -> Arc<Domain> {
        Self::build(true)
    }

    fn build(audit: bool) -> Arc<Domain> {
        let dummy = Box::into_raw(Box::new(ScxRecord::dummy()));
        Arc::new(Domain {
            records: Mutex::new(Vec::new()),
            descriptors: Mutex::new(Vec::new()),
            dummy,
            next_record_id: AtomicU64::new(0),
            next_desc_id: AtomicU64::new(1), // 0 is the dummy
            next_process_id: AtomicU32::new(0),
            audit: audit.then(|| {
                Mutex::new(AuditLog {
                    entries: Vec::new(),
                    tee: env_tee(),
                    tee_writer: None,
                })
            }),
        })
    }

    pub fn audit_enabled(&self) -> bool {
        self.audit.is_some()
    }

    /// A copy of the audit trace so far. Empty if auditing is off.
    pub fn trace(&self) -> Trace {
        match &self.audit {
            Some(log) => Trace {
                entries: log.lock().unwrap().entries.clone(),
            },
            None => Trace::default(),
        }
    }

    /// Registers a new process and hands back its context. Each process owns
    /// its table of LLX results, so a context must not be shared across
    /// threads mid-operation; create one per worker.
    pub fn process(self: &Arc<Self>) -> Process {
        let id = self.next_process_id.fetch_add(1, Ordering::SeqCst);
        Process::new(Arc::clone(self), id)
    }

    /// Creates a record with the given initial field values. Field counts and
    /// kinds must match the schema.
    pub fn new_record(
        &self,
        schema: &Arc<RecordSchema>,
        mutable: &[Word],
        immutable: &[Word],
    ) -> DataRecordHandle {
        assert_eq!(
            mutable.len(),
            schema.mutable_len(),
            "new_record: wrong number of mutable fields"
        );
        assert_eq!(
            immutable.len(),
            schema.immutable_len(),
            "new_record: wrong number of immutable fields"
        );
        for (i, w) in mutable.iter().enumerate() {
            assert_eq!(
                w.kind(),
                schema.mutable_kind(i),
                "new_record: mutable field {i} has the wrong kind"
            );
        }
        for (i, w) in immutable.iter().enumerate() {
            assert_eq!(
                w.kind(),
                schema.immutable_kind(i),
                "new_record: immutable field {i} has the wrong kind"
            );
        }
        let id = self.next_record_id.fetch_add(1, Ordering::SeqCst);
        let record = Box::new(DataRecord {
            id,
            schema: Arc::clone(schema),
            mutable: mutable.iter().map(|w| AtomicU64::new(w.encode())).collect(),
            immutable: immutable.iter().map(|w| w.encode()).collect(),
            info: AtomicPtr::new(self.dummy),
            marked: AtomicBool::new(false),
        });
        let ptr = NonNull::from(Box::leak(record));
        self.records.lock().unwrap().push(ptr);
        let handle = DataRecordHandle::new(ptr);
        self.emit(|| AuditEvent::RecordCreated {
            record: id,
            fields: mutable.iter().map(|w| self.word_repr(*w)).collect(),
        });
        handle
    }

    /// Every record ever allocated in this domain, in creation order.
    pub fn all_records(&self) -> Vec<DataRecordHandle> {
        self.records
            .lock()
            .unwrap()
            .iter()
            .map(|p| DataRecordHandle::new(*p))
            .collect()
    }

    /// The stable id assigned to `record` at creation.
    pub fn record_id(&self, record: DataRecordHandle) -> u64 {
        unsafe { record.get() }.id
    }

    pub(crate) fn new_descriptor(
        &self,
        v: Box<[DataRecordHandle]>,
        r: Box<[DataRecordHandle]>,
        fld: FieldRef,
        old: u64,
        new: u64,
        info_fields: Box<[*mut ScxRecord]>,
    ) -> *mut ScxRecord {
        let id = self.next_desc_id.fetch_add(1, Ordering::SeqCst);
        let created = || AuditEvent::ScxCreated {
            desc: id,
            v: v.iter().map(|h| unsafe { h.get() }.id).collect(),
            r: r.iter().map(|h| unsafe { h.get() }.id).collect(),
            fld_record: unsafe { fld.record.get() }.id,
            fld_index: fld.field,
            old: self.raw_repr(field_kind(fld), old),
            new: self.raw_repr(field_kind(fld), new),
            infos: info_fields.iter().map(|p| unsafe { &**p }.id).collect(),
        };
        let event = self.audit.is_some().then(created);
        let desc = Box::new(ScxRecord::new(id, v, r, fld, old, new, info_fields));
        let ptr = NonNull::from(Box::leak(desc));
        self.descriptors.lock().unwrap().push(ptr);
        if let Some(event) = event {
            self.emit(|| event);
        }
        ptr.as_ptr()
    }

    /// Runs one shared-memory step. With auditing on, the step and its event
    /// are appended under the trace lock, so trace order equals memory order.
    pub(crate) fn step<T>(
        &self,
        op: impl FnOnce() -> T,
        event: impl FnOnce(&T) -> AuditEvent,
    ) -> T {
        match &self.audit {
            Some(log) => {
                let mut log = log.lock().unwrap();
                let out = op();
                log.push(event(&out));
                out
            }
            None => op(),
        }
    }

    /// Appends a bookkeeping event (operation boundaries, warnings) that is
    /// not itself a shared-memory step.
    pub(crate) fn emit(&self, event: impl FnOnce() -> AuditEvent) {
        if let Some(log) = &self.audit {
            log.lock().unwrap().push(event());
        }
    }

    pub(crate) fn word_repr(&self, word: Word) -> WordRepr {
        match word {
            Word::Value(v) => WordRepr::Value(v),
            Word::Handle(None) => WordRepr::Nil,
            Word::Handle(Some(h)) => WordRepr::Record(unsafe { h.get() }.id),
        }
    }

    pub(crate) fn raw_repr(&self, kind: FieldKind, raw: u64) -> WordRepr {
        self.word_repr(Word::decode(kind, raw))
    }
}

fn field_kind(fld: FieldRef) -> FieldKind {
    unsafe { fld.record.get() }.schema.mutable_kind(fld.field)
}

fn env_tee() -> Option<TeeTarget> {
    let value = env::var(AUDIT_ENV).ok()?;
    if value.is_empty() || value == "0" {
        return None;
    }
    Some(match value.as_str() {
        "1" | "true" | "stderr" => TeeTarget::Stderr,
        path => TeeTarget::File(path.to_string()),
    })
}

impl Drop for Domain {
    fn drop(&mut self) {
        for ptr in self.records.get_mut().unwrap().drain(..) {
            drop(unsafe { Box::from_raw(ptr.as_ptr()) });
        }
        for ptr in self.descriptors.get_mut().unwrap().drain(..) {
            drop(unsafe { Box::from_raw(ptr.as_ptr()) });
        }
        drop(unsafe { Box::from_raw(self.dummy) });
    }
}
