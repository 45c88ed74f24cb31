//! Single-word field values.
//!
//! Every mutable field of a [`DataRecord`](crate::record::DataRecord) is one
//! 64-bit machine word so that it can be read and CASed atomically. A word is
//! either a plain value or a handle to another record; which of the two a
//! given field holds is fixed per field by the record's schema, so no tag bits
//! are stolen from the payload.

use crate::record::DataRecordHandle;

/// Kind of a field, fixed at schema creation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// The field holds an arbitrary 64-bit value.
    Value,
    /// The field holds an optional handle to another record.
    Handle,
}

/// A decoded field value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Word {
    /// A plain 64-bit value.
    Value(u64),
    /// A handle to another record, or none.
    Handle(Option<DataRecordHandle>),
}

impl Word {
    /// The schema kind this word belongs to.
    pub fn kind(self) -> FieldKind {
        match self {
            Word::Value(_) => FieldKind::Value,
            Word::Handle(_) => FieldKind::Handle,
        }
    }

    /// The plain value, if this word is one.
    pub fn as_value(self) -> Option<u64> {
        match self {
            Word::Value(v) => Some(v),
            Word::Handle(_) => None,
        }
    }

    /// The handle, if this word is one. Returns `None` for value words,
    /// `Some(None)` for a nil handle.
    pub fn as_handle(self) -> Option<Option<DataRecordHandle>> {
        match self {
            Word::Value(_) => None,
            Word::Handle(h) => Some(h),
        }
    }

    pub(crate) fn encode(self) -> u64 {
        match self {
            Word::Value(v) => v,
            Word::Handle(None) => 0,
            Word::Handle(Some(h)) => h.addr(),
        }
    }

    pub(crate) fn decode(kind: FieldKind, raw: u64) -> Word {
        match kind {
            FieldKind::Value => Word::Value(raw),
            FieldKind::Handle if raw == 0 => Word::Handle(None),
            FieldKind::Handle => Word::Handle(Some(DataRecordHandle::from_addr(raw))),
        }
    }
}

/// Field layout shared by all records of one type: the kinds of the `y`
/// mutable fields and the `z` immutable fields.
#[derive(Debug, Clone)]
pub struct RecordSchema {
    mutable: Box<[FieldKind]>,
    immutable: Box<[FieldKind]>,
}

impl RecordSchema {
    pub fn new(mutable: Vec<FieldKind>, immutable: Vec<FieldKind>) -> Self {
        RecordSchema {
            mutable: mutable.into(),
            immutable: immutable.into(),
        }
    }

    /// Number of mutable fields (`y`).
    pub fn mutable_len(&self) -> usize {
        self.mutable.len()
    }

    /// Number of immutable fields (`z`).
    pub fn immutable_len(&self) -> usize {
        self.immutable.len()
    }

    pub fn mutable_kind(&self, index: usize) -> FieldKind {
        self.mutable[index]
    }

    pub fn immutable_kind(&self, index: usize) -> FieldKind {
        self.immutable[index]
    }
}
