//! Data-records.
//!
//! A record is the unit the primitives operate on: `y` single-word mutable
//! fields that may only change through a successful SCX, `z` immutable fields
//! set at creation, plus two bookkeeping fields the client never touches — an
//! `info` pointer to the descriptor of the last SCX that froze the record, and
//! a `marked` bit set when the record is being finalized (permanently removed
//! from its data structure).

use std::ptr::NonNull;
use std::sync::atomic::{AtomicBool, AtomicPtr, AtomicU64};
use std::sync::Arc;

use crate::descriptor::ScxRecord;
use crate::word::RecordSchema;

pub struct DataRecord {
    pub(crate) id: u64,
    pub(crate) schema: Arc<RecordSchema>,
    pub(crate) mutable: Box<[AtomicU64]>,
    pub(crate) immutable: Box<[u64]>,
    pub(crate) info: AtomicPtr<ScxRecord>,
    pub(crate) marked: AtomicBool,
}

/// A copyable reference to a record.
///
/// Handles stay valid for the lifetime of the [`Domain`](crate::Domain) that
/// created the record; the domain owns all record memory and frees it when
/// dropped. All field access goes through a [`Process`](crate::Process) or the
/// domain, both of which keep the domain alive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DataRecordHandle(NonNull<DataRecord>);

unsafe impl Send for DataRecordHandle {}
unsafe impl Sync for DataRecordHandle {}

impl DataRecordHandle {
    pub(crate) fn new(ptr: NonNull<DataRecord>) -> Self {
        DataRecordHandle(ptr)
    }

    pub(crate) fn addr(self) -> u64 {
        self.0.as_ptr() as u64
    }

    pub(crate) fn from_addr(raw: u64) -> Self {
        debug_assert!(raw != 0);
        DataRecordHandle(unsafe { NonNull::new_unchecked(raw as *mut DataRecord) })
    }

    /// Dereferences the handle. Caller must ensure the owning domain is alive.
    pub(crate) unsafe fn get<'a>(self) -> &'a DataRecord {
        unsafe { self.0.as_ref() }
    }
}

/// Locates one mutable field: the field SCX will CAS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldRef {
    pub record: DataRecordHandle,
    pub field: usize,
}

/// Selects a field of a record for [`Process::read_field`](crate::Process::read_field).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Mutable(usize),
    Immutable(usize),
}
