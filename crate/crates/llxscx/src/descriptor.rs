//! SCX-records (operation descriptors).
//!
//! Each SCX invocation publishes one descriptor holding everything another
//! thread needs to finish the operation on its behalf: the records to freeze
//! (`v`, in order), the subsequence to finalize (`r`), the single field to
//! CAS with its expected old and new values, and two pieces of mutable state —
//! a three-valued `state` and an `all_frozen` bit. Descriptors are never
//! mutated except through those two fields, and never reused, so a record's
//! info pointer never takes the same value twice.

use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicBool, AtomicU8, Ordering};

use crate::record::{DataRecordHandle, FieldRef};

/// Status of an SCX descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScxState {
    InProgress,
    Committed,
    Aborted,
}

const IN_PROGRESS: u8 = 0;
const COMMITTED: u8 = 1;
const ABORTED: u8 = 2;

impl ScxState {
    fn from_u8(v: u8) -> ScxState {
        match v {
            IN_PROGRESS => ScxState::InProgress,
            COMMITTED => ScxState::Committed,
            ABORTED => ScxState::Aborted,
            _ => unreachable!("invalid descriptor state {v}"),
        }
    }

    fn to_u8(self) -> u8 {
        match self {
            ScxState::InProgress => IN_PROGRESS,
            ScxState::Committed => COMMITTED,
            ScxState::Aborted => ABORTED,
        }
    }
}

pub struct ScxRecord {
    pub(crate) id: u64,
    pub(crate) v: Box<[DataRecordHandle]>,
    pub(crate) r: Box<[DataRecordHandle]>,
    /// `None` only for the domain's dummy descriptor.
    pub(crate) fld: Option<FieldRef>,
    pub(crate) old: u64,
    pub(crate) new: u64,
    pub(crate) state: AtomicU8,
    pub(crate) all_frozen: AtomicBool,
    /// For each element of `v`, the info value the linked LLX observed.
    pub(crate) info_fields: Box<[*mut ScxRecord]>,
}

impl ScxRecord {
    pub(crate) fn new(
        id: u64,
        v: Box<[DataRecordHandle]>,
        r: Box<[DataRecordHandle]>,
        fld: FieldRef,
        old: u64,
        new: u64,
        info_fields: Box<[*mut ScxRecord]>,
    ) -> ScxRecord {
        ScxRecord {
            id,
            v,
            r,
            fld: Some(fld),
            old,
            new,
            state: AtomicU8::new(IN_PROGRESS),
            all_frozen: AtomicBool::new(false),
            info_fields,
        }
    }

    /// The dummy descriptor every record's info pointer starts at: forever
    /// aborted, never frozen, belonging to no operation.
    pub(crate) fn dummy() -> ScxRecord {
        ScxRecord {
            id: 0,
            v: Box::new([]),
            r: Box::new([]),
            fld: None,
            old: 0,
            new: 0,
            state: AtomicU8::new(ABORTED),
            all_frozen: AtomicBool::new(false),
            info_fields: Box::new([]),
        }
    }

    pub(crate) fn load_state(&self) -> ScxState {
        ScxState::from_u8(self.state.load(Ordering::SeqCst))
    }

    /// Stores `state`, returning the previous value (captured so auditors can
    /// replay the transition).
    pub(crate) fn swap_state(&self, state: ScxState) -> ScxState {
        ScxState::from_u8(self.state.swap(state.to_u8(), Ordering::SeqCst))
    }
}
