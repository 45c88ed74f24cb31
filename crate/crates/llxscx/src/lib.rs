//! Multi-record synchronization primitives built from single-word CAS.
//!
//! The core is a trio of operations over *records* (fixed sets of single-word
//! mutable fields plus immutable fields):
//!
//! - **`llx(r)`** — load-link extended: a consistent snapshot of all of `r`'s
//!   mutable fields, or `Finalized` if `r` was permanently removed, or `Fail`
//!   on conflict.
//! - **`scx(V, R, fld, new)`** — store-conditional extended: atomically set
//!   one field to `new` provided *none* of the records in `V` changed since
//!   this process link-loaded them, finalizing the records in `R`.
//! - **`vlx(V)`** — validate extended: check that the records in `V` are
//!   unchanged since their linked `llx`s.
//!
//! An uncontended `scx` over `k` records finalizing `f` of them costs exactly
//! `k + 1` CAS steps and `f + 2` writes, and `vlx` over `k` records reads
//! exactly `k` shared words; per-invocation [`StepCounters`] expose the
//! tallies. Stalled operations are helped to completion by whoever runs into
//! them, so no thread can block another indefinitely.
//!
//! On top of the primitives sit:
//!
//! - [`Multiset`] — a lock-free sorted linked-list multiset (`get` /
//!   `insert` / `delete` of key occurrences).
//! - [`harness`] — history recording, a sequential oracle, a
//!   linearizability checker, a deterministic controlled scheduler driven by
//!   named yield points, and trace auditors for the protocol invariants.
//!
//! The `llxscx` binary exposes the harness as a small CLI (`stress`, `check`,
//! `steps` subcommands). Setting the `LLXSCX_AUDIT` environment variable makes
//! every domain stream its audit trace as newline-delimited JSON.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example primitives_basics      # llx/scx/vlx on plain records
//! cargo run --release --example step_counts            # exact step-complexity tallies
//! cargo run --release --example controlled_interleaving # deterministic two-thread schedules
//! cargo run --release --example multiset_ops           # the sorted multiset
//! cargo run --release --example stress_check           # stress run + linearizability check
//! cargo run --release --example audit_trace            # audit traces and invariant auditors
//! ```

pub mod cli;
mod descriptor;
mod domain;
pub mod harness;
mod multiset;
mod process;
mod record;
pub mod step;
pub mod trace;
mod word;

pub use descriptor::ScxState;
pub use domain::{Domain, AUDIT_ENV};
pub use multiset::{Key, Multiset, NODE_COUNT, NODE_NEXT};
pub use process::{LlxResult, Process, ProcessStats, Snapshot, StepCounters};
pub use record::{DataRecordHandle, Field, FieldRef};
pub use word::{FieldKind, RecordSchema, Word};
