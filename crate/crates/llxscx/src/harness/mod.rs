//! Verification tooling: history recording, a sequential reference model,
//! linearizability checking, deterministic schedule control, randomized
//! stress drivers, and trace auditors for the primitive-level invariants.

pub mod audit;
pub mod checker;
pub mod controlled;
pub mod history;
pub mod oracle;
pub mod stress;
