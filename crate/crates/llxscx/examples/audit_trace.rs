//! Records an audit trace of a contended run, replays it through the
//! invariant auditors, then forges a violation into a copy of the trace and
//! shows it being caught.
//!
//! Run with: cargo run --release --example audit_trace

use std::sync::Arc;

use llxscx::harness::audit::audit_invariants;
use llxscx::harness::stress::{run_stress_controlled, MixPercent, StressConfig};
use llxscx::trace::{AuditEvent, TraceEntry};
use llxscx::{Domain, Multiset, ScxState};

fn main() {
    let domain = Domain::with_audit();
    let multiset = Arc::new(Multiset::new(domain.clone()));
    let cfg = StressConfig {
        processes: 3,
        ops_per_process: 60,
        key_range: 4,
        mix: MixPercent {
            get: 20,
            insert: 40,
            delete: 40,
        },
        seed: 11,
        record_history: false,
    };
    run_stress_controlled(&cfg, multiset).expect("controlled run failed");

    let trace = domain.trace();
    let report = audit_invariants(&trace);
    println!("clean trace: {}", report.summary());
    for v in &report.violations {
        println!("  {}", v);
    }
    assert!(report.passed(), "a clean run must audit clean");

    // Forge an abort step on a descriptor that already committed; the
    // lifecycle auditor must flag exactly that.
    let mut forged = trace.clone();
    let committed = forged
        .entries
        .iter()
        .find_map(|e| match e.event {
            AuditEvent::CommitStep { desc, .. } => Some(desc),
            _ => None,
        })
        .expect("no committed descriptor in trace");
    forged.entries.push(TraceEntry {
        seq: forged.entries.len() as u64,
        event: AuditEvent::AbortStep {
            process: 0,
            desc: committed,
            prev: ScxState::Committed,
        },
    });
    let report = audit_invariants(&forged);
    println!("forged trace: {}", report.summary());
    for v in &report.violations {
        println!("  {}", v);
    }
    assert_eq!(report.violations.len(), 1);
    assert_eq!(report.violations[0].invariant, "state-machine");
}
