//! Free-threaded stress over the lock-free multiset with history recording,
//! a linearizability check of that history, and a structural check of the
//! final chain.
//!
//! Run with: cargo run --release --example stress_check

use llxscx::harness::checker::{check_linearizable, CheckOptions};
use llxscx::harness::stress::{run_stress, MixPercent, StressConfig};
use llxscx::{Domain, Multiset};

fn main() {
    let domain = Domain::new();
    let ms = Multiset::new(domain.clone());
    let cfg = StressConfig {
        processes: 4,
        ops_per_process: 500,
        key_range: 6,
        mix: MixPercent {
            get: 30,
            insert: 40,
            delete: 30,
        },
        seed: 42,
        record_history: true,
    };
    let outcome = run_stress(&cfg, &ms);
    println!(
        "{} events recorded in {:.1} ms",
        outcome.history.len(),
        outcome.elapsed.as_secs_f64() * 1e3
    );
    for r in &outcome.per_process {
        println!(
            "process {}: {} ops, {} retries, {} failed freezes",
            r.process, r.ops, r.stats.retries, r.stats.freezing_cas_failed
        );
    }

    let ok = check_linearizable(&outcome.history, &CheckOptions::default())
        .expect("check completed within budget");
    assert!(ok, "history must be linearizable");
    println!("history is linearizable");

    let mut p = domain.process();
    let chain = ms.check_sorted_chain(&mut p).expect("chain invariant");
    println!("final contents: {:?}", chain);
}
