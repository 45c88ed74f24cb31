//! Shared-memory step counts of uncontended operations over a grid of V/R
//! sizes, checked against the closed forms: an SCX over k records
//! finalizing f of them performs exactly k+1 CAS steps and f+2 writes; a
//! VLX over k records performs exactly k shared reads.
//!
//! Run with: cargo run --release --example step_counts

use llxscx::cli::measure_steps;

fn main() {
    println!(
        "{:>3} {:>3} {:>6} {:>8} {:>10}",
        "k", "f", "cas", "writes", "vlx reads"
    );
    for k in 1..=8usize {
        for f in 0..=k {
            let (scx, vlx_reads) = measure_steps(k, f);
            assert_eq!(scx.cas_total(), k as u64 + 1);
            assert_eq!(scx.writes, f as u64 + 2);
            assert_eq!(vlx_reads, k as u64);
            println!(
                "{:>3} {:>3} {:>6} {:>8} {:>10}",
                k,
                f,
                scx.cas_total(),
                scx.writes,
                vlx_reads
            );
        }
    }
    println!("all counts match the closed forms");
}
