//! Two racing SCXs under the deterministic scheduler: the script alone
//! decides the winner, and swapping one turn swaps the outcome.
//!
//! Run with: cargo run --release --example controlled_interleaving

use std::sync::Arc;

use llxscx::harness::controlled::{run_script, ControlledRunner};
use llxscx::{Domain, Field, FieldKind, FieldRef, RecordSchema, Word};

/// Runs both workers up to the step before their freezing CAS, lets
/// `first_to_freeze` freeze, then drains everyone.
fn race(first_to_freeze: usize) -> (bool, bool, u64) {
    let domain = Domain::new();
    let schema = Arc::new(RecordSchema::new(vec![FieldKind::Value], vec![]));
    let rec = domain.new_record(&schema, &[Word::Value(0)], &[]);

    let mut runner = ControlledRunner::new();
    for target in [1u64, 2] {
        let domain = domain.clone();
        runner.spawn(move || {
            let mut p = domain.process();
            match p.llx(rec) {
                r if r.is_snapshot() => p.scx(
                    &[rec],
                    &[],
                    FieldRef {
                        record: rec,
                        field: 0,
                    },
                    Word::Value(target),
                ),
                _ => false,
            }
        });
    }

    // An llx that snapshots takes six shared steps, so after six steps each
    // worker sits right before its freezing CAS.
    run_script(&mut runner, &[(0, 6), (1, 6), (first_to_freeze, 1)]).unwrap();
    runner.drain_all().unwrap();
    let results = runner.join().unwrap();

    let mut p = domain.process();
    let value = p
        .read_field(rec, Field::Mutable(0))
        .as_value()
        .expect("value field");
    (results[0], results[1], value)
}

fn main() {
    let (a, b, value) = race(0);
    println!(
        "worker 0 freezes first: results ({}, {}), field {}",
        a, b, value
    );
    assert_eq!((a, b, value), (true, false, 1));

    let (a, b, value) = race(1);
    println!(
        "worker 1 freezes first: results ({}, {}), field {}",
        a, b, value
    );
    assert_eq!((a, b, value), (false, true, 2));

    println!("the script decides the winner");
}
