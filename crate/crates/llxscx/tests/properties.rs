//! Randomized properties: the lock-free multiset against the sequential
//! model, the search checker against the brute-force checker, serialization
//! roundtrips, and structural soundness after contended runs.

use std::sync::Arc;

use proptest::prelude::*;

use llxscx::harness::audit::{audit_invariants, quiescent_sweep};
use llxscx::harness::checker::{brute_force_check, check_linearizable, CheckOptions};
use llxscx::harness::history::{EventKind, History, HistoryEvent, OpArgs, OpKind, Response};
use llxscx::harness::oracle::SequentialMultiset;
use llxscx::harness::stress::{run_stress_controlled, MixPercent, StressConfig};
use llxscx::{Domain, FieldKind, FieldRef, Multiset, RecordSchema, Word};

fn arb_op() -> impl Strategy<Value = (OpKind, i64, u64)> {
    (0..3u8, 0..6i64, 1..=3u64).prop_map(|(o, key, count)| {
        let op = match o {
            0 => OpKind::Get,
            1 => OpKind::Insert,
            _ => OpKind::Delete,
        };
        (op, key, count)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lockfree_matches_the_sequential_model(ops in proptest::collection::vec(arb_op(), 0..60)) {
        let set = Multiset::new(Domain::new());
        let mut p = set.domain().process();
        let mut model = SequentialMultiset::new();
        for (op, key, count) in ops {
            match op {
                OpKind::Get => prop_assert_eq!(set.get(&mut p, key), model.get(key)),
                OpKind::Insert => {
                    set.insert(&mut p, key, count);
                    model.insert(key, count);
                }
                OpKind::Delete => {
                    prop_assert_eq!(set.delete(&mut p, key, count), model.delete(key, count))
                }
            }
        }
        prop_assert_eq!(set.items(&mut p), model.items());
        prop_assert_eq!(set.check_sorted_chain(&mut p).unwrap(), model.items());
    }

    #[test]
    fn uncontended_scx_sequences_apply_exactly(
        steps in proptest::collection::vec((0..4usize, 0..4usize, prop::bool::ANY), 0..40)
    ) {
        let domain = Domain::new();
        let schema = Arc::new(RecordSchema::new(vec![FieldKind::Value], vec![]));
        let mut p = domain.process();
        let records: Vec<_> = (0..4)
            .map(|i| domain.new_record(&schema, &[Word::Value(i)], &[]))
            .collect();
        let mut model = [0u64, 1, 2, 3];
        for (i, (target, extra, wide)) in steps.into_iter().enumerate() {
            let v: Vec<_> = if wide && extra != target {
                vec![records[target], records[extra]]
            } else {
                vec![records[target]]
            };
            for &r in &v {
                prop_assert!(p.llx(r).is_snapshot());
            }
            let value = 100 + i as u64;
            let fld = FieldRef { record: records[target], field: 0 };
            prop_assert!(p.scx(&v, &[], fld, Word::Value(value)));
            model[target] = value;
            for (j, &r) in records.iter().enumerate() {
                let snap = match p.llx(r) {
                    llxscx::LlxResult::Snapshot(s) => s,
                    other => return Err(TestCaseError::fail(format!("llx: {other:?}"))),
                };
                prop_assert_eq!(snap.value(0), model[j]);
            }
            prop_assert!(p.vlx(&records));
        }
    }

    #[test]
    fn word_value_roundtrips(v in any::<u64>()) {
        let w = Word::Value(v);
        prop_assert_eq!(w.as_value(), Some(v));
        prop_assert_eq!(w.kind(), FieldKind::Value);
    }

    #[test]
    fn histories_roundtrip_through_ndjson(
        raw in proptest::collection::vec(
            (any::<u64>(), 0..4u32, 0..3u8, any::<i64>(), proptest::option::of(1..5u64), prop::bool::ANY, 0..3u8),
            0..40,
        )
    ) {
        let events = raw
            .into_iter()
            .map(|(seq, process, op, key, count, kind, val)| {
                let op = match op { 0 => OpKind::Get, 1 => OpKind::Insert, _ => OpKind::Delete };
                let kind = if kind { EventKind::Invoke } else { EventKind::Respond };
                let value = match val {
                    0 => None,
                    1 => Some(Response::Count(seq)),
                    _ => Some(Response::Did(seq % 2 == 0)),
                };
                HistoryEvent { seq, process, op, args: OpArgs { key, count }, kind, value }
            })
            .collect();
        let h = History { events };
        let mut buf = Vec::new();
        h.write_ndjson(&mut buf).unwrap();
        let back = History::read_ndjson(&buf[..]).unwrap();
        prop_assert_eq!(back, h);
    }
}

/// Builds a well-formed two-process history from generated raw material:
/// per-process programs, a shuffled event order, and a response mode
/// (0 = arbitrary responses, 1 = responses replayed in respond order,
/// 2 = replayed then one response corrupted).
fn build_history(
    progs: &[Vec<(OpKind, i64, u64)>],
    order: &[usize],
    rands: &[(u64, bool)],
    mode: u8,
    drop_respond: &[bool],
) -> History {
    let mut cursor = vec![(0usize, true); progs.len()];
    let mut events: Vec<HistoryEvent> = Vec::new();
    let mut oracle = SequentialMultiset::new();
    let mut resp_i = 0usize;
    for &p in order {
        let (i, is_invoke) = cursor[p];
        let (op, key, count) = progs[p][i];
        let args = match op {
            OpKind::Get => OpArgs::key(key),
            _ => OpArgs::keyed(key, count),
        };
        let seq = events.len() as u64;
        if is_invoke {
            events.push(HistoryEvent {
                seq,
                process: p as u32,
                op,
                args,
                kind: EventKind::Invoke,
                value: None,
            });
            cursor[p] = (i, false);
        } else {
            let value = if mode == 0 {
                let (n, b) = rands[resp_i % rands.len()];
                match op {
                    OpKind::Get => Some(Response::Count(n)),
                    OpKind::Insert => None,
                    OpKind::Delete => Some(Response::Did(b)),
                }
            } else {
                oracle.apply(op, args)
            };
            resp_i += 1;
            events.push(HistoryEvent {
                seq,
                process: p as u32,
                op,
                args,
                kind: EventKind::Respond,
                value,
            });
            cursor[p] = (i + 1, true);
        }
    }
    if mode == 2 {
        for ev in &mut events {
            if ev.kind == EventKind::Respond {
                match &mut ev.value {
                    Some(Response::Count(c)) => {
                        *c += 1;
                        break;
                    }
                    Some(Response::Did(b)) => {
                        *b = !*b;
                        break;
                    }
                    None => {}
                }
            }
        }
    }
    for (p, &drop) in drop_respond.iter().enumerate() {
        if drop {
            if let Some(pos) = events
                .iter()
                .rposition(|e| e.process == p as u32 && e.kind == EventKind::Respond)
            {
                events.remove(pos);
            }
        }
    }
    History { events }
}

type RawProgram = Vec<(OpKind, i64, u64)>;
type RawCase = (
    (RawProgram, RawProgram),
    Vec<usize>,
    Vec<(u64, bool)>,
    u8,
    bool,
    bool,
);

fn arb_history_case() -> impl Strategy<Value = (History, u8)> {
    let progs = (
        proptest::collection::vec(arb_small_op(), 1..=3),
        proptest::collection::vec(arb_small_op(), 1..=3),
    );
    progs.prop_flat_map(|(p0, p1)| {
        let mut slots = vec![0usize; p0.len() * 2];
        slots.extend(std::iter::repeat_n(1, p1.len() * 2));
        let n_resp = p0.len() + p1.len();
        (
            Just((p0, p1)),
            Just(slots).prop_shuffle(),
            proptest::collection::vec((0..4u64, prop::bool::ANY), n_resp),
            0..3u8,
            prop::bool::ANY,
            prop::bool::ANY,
        )
            .prop_map(|case: RawCase| {
                let ((p0, p1), order, rands, mode, d0, d1) = case;
                (
                    build_history(&[p0, p1], &order, &rands, mode, &[d0, d1]),
                    mode,
                )
            })
    })
}

fn arb_small_op() -> impl Strategy<Value = (OpKind, i64, u64)> {
    (0..3u8, 0..2i64, 1..=2u64).prop_map(|(o, key, count)| {
        let op = match o {
            0 => OpKind::Get,
            1 => OpKind::Insert,
            _ => OpKind::Delete,
        };
        (op, key, count)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn both_checkers_agree_on_synthetic_histories((h, mode) in arb_history_case()) {
        let wg = check_linearizable(&h, &CheckOptions::default()).unwrap();
        let bf = brute_force_check(&h).unwrap();
        prop_assert_eq!(wg, bf, "history: {:?}", h);
        if mode == 1 {
            // Responses replayed in respond order are linearizable by
            // construction.
            prop_assert!(wg, "history: {:?}", h);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn controlled_stress_histories_satisfy_both_checkers(seed in 0..10_000u64) {
        let cfg = StressConfig {
            processes: 2,
            ops_per_process: 5,
            key_range: 2,
            mix: MixPercent { get: 34, insert: 33, delete: 33 },
            seed,
            record_history: true,
        };
        let set = Arc::new(Multiset::new(Domain::new()));
        let out = run_stress_controlled(&cfg, set).unwrap();
        prop_assert!(check_linearizable(&out.history, &CheckOptions::default()).unwrap());
        prop_assert!(brute_force_check(&out.history).unwrap());
    }

    #[test]
    fn contended_runs_leave_a_sound_structure(seed in 0..10_000u64) {
        let cfg = StressConfig {
            processes: 3,
            ops_per_process: 40,
            key_range: 4,
            mix: MixPercent { get: 20, insert: 40, delete: 40 },
            seed,
            record_history: false,
        };
        let domain = Domain::with_audit();
        let set = Arc::new(Multiset::new(domain.clone()));
        run_stress_controlled(&cfg, set.clone()).unwrap();

        let mut p = domain.process();
        prop_assert!(set.check_sorted_chain(&mut p).is_ok());
        let records = domain.all_records();
        let sweep = quiescent_sweep(&mut p, &records);
        prop_assert_eq!(sweep.fails, 0);
        prop_assert!(sweep.vlx_ok);
        prop_assert_eq!(sweep.snapshots + sweep.finalized, records.len());

        let report = audit_invariants(&domain.trace());
        prop_assert!(report.passed(), "{}", report.summary());
    }
}
