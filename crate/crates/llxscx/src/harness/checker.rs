//! Linearizability checking for recorded multiset histories.
//!
//! `check_linearizable` runs a depth-first search over linearization
//! prefixes. A search state is the pair (per-process progress vector,
//! reference-model state); states are memoized in full, so a pruned branch
//! is never one that could have led to a different outcome. Candidate next
//! operations are the per-process fronts that no other front precedes in
//! real time, which is sufficient because program order makes any deeper
//! operation transitively preceded by its own front.
//!
//! Operations still pending at the end of a history (an invoke with no
//! respond) may have taken effect or not; they are always the last event of
//! their process, and the search covers both choices by being allowed to
//! advance past them (with any response) or to stop without them.
//!
//! `brute_force_check` answers the same question by enumerating complete
//! interleavings outright, with per-step precedence checks against every
//! unapplied operation and no memoization. It is exponentially slower and
//! exists to cross-check the search on small histories.

use std::collections::HashSet;

use crate::harness::history::{EventKind, History, HistoryEvent, OpArgs, OpKind, Response};
use crate::harness::oracle::SequentialMultiset;

#[derive(Debug, Clone)]
pub struct CheckOptions {
    /// Upper bound on distinct search states expanded before giving up.
    pub max_expansions: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            max_expansions: 2_000_000,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CheckError {
    #[error("malformed history: {0}")]
    Malformed(String),
    #[error("checker budget exhausted after {0} state expansions")]
    BudgetExhausted(u64),
}

#[derive(Debug, Clone)]
struct OpRec {
    op: OpKind,
    args: OpArgs,
    invoke_seq: u64,
    respond_seq: Option<u64>,
    response: Option<Response>,
}

impl OpRec {
    fn completed(&self) -> bool {
        self.respond_seq.is_some()
    }
}

#[derive(Debug)]
struct Parsed {
    /// Per-process operation sequences in program order. Process ids are
    /// renumbered densely; the mapping does not matter to the checker.
    ops: Vec<Vec<OpRec>>,
    completed_len: Vec<usize>,
}

fn validate_response(op: OpKind, value: &Option<Response>) -> Result<(), String> {
    match (op, value) {
        (OpKind::Get, Some(Response::Count(_))) => Ok(()),
        (OpKind::Insert, None) => Ok(()),
        (OpKind::Delete, Some(Response::Did(_))) => Ok(()),
        (OpKind::Get, v) => Err(format!("get respond must carry a count, got {:?}", v)),
        (OpKind::Insert, v) => Err(format!("insert respond must carry no value, got {:?}", v)),
        (OpKind::Delete, v) => Err(format!("delete respond must carry a flag, got {:?}", v)),
    }
}

fn parse(history: &History) -> Result<Parsed, CheckError> {
    let mut events: Vec<&HistoryEvent> = history.events.iter().collect();
    events.sort_by_key(|e| e.seq);

    let mut pids: Vec<u32> = events.iter().map(|e| e.process).collect();
    pids.sort_unstable();
    pids.dedup();
    let pindex = |p: u32| pids.binary_search(&p).unwrap();

    let mut ops: Vec<Vec<OpRec>> = vec![Vec::new(); pids.len()];
    let mut open: Vec<bool> = vec![false; pids.len()];

    for ev in events {
        let p = pindex(ev.process);
        match ev.kind {
            EventKind::Invoke => {
                if open[p] {
                    return Err(CheckError::Malformed(format!(
                        "process {} invokes at seq {} while an operation is pending",
                        ev.process, ev.seq
                    )));
                }
                if ev.value.is_some() {
                    return Err(CheckError::Malformed(format!(
                        "invoke at seq {} carries a value",
                        ev.seq
                    )));
                }
                ops[p].push(OpRec {
                    op: ev.op,
                    args: ev.args,
                    invoke_seq: ev.seq,
                    respond_seq: None,
                    response: None,
                });
                open[p] = true;
            }
            EventKind::Respond => {
                if !open[p] {
                    return Err(CheckError::Malformed(format!(
                        "process {} responds at seq {} with no pending invoke",
                        ev.process, ev.seq
                    )));
                }
                let rec = ops[p].last_mut().unwrap();
                if rec.op != ev.op || rec.args != ev.args {
                    return Err(CheckError::Malformed(format!(
                        "respond at seq {} does not match the pending invoke of process {}",
                        ev.seq, ev.process
                    )));
                }
                validate_response(ev.op, &ev.value).map_err(|m| {
                    CheckError::Malformed(format!("respond at seq {}: {}", ev.seq, m))
                })?;
                rec.respond_seq = Some(ev.seq);
                rec.response = ev.value;
                open[p] = false;
            }
        }
    }

    let completed_len = ops
        .iter()
        .map(|seq| seq.iter().filter(|o| o.completed()).count())
        .collect();
    Ok(Parsed { ops, completed_len })
}

type StateKey = (Vec<u32>, Vec<(i64, u64)>);

struct Frame {
    indices: Vec<u32>,
    oracle: SequentialMultiset,
    cands: Vec<usize>,
    next: usize,
}

fn fronts<'a>(parsed: &'a Parsed, indices: &[u32]) -> Vec<(usize, &'a OpRec)> {
    indices
        .iter()
        .enumerate()
        .filter_map(|(p, &i)| parsed.ops[p].get(i as usize).map(|rec| (p, rec)))
        .collect()
}

fn candidates(parsed: &Parsed, indices: &[u32]) -> Vec<usize> {
    let fr = fronts(parsed, indices);
    fr.iter()
        .filter(|(p, rec)| {
            fr.iter().all(|(q, other)| {
                q == p
                    || match other.respond_seq {
                        Some(r) => r > rec.invoke_seq,
                        None => true,
                    }
            })
        })
        .map(|&(p, _)| p)
        .collect()
}

fn all_completed_done(parsed: &Parsed, indices: &[u32]) -> bool {
    indices
        .iter()
        .zip(&parsed.completed_len)
        .all(|(&i, &need)| i as usize >= need)
}

/// Decides whether the history has a linearization: a total order of its
/// completed operations (plus any subset of the pending ones) that respects
/// real time and replays correctly against the sequential model.
pub fn check_linearizable(history: &History, opts: &CheckOptions) -> Result<bool, CheckError> {
    let parsed = parse(history)?;
    let nproc = parsed.ops.len();

    let init_indices = vec![0u32; nproc];
    if all_completed_done(&parsed, &init_indices) {
        return Ok(true);
    }

    let mut visited: HashSet<StateKey> = HashSet::new();
    let oracle = SequentialMultiset::new();
    visited.insert((init_indices.clone(), oracle.items()));
    let mut stack = vec![Frame {
        cands: candidates(&parsed, &init_indices),
        indices: init_indices,
        oracle,
        next: 0,
    }];
    let mut expansions: u64 = 0;

    while let Some(frame) = stack.last_mut() {
        if frame.next >= frame.cands.len() {
            stack.pop();
            continue;
        }
        let p = frame.cands[frame.next];
        frame.next += 1;

        let rec = &parsed.ops[p][frame.indices[p] as usize];
        let mut oracle = frame.oracle.clone();
        let resp = oracle.apply(rec.op, rec.args);
        if rec.completed() && resp != rec.response {
            continue;
        }

        let mut indices = frame.indices.clone();
        indices[p] += 1;
        if all_completed_done(&parsed, &indices) {
            return Ok(true);
        }

        if visited.insert((indices.clone(), oracle.items())) {
            expansions += 1;
            if expansions > opts.max_expansions {
                return Err(CheckError::BudgetExhausted(opts.max_expansions));
            }
            let cands = candidates(&parsed, &indices);
            stack.push(Frame {
                indices,
                oracle,
                cands,
                next: 0,
            });
        }
    }

    Ok(false)
}

/// Exhaustive reference checker: for every choice of which pending
/// operations took effect, enumerates every real-time-respecting
/// interleaving of the chosen operations and replays it. No memoization,
/// and precedence is checked against all unapplied operations rather than
/// only fronts. Only suitable for small histories.
pub fn brute_force_check(history: &History) -> Result<bool, CheckError> {
    let parsed = parse(history)?;
    let nproc = parsed.ops.len();

    let pending: Vec<usize> = (0..nproc)
        .filter(|&p| parsed.ops[p].len() > parsed.completed_len[p])
        .collect();

    for mask in 0u32..(1 << pending.len()) {
        let take_len: Vec<usize> = (0..nproc)
            .map(|p| {
                let mut n = parsed.completed_len[p];
                if let Some(bit) = pending.iter().position(|&q| q == p) {
                    if mask & (1 << bit) != 0 {
                        n = parsed.ops[p].len();
                    }
                }
                n
            })
            .collect();
        if enumerate(
            &parsed,
            &take_len,
            &mut vec![0; nproc],
            &mut SequentialMultiset::new(),
        ) {
            return Ok(true);
        }
    }
    Ok(false)
}

fn enumerate(
    parsed: &Parsed,
    take_len: &[usize],
    done: &mut Vec<u32>,
    oracle: &mut SequentialMultiset,
) -> bool {
    if done
        .iter()
        .zip(take_len)
        .all(|(&d, &need)| d as usize >= need)
    {
        return true;
    }
    for p in 0..parsed.ops.len() {
        if (done[p] as usize) >= take_len[p] {
            continue;
        }
        let rec = &parsed.ops[p][done[p] as usize];
        // Valid next only if no unapplied chosen operation finished before
        // this one began.
        let blocked = (0..parsed.ops.len()).any(|q| {
            (done[q] as usize..take_len[q]).any(|j| {
                let other = &parsed.ops[q][j];
                !(q == p && j == done[p] as usize)
                    && matches!(other.respond_seq, Some(r) if r < rec.invoke_seq)
            })
        });
        if blocked {
            continue;
        }
        let mut trial = oracle.clone();
        let resp = trial.apply(rec.op, rec.args);
        if rec.completed() && resp != rec.response {
            continue;
        }
        done[p] += 1;
        if enumerate(parsed, take_len, done, &mut trial) {
            return true;
        }
        done[p] -= 1;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(
        seq: u64,
        process: u32,
        op: OpKind,
        args: OpArgs,
        kind: EventKind,
        value: Option<Response>,
    ) -> HistoryEvent {
        HistoryEvent {
            seq,
            process,
            op,
            args,
            kind,
            value,
        }
    }

    fn invoke(seq: u64, process: u32, op: OpKind, args: OpArgs) -> HistoryEvent {
        ev(seq, process, op, args, EventKind::Invoke, None)
    }

    fn respond(
        seq: u64,
        process: u32,
        op: OpKind,
        args: OpArgs,
        value: Option<Response>,
    ) -> HistoryEvent {
        ev(seq, process, op, args, EventKind::Respond, value)
    }

    fn verdict(h: &History) -> bool {
        let wg = check_linearizable(h, &CheckOptions::default()).unwrap();
        let bf = brute_force_check(h).unwrap();
        assert_eq!(wg, bf, "checkers disagree on {h:?}");
        wg
    }

    #[test]
    fn empty_history_is_linearizable() {
        assert!(verdict(&History::default()));
    }

    #[test]
    fn sequential_replay_is_linearizable() {
        let k = OpArgs::keyed;
        let h = History {
            events: vec![
                invoke(0, 0, OpKind::Insert, k(1, 2)),
                respond(1, 0, OpKind::Insert, k(1, 2), None),
                invoke(2, 0, OpKind::Get, OpArgs::key(1)),
                respond(3, 0, OpKind::Get, OpArgs::key(1), Some(Response::Count(2))),
                invoke(4, 0, OpKind::Delete, k(1, 2)),
                respond(5, 0, OpKind::Delete, k(1, 2), Some(Response::Did(true))),
            ],
        };
        assert!(verdict(&h));
    }

    #[test]
    fn overlap_allows_reordering_but_real_time_forbids_it() {
        let k = OpArgs::keyed;
        // The get overlaps the insert, so the insert may linearize first.
        let overlapping = History {
            events: vec![
                invoke(0, 0, OpKind::Insert, k(1, 1)),
                invoke(1, 1, OpKind::Get, OpArgs::key(1)),
                respond(2, 1, OpKind::Get, OpArgs::key(1), Some(Response::Count(1))),
                respond(3, 0, OpKind::Insert, k(1, 1), None),
            ],
        };
        assert!(verdict(&overlapping));

        // Same responses, but the get finishes before the insert begins.
        let ordered = History {
            events: vec![
                invoke(0, 1, OpKind::Get, OpArgs::key(1)),
                respond(1, 1, OpKind::Get, OpArgs::key(1), Some(Response::Count(1))),
                invoke(2, 0, OpKind::Insert, k(1, 1)),
                respond(3, 0, OpKind::Insert, k(1, 1), None),
            ],
        };
        assert!(!verdict(&ordered));
    }

    #[test]
    fn cross_process_real_time_order_is_enforced() {
        let k = OpArgs::keyed;
        // A delete that returns true completes before the only insert begins.
        let h = History {
            events: vec![
                invoke(0, 0, OpKind::Delete, k(1, 1)),
                respond(1, 0, OpKind::Delete, k(1, 1), Some(Response::Did(true))),
                invoke(2, 1, OpKind::Insert, k(1, 1)),
                respond(3, 1, OpKind::Insert, k(1, 1), None),
            ],
        };
        assert!(!verdict(&h));
    }

    #[test]
    fn pending_operations_may_take_effect_or_not() {
        let k = OpArgs::keyed;
        // The insert never responds; each observed count decides whether it
        // is linearized, and both observations are legal.
        for count in [0, 1] {
            let h = History {
                events: vec![
                    invoke(0, 0, OpKind::Insert, k(1, 1)),
                    invoke(1, 1, OpKind::Get, OpArgs::key(1)),
                    respond(
                        2,
                        1,
                        OpKind::Get,
                        OpArgs::key(1),
                        Some(Response::Count(count)),
                    ),
                ],
            };
            assert!(verdict(&h), "count {count} should be accepted");
        }
        // A count the pending insert cannot produce is still rejected.
        let h = History {
            events: vec![
                invoke(0, 0, OpKind::Insert, k(1, 1)),
                invoke(1, 1, OpKind::Get, OpArgs::key(1)),
                respond(2, 1, OpKind::Get, OpArgs::key(1), Some(Response::Count(2))),
            ],
        };
        assert!(!verdict(&h));
    }

    #[test]
    fn event_order_in_the_file_does_not_matter() {
        let k = OpArgs::keyed;
        let mut h = History {
            events: vec![
                invoke(0, 0, OpKind::Insert, k(1, 1)),
                invoke(1, 1, OpKind::Get, OpArgs::key(1)),
                respond(2, 1, OpKind::Get, OpArgs::key(1), Some(Response::Count(1))),
                respond(3, 0, OpKind::Insert, k(1, 1), None),
            ],
        };
        h.events.reverse();
        assert!(verdict(&h));
    }

    #[test]
    fn malformed_histories_are_rejected() {
        let k = OpArgs::keyed;
        let cases: Vec<(&str, Vec<HistoryEvent>)> = vec![
            (
                "respond without invoke",
                vec![respond(0, 0, OpKind::Insert, k(1, 1), None)],
            ),
            (
                "double invoke",
                vec![
                    invoke(0, 0, OpKind::Get, OpArgs::key(1)),
                    invoke(1, 0, OpKind::Get, OpArgs::key(2)),
                ],
            ),
            (
                "respond does not match invoke",
                vec![
                    invoke(0, 0, OpKind::Insert, k(1, 1)),
                    respond(1, 0, OpKind::Insert, k(2, 1), None),
                ],
            ),
            (
                "get without a count",
                vec![
                    invoke(0, 0, OpKind::Get, OpArgs::key(1)),
                    respond(1, 0, OpKind::Get, OpArgs::key(1), None),
                ],
            ),
            (
                "insert with a value",
                vec![
                    invoke(0, 0, OpKind::Insert, k(1, 1)),
                    respond(1, 0, OpKind::Insert, k(1, 1), Some(Response::Did(true))),
                ],
            ),
            (
                "delete with a count response",
                vec![
                    invoke(0, 0, OpKind::Delete, k(1, 1)),
                    respond(1, 0, OpKind::Delete, k(1, 1), Some(Response::Count(0))),
                ],
            ),
            (
                "invoke carrying a value",
                vec![ev(
                    0,
                    0,
                    OpKind::Get,
                    OpArgs::key(1),
                    EventKind::Invoke,
                    Some(Response::Count(0)),
                )],
            ),
        ];
        for (label, events) in cases {
            let h = History { events };
            assert!(
                matches!(
                    check_linearizable(&h, &CheckOptions::default()),
                    Err(CheckError::Malformed(_))
                ),
                "case not rejected: {label}"
            );
            assert!(matches!(
                brute_force_check(&h),
                Err(CheckError::Malformed(_))
            ));
        }
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let h = History {
            events: vec![
                invoke(0, 0, OpKind::Get, OpArgs::key(1)),
                respond(1, 0, OpKind::Get, OpArgs::key(1), Some(Response::Count(0))),
                invoke(2, 0, OpKind::Get, OpArgs::key(1)),
                respond(3, 0, OpKind::Get, OpArgs::key(1), Some(Response::Count(0))),
            ],
        };
        let opts = CheckOptions { max_expansions: 0 };
        assert!(matches!(
            check_linearizable(&h, &opts),
            Err(CheckError::BudgetExhausted(0))
        ));
        // The same history passes with any usable budget.
        assert!(check_linearizable(&h, &CheckOptions::default()).unwrap());
    }

    #[test]
    fn saturation_is_modeled() {
        let k = OpArgs::keyed;
        let h = History {
            events: vec![
                invoke(0, 0, OpKind::Insert, k(1, u64::MAX)),
                respond(1, 0, OpKind::Insert, k(1, u64::MAX), None),
                invoke(2, 0, OpKind::Insert, k(1, 5)),
                respond(3, 0, OpKind::Insert, k(1, 5), None),
                invoke(4, 0, OpKind::Get, OpArgs::key(1)),
                respond(
                    5,
                    0,
                    OpKind::Get,
                    OpArgs::key(1),
                    Some(Response::Count(u64::MAX)),
                ),
            ],
        };
        assert!(verdict(&h));
    }
}
