//! Deterministic schedule control over real threads.
//!
//! Each worker runs on its own OS thread behind a budget gate wired into the
//! step hook: the worker consumes one budget unit per shared-memory step and
//! parks when the budget hits zero. The scheduler grants budget one worker
//! at a time and waits for the worker to park or finish before returning, so
//! at most one worker executes between turns and a given script or seed
//! always produces the same interleaving of shared-memory steps.
//!
//! Workers park only inside the step hook, before the announced step and
//! while holding no lock, so a parked worker can never wedge another one.

use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::step::{install_hook, StepHook, StepLabel};

#[derive(Debug, thiserror::Error)]
pub enum ScheduleError {
    #[error("worker {0} was scheduled after it finished")]
    ScheduledPastCompletion(usize),
    #[error("worker {worker} panicked: {message}")]
    WorkerPanicked { worker: usize, message: String },
}

/// Result of one scheduling turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TurnOutcome {
    /// Shared-memory steps the worker executed during the turn.
    pub consumed: u64,
    /// Whether the worker's closure returned during the turn.
    pub finished: bool,
}

#[derive(Default)]
struct GateState {
    budget: u64,
    parked: bool,
    finished: bool,
    panicked: bool,
    labels: Vec<StepLabel>,
}

struct Gate {
    state: Mutex<GateState>,
    worker_cv: Condvar,
    sched_cv: Condvar,
}

impl Gate {
    fn new() -> Self {
        Gate {
            state: Mutex::new(GateState::default()),
            worker_cv: Condvar::new(),
            sched_cv: Condvar::new(),
        }
    }

    /// Blocks the freshly spawned worker until its first budget grant, so no
    /// user code runs before the scheduler's first turn.
    fn wait_start(&self) {
        let mut st = self.state.lock().unwrap();
        while st.budget == 0 {
            st.parked = true;
            self.sched_cv.notify_all();
            st = self.worker_cv.wait(st).unwrap();
        }
        st.parked = false;
    }
}

impl StepHook for Gate {
    fn on_step(&self, label: StepLabel) {
        let mut st = self.state.lock().unwrap();
        while st.budget == 0 {
            st.parked = true;
            self.sched_cv.notify_all();
            st = self.worker_cv.wait(st).unwrap();
        }
        st.parked = false;
        st.budget -= 1;
        st.labels.push(label);
    }
}

/// Sets the finished flag when the worker closure exits, normally or by
/// panic, so the scheduler never waits on a dead worker.
struct DoneGuard {
    gate: Arc<Gate>,
}

impl Drop for DoneGuard {
    fn drop(&mut self) {
        let mut st = self.gate.state.lock().unwrap();
        st.finished = true;
        st.panicked = std::thread::panicking();
        self.gate.sched_cv.notify_all();
    }
}

struct WorkerSlot<R> {
    gate: Arc<Gate>,
    handle: Option<JoinHandle<R>>,
}

pub struct ControlledRunner<R> {
    workers: Vec<WorkerSlot<R>>,
}

impl<R: Send + 'static> ControlledRunner<R> {
    pub fn new() -> Self {
        ControlledRunner {
            workers: Vec::new(),
        }
    }

    /// Spawns a gated worker. It stays parked until its first turn. Returns
    /// the worker id used by `step`.
    pub fn spawn<F>(&mut self, f: F) -> usize
    where
        F: FnOnce() -> R + Send + 'static,
    {
        let gate = Arc::new(Gate::new());
        let thread_gate = gate.clone();
        let handle = std::thread::spawn(move || {
            thread_gate.wait_start();
            let _hook = install_hook(thread_gate.clone());
            let _done = DoneGuard {
                gate: thread_gate.clone(),
            };
            f()
        });
        self.workers.push(WorkerSlot {
            gate,
            handle: Some(handle),
        });
        self.workers.len() - 1
    }

    pub fn worker_count(&self) -> usize {
        self.workers.len()
    }

    pub fn is_finished(&self, worker: usize) -> bool {
        self.workers[worker].gate.state.lock().unwrap().finished
    }

    /// Shared-memory steps the worker has executed so far.
    pub fn steps_taken(&self, worker: usize) -> u64 {
        self.workers[worker].gate.state.lock().unwrap().labels.len() as u64
    }

    /// Labels of every step the worker has executed, in order.
    pub fn labels(&self, worker: usize) -> Vec<StepLabel> {
        self.workers[worker]
            .gate
            .state
            .lock()
            .unwrap()
            .labels
            .clone()
    }

    /// Runs `worker` for up to `steps` shared-memory steps and blocks until
    /// it parks at the next step boundary or finishes. Scheduling a worker
    /// that already finished is an error: a script that does so is wrong
    /// about where the workers are.
    pub fn step(&mut self, worker: usize, steps: u64) -> Result<TurnOutcome, ScheduleError> {
        let gate = self.workers[worker].gate.clone();
        let mut st = gate.state.lock().unwrap();
        if st.finished {
            let panicked = st.panicked;
            drop(st);
            return Err(if panicked {
                self.take_panic(worker)
            } else {
                ScheduleError::ScheduledPastCompletion(worker)
            });
        }
        let before = st.labels.len() as u64;
        st.budget = st.budget.saturating_add(steps);
        gate.worker_cv.notify_all();
        while !(st.finished || (st.parked && st.budget == 0)) {
            st = gate.sched_cv.wait(st).unwrap();
        }
        let consumed = st.labels.len() as u64 - before;
        let finished = st.finished;
        let panicked = st.panicked;
        drop(st);
        if panicked {
            return Err(self.take_panic(worker));
        }
        Ok(TurnOutcome { consumed, finished })
    }

    /// Runs `worker` to completion. Unlike `step`, draining an already
    /// finished worker is a no-op.
    pub fn drain(&mut self, worker: usize) -> Result<(), ScheduleError> {
        let gate = self.workers[worker].gate.clone();
        let mut st = gate.state.lock().unwrap();
        if !st.finished {
            st.budget = u64::MAX / 2;
            gate.worker_cv.notify_all();
            while !st.finished {
                st = gate.sched_cv.wait(st).unwrap();
            }
        }
        let panicked = st.panicked;
        drop(st);
        if panicked {
            return Err(self.take_panic(worker));
        }
        Ok(())
    }

    /// Drains every worker, in worker id order.
    pub fn drain_all(&mut self) -> Result<(), ScheduleError> {
        for w in 0..self.workers.len() {
            self.drain(w)?;
        }
        Ok(())
    }

    /// Drains every worker and collects their results in worker id order.
    pub fn join(&mut self) -> Result<Vec<R>, ScheduleError> {
        self.drain_all()?;
        let mut out = Vec::with_capacity(self.workers.len());
        for w in 0..self.workers.len() {
            let handle = self.workers[w]
                .handle
                .take()
                .expect("worker result already taken");
            match handle.join() {
                Ok(r) => out.push(r),
                Err(e) => {
                    return Err(ScheduleError::WorkerPanicked {
                        worker: w,
                        message: panic_message(&*e),
                    })
                }
            }
        }
        Ok(out)
    }

    fn take_panic(&mut self, worker: usize) -> ScheduleError {
        let message = match self.workers[worker].handle.take() {
            Some(handle) => match handle.join() {
                Err(e) => panic_message(&*e),
                Ok(_) => "panic flag set but the worker returned".to_string(),
            },
            None => "worker already joined".to_string(),
        };
        ScheduleError::WorkerPanicked { worker, message }
    }
}

impl<R: Send + 'static> Default for ControlledRunner<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R> Drop for ControlledRunner<R> {
    fn drop(&mut self) {
        // Let every still-parked worker run to completion so an early error
        // return cannot leave threads blocked forever.
        for slot in &mut self.workers {
            if let Some(handle) = slot.handle.take() {
                {
                    let mut st = slot.gate.state.lock().unwrap();
                    st.budget = u64::MAX / 2;
                    slot.gate.worker_cv.notify_all();
                }
                let _ = handle.join();
            }
        }
    }
}

fn panic_message(e: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = e.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = e.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}

/// Replays `script` as a sequence of (worker, steps) turns.
pub fn run_script<R: Send + 'static>(
    runner: &mut ControlledRunner<R>,
    script: &[(usize, u64)],
) -> Result<Vec<TurnOutcome>, ScheduleError> {
    let mut outcomes = Vec::with_capacity(script.len());
    for &(worker, steps) in script {
        outcomes.push(runner.step(worker, steps)?);
    }
    Ok(outcomes)
}

/// Drives all workers to completion with a seeded random policy: each turn
/// picks a live worker and a turn length from the generator. The same seed
/// over the same workers yields the same interleaving.
pub fn run_seeded<R: Send + 'static>(
    runner: &mut ControlledRunner<R>,
    seed: u64,
    max_turn: u64,
) -> Result<(), ScheduleError> {
    assert!(max_turn >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alive: Vec<usize> = (0..runner.worker_count())
        .filter(|&w| !runner.is_finished(w))
        .collect();
    while !alive.is_empty() {
        let i = rng.gen_range(0..alive.len());
        let steps = rng.gen_range(1..=max_turn);
        let outcome = runner.step(alive[i], steps)?;
        if outcome.finished {
            alive.remove(i);
        }
    }
    Ok(())
}
