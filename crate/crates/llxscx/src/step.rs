//! Named yield points.
//!
//! Every shared-memory step the primitives take (each read, write, and CAS of
//! a record or descriptor field) announces itself here before executing. A
//! thread can have a hook installed; the controlled scheduler uses this to
//! pause a worker between any two steps, and failure-injection tests use it to
//! observe exactly where an operation is. With no hook installed the
//! announcement is a branch on a thread-local and nothing else.

use std::cell::RefCell;
use std::sync::Arc;

/// Identifies which shared-memory step is about to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepLabel {
    /// Read of a record's marked bit.
    ReadMarked,
    /// Read of a record's info pointer.
    ReadInfo,
    /// Read of a descriptor's state.
    ReadState,
    /// Read of a descriptor's all-frozen bit (the frozen check step).
    ReadAllFrozen,
    /// Read of one mutable field of a record.
    ReadMutable,
    /// Read of one immutable field of a record.
    ReadImmutable,
    /// CAS of a record's info pointer toward a descriptor (freezing CAS).
    FreezingCas,
    /// Write setting a descriptor's all-frozen bit (frozen step).
    FrozenStep,
    /// Write setting a record's marked bit (mark step).
    MarkStep,
    /// CAS of the target mutable field (update CAS).
    UpdateCas,
    /// Write setting a descriptor's state to committed (commit step).
    CommitStep,
    /// Write setting a descriptor's state to aborted (abort step).
    AbortStep,
}

/// A per-thread step hook. `on_step` runs immediately before the labelled
/// shared-memory step executes and may block.
pub trait StepHook: Send + Sync {
    fn on_step(&self, label: StepLabel);
}

thread_local! {
    static HOOK: RefCell<Option<Arc<dyn StepHook>>> = const { RefCell::new(None) };
}

/// Installs `hook` on the current thread and returns a guard that removes it
/// (restoring any previously installed hook) when dropped.
pub fn install_hook(hook: Arc<dyn StepHook>) -> HookGuard {
    let prev = HOOK.with(|h| h.borrow_mut().replace(hook));
    HookGuard { prev }
}

/// Removes the current thread's hook when dropped.
pub struct HookGuard {
    prev: Option<Arc<dyn StepHook>>,
}

impl Drop for HookGuard {
    fn drop(&mut self) {
        let prev = self.prev.take();
        HOOK.with(|h| *h.borrow_mut() = prev);
    }
}

#[inline]
pub(crate) fn yield_point(label: StepLabel) {
    HOOK.with(|h| {
        // Cloning the Arc keeps the hook alive across the callback without
        // holding the RefCell borrow while it blocks.
        let hook = h.borrow().clone();
        if let Some(hook) = hook {
            hook.on_step(label);
        }
    });
}
