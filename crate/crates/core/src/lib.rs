//! Record, analyse and reversibly replay executions of a small actor language.
//!
//! * [`lang`] parses `.kern` programs and implements the local evaluation
//!   steps.
//! * [`runtime`] runs programs under a pluggable scheduler and records a
//!   trace of spawn/send/deliver/receive/exit events.
//! * [`trace`] holds the trace and log model together with the precedes and
//!   happened-before relations.
//! * [`analysis`] finds blocked processes, lost and orphan messages, message
//!   races and race variants, and explores race variants systematically.
//! * [`rdebug`] is the reversible debugger: log-driven replay, causal
//!   consistent undo and the controlled request layer.

pub mod analysis;
pub mod ids;
pub mod lang;
pub mod rdebug;
pub mod runtime;
pub mod trace;

pub use ids::{Pid, Tag};
