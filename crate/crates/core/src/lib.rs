//! Dual-arm cooperative task scheduling.
//!
//! Task packages are parsed into skill steps, merged into a dependency graph,
//! checked for wrong-object dependencies, and scheduled onto a left and a
//! right arm by an event-driven simulator that tracks which object each arm
//! holds.

pub mod dag;
pub mod gantt;
pub mod generation;
pub mod metrics;
pub mod oracle;
pub mod package;
pub mod random;
pub mod scheduler;
pub mod selector;
pub mod skills;
pub mod validator;

/// Whole seconds. Every duration in packages and graphs is integral.
pub type Seconds = u64;
