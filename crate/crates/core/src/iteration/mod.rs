//! Picard and Mann iteration with convergence tracking and the product rate
//! bound.

mod runner;
mod schedule;
mod trace;

pub use runner::{mann_run, mann_step, picard_run, theoretical_bound, DIVERGENCE_GUARD};
pub use schedule::{Schedule, ScheduleKind};
pub(crate) use trace::fmt_f64;
pub use trace::{
    csv_version_header, detect_convergence, Convergence, IterationTrace, StopRule, TraceStep,
    DETECT_WINDOW,
};
