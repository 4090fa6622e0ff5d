//! Report lifecycle: the pure transition table and the worker pool that
//! drives reports through it.

mod state;
mod worker;

pub use state::{step, IllegalTransition, ReportStatus, TransitionEvent};
pub use worker::{Pipeline, PipelineConfig, ReprocessError};
