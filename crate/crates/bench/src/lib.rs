//! Experiment harness for the `grlm` solvers: problem construction, tuning
//! grids, CSV convergence traces and best-configuration summaries.

// Negated comparisons are deliberate: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod experiment;
pub mod spec;
pub mod trace_csv;

pub use experiment::{run_experiment, ExperimentReport, GridPoint, RunResult, RunStatus};
pub use spec::{DataSource, ExperimentSpec, HarnessError, ProblemSpec};
pub use trace_csv::{emit_trace_csv, emit_trace_dat, format_trace_csv, TRACE_HEADER};
