//! Gram-reduced Levenberg–Marquardt (GRLM) for square nonlinear systems
//! `F(x) = 0`, `F: ℝᵈ → ℝᵈ`.
//!
//! The solver minimizes the merit `φ(x) = ½‖F(x)‖²` with the iteration
//!
//! ```text
//! x_{t+1} = x_t − (J(z_t)ᵀJ(z_t) + λ_t I)⁻¹ J(x_t)ᵀF(x_t),   λ_t = √(c‖J(x_t)ᵀF(x_t)‖)
//! ```
//!
//! where the snapshot `z_t = x_{m⌊t/m⌋}` is refreshed every `m` iterations. The
//! snapshot Jacobian is factored once by SVD so that every step in between
//! costs `O(d²)`. Gradient descent and the classical (every-step) LM method are
//! provided as baselines, together with two benchmark problems (the discretized
//! Chandrasekhar H-equation and non-convex regularized logistic regression) and
//! trace audit utilities.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*64` / `*32`
//! aliases below name the common instantiations.

// Negated comparisons are deliberate: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod h_equation;
pub mod logistic;
pub mod problem;
pub mod scalar;
pub mod solver;

pub use diagnostics::{audit_jacobian, audit_trace, AuditReport, Check, Verdict};
pub use h_equation::HEquation;
pub use logistic::libsvm::{parse_libsvm, read_libsvm_file, ParseError};
pub use logistic::{LogisticProblem, SparseDataset};
pub use problem::{
    default_fd_step, fd_merit_gradient, finite_difference_jacobian, EvalCounters, Evaluator,
    Linearization, NonlinearSystem, ProblemError,
};
pub use scalar::Scalar;
pub use solver::{
    grlm_step, lambda_reg, refresh_snapshot, run_gd, run_grlm, run_lm, snapshot_index, solve,
    solve_observed, IterationRecord, Method, SnapshotFactorization, SolveError, SolveMode,
    SolveOutcome, SolverConfig,
};

pub type HEquation64 = HEquation<f64>;
pub type HEquation32 = HEquation<f32>;
pub type LogisticProblem64 = LogisticProblem<f64>;
pub type LogisticProblem32 = LogisticProblem<f32>;
pub type SparseDataset64 = SparseDataset<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type SolverConfig32 = SolverConfig<f32>;
pub type IterationRecord64 = IterationRecord<f64>;
pub type SolveOutcome64 = SolveOutcome<f64>;
pub type SnapshotFactorization64 = SnapshotFactorization<f64>;
