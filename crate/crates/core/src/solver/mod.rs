//! Gradient descent, Levenberg–Marquardt and Gram-reduced Levenberg–Marquardt.
//!
//! All three methods share one loop. At iteration `t`:
//!
//! 1. evaluate `F(x_t)`, `J(x_t)` and `g_t = J(x_t)ᵀF(x_t)` (one full Jacobian);
//! 2. stop if `‖g_t‖ ≤ ε`, emitting a final record with `r_t = 0`;
//! 3. otherwise take the method's step and record `λ_t`, `r_t = ‖x_{t+1} − x_t‖`.
//!
//! GRLM refreshes its snapshot at `t ≡ 0 (mod m)` by evaluating and factoring
//! `J(x_t)` a second time, which is charged separately; LM factors the
//! Jacobian from step 1 directly. The stationarity test always runs before a
//! refresh so a converged point never pays for a factorization.

mod snapshot;

use std::time::Instant;

use nalgebra::DVector;
use thiserror::Error;

use crate::problem::{EvalCounters, Evaluator, NonlinearSystem, ProblemError};
use crate::scalar::{lit, Scalar};

use snapshot::GramOperator;
pub use snapshot::{direct_regularized_solve, grlm_step, refresh_snapshot, SnapshotFactorization};

/// Iterates beyond this norm are treated as divergent.
pub const DIVERGENCE_NORM: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Gd,
    Lm,
    Grlm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Lm => "lm",
            Method::Grlm => "grlm",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How `(G + λI)⁻¹g` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveMode {
    /// SVD of the snapshot Jacobian, reused for every step until the next refresh.
    SvdReuse,
    /// Gram matrix formed explicitly and Cholesky-factored at every step.
    Direct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T: Scalar> {
    pub method: Method,
    /// Regularization constant `c` in `λ_t = √(c‖g_t‖)` (LM, GRLM).
    pub reg_c: T,
    /// Step size `η` (GD).
    pub step_eta: T,
    /// Snapshot period (GRLM).
    pub m: usize,
    pub max_iters: usize,
    /// Stop once `‖J(x)ᵀF(x)‖ ≤ tol_eps`.
    pub tol_eps: T,
    pub seed: u64,
    pub solve_mode: SolveMode,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn gd(step_eta: T) -> Self {
        Self {
            method: Method::Gd,
            step_eta,
            ..Self::base()
        }
    }

    pub fn lm(reg_c: T) -> Self {
        Self {
            method: Method::Lm,
            reg_c,
            solve_mode: SolveMode::Direct,
            ..Self::base()
        }
    }

    pub fn grlm(reg_c: T, m: usize) -> Self {
        Self {
            method: Method::Grlm,
            reg_c,
            m,
            ..Self::base()
        }
    }

    fn base() -> Self {
        Self {
            method: Method::Grlm,
            reg_c: T::one(),
            step_eta: lit(0.1),
            m: 1,
            max_iters: 1000,
            tol_eps: lit(1e-8),
            seed: 0,
            solve_mode: SolveMode::SvdReuse,
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tol(mut self, tol_eps: T) -> Self {
        self.tol_eps = tol_eps;
        self
    }

    pub fn with_solve_mode(mut self, mode: SolveMode) -> Self {
        self.solve_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_iters == 0 {
            return Err("max_iters must be at least 1".into());
        }
        if !(self.tol_eps > T::zero()) {
            return Err(format!("tol_eps must be positive, got {:e}", self.tol_eps));
        }
        match self.method {
            Method::Gd if !(self.step_eta > T::zero() && self.step_eta.is_finite()) => Err(
                format!("step_eta must be positive, got {:e}", self.step_eta),
            ),
            Method::Lm | Method::Grlm if !(self.reg_c > T::zero() && self.reg_c.is_finite()) => {
                Err(format!("reg_c must be positive, got {:e}", self.reg_c))
            }
            Method::Grlm if self.m == 0 => Err("snapshot period m must be at least 1".into()),
            _ => Ok(()),
        }
    }
}

/// Per-iteration telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    pub t: usize,
    /// `‖J(x_t)ᵀF(x_t)‖`
    pub grad_norm: T,
    /// `½‖F(x_t)‖²`
    pub merit: T,
    /// `λ_t`; zero for GD.
    pub lambda: T,
    /// `r_t = ‖x_{t+1} − x_t‖`; zero on the terminating record.
    pub step_norm: T,
    pub jv_cumulative: u64,
    pub wall_seconds: f64,
    pub snapshot_refreshed: bool,
    /// Upper bound on `‖J(z_t)ᵀJ(z_t)‖₂` for the snapshot used at this step
    /// (exact in SVD mode); zero for GD.
    pub gram_norm: T,
}

#[derive(Debug, Error)]
pub enum SolveError<T: Scalar> {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("iterate diverged at t = {t}")]
    Diverged {
        t: usize,
        trace: Vec<IterationRecord<T>>,
    },
    #[error("evaluation failed at t = {t}: {source}")]
    Evaluation {
        t: usize,
        #[source]
        source: ProblemError,
        trace: Vec<IterationRecord<T>>,
    },
    #[error("numerical failure: {0}")]
    Numerical(&'static str),
}

impl<T: Scalar> SolveError<T> {
    /// Records produced before the failure.
    pub fn trace(&self) -> &[IterationRecord<T>] {
        match self {
            SolveError::Diverged { trace, .. } | SolveError::Evaluation { trace, .. } => trace,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome<T: Scalar> {
    /// Last iterate: the stationary point on convergence, otherwise `x_T`.
    pub x: DVector<T>,
    pub trace: Vec<IterationRecord<T>>,
    pub counters: EvalCounters,
    pub converged: bool,
    pub snapshots: usize,
}

impl<T: Scalar> SolveOutcome<T> {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// `π(t) = m⌊t/m⌋`.
pub fn snapshot_index(t: usize, m: usize) -> usize {
    assert!(m >= 1, "snapshot period must be positive");
    m * (t / m)
}

/// `λ = √(c‖g‖)`.
pub fn lambda_reg<T: Scalar>(g: &DVector<T>, reg_c: T) -> T {
    (reg_c * g.norm()).sqrt()
}

pub fn solve<T, S>(
    sys: &S,
    config: &SolverConfig<T>,
    x0: &DVector<T>,
) -> Result<SolveOutcome<T>, SolveError<T>>
where
    T: Scalar,
    S: NonlinearSystem<T> + ?Sized,
{
    solve_observed(sys, config, x0, |_, _| {})
}

pub fn run_grlm<T, S>(
    sys: &S,
    config: &SolverConfig<T>,
    x0: &DVector<T>,
) -> Result<SolveOutcome<T>, SolveError<T>>
where
    T: Scalar,
    S: NonlinearSystem<T> + ?Sized,
{
    expect_method(config, Method::Grlm)?;
    solve(sys, config, x0)
}

pub fn run_lm<T, S>(
    sys: &S,
    config: &SolverConfig<T>,
    x0: &DVector<T>,
) -> Result<SolveOutcome<T>, SolveError<T>>
where
    T: Scalar,
    S: NonlinearSystem<T> + ?Sized,
{
    expect_method(config, Method::Lm)?;
    solve(sys, config, x0)
}

pub fn run_gd<T, S>(
    sys: &S,
    config: &SolverConfig<T>,
    x0: &DVector<T>,
) -> Result<SolveOutcome<T>, SolveError<T>>
where
    T: Scalar,
    S: NonlinearSystem<T> + ?Sized,
{
    expect_method(config, Method::Gd)?;
    solve(sys, config, x0)
}

fn expect_method<T: Scalar>(config: &SolverConfig<T>, method: Method) -> Result<(), SolveError<T>> {
    if config.method == method {
        Ok(())
    } else {
        Err(SolveError::InvalidConfig(format!(
            "expected method {method}, got {}",
            config.method
        )))
    }
}

/// Runs the configured method, calling `observe(record, x_t)` after each record.
pub fn solve_observed<T, S, O>(
    sys: &S,
    config: &SolverConfig<T>,
    x0: &DVector<T>,
    mut observe: O,
) -> Result<SolveOutcome<T>, SolveError<T>>
where
    T: Scalar,
    S: NonlinearSystem<T> + ?Sized,
    O: FnMut(&IterationRecord<T>, &DVector<T>),
{
    config.validate().map_err(SolveError::InvalidConfig)?;
    if x0.len() != sys.dim() {
        return Err(SolveError::InvalidConfig(format!(
            "initial point has length {}, system dimension is {}",
            x0.len(),
            sys.dim()
        )));
    }

    let start = Instant::now();
    let mut eval = Evaluator::new(sys);
    let mut trace: Vec<IterationRecord<T>> = Vec::new();
    let mut x = x0.clone();
    let mut gram: Option<GramOperator<T>> = None;
    let mut snapshots = 0usize;
    let mut converged = false;
    let limit = lit::<T>(DIVERGENCE_NORM);

    for t in 0..config.max_iters {
        let lin = match eval.linearize(&x) {
            Ok(lin) => lin,
            Err(source) => return Err(SolveError::Evaluation { t, source, trace }),
        };
        let grad_norm = lin.gradient.norm();
        let merit = lin.merit();
        let mut record = IterationRecord {
            t,
            grad_norm,
            merit,
            lambda: T::zero(),
            step_norm: T::zero(),
            jv_cumulative: 0,
            wall_seconds: 0.0,
            snapshot_refreshed: false,
            gram_norm: T::zero(),
        };
        if config.method != Method::Gd {
            record.lambda = lambda_reg(&lin.gradient, config.reg_c);
        }

        if grad_norm <= config.tol_eps {
            record.jv_cumulative = eval.counters().jv_products;
            record.wall_seconds = start.elapsed().as_secs_f64();
            observe(&record, &x);
            trace.push(record);
            converged = true;
            break;
        }

        let step = match config.method {
            Method::Gd => &lin.gradient * config.step_eta,
            Method::Lm => {
                let op = GramOperator::build(lin.jacobian, config.solve_mode, t)?;
                record.snapshot_refreshed = true;
                snapshots += 1;
                record.gram_norm = op.gram_norm_bound();
                op.solve(&lin.gradient, record.lambda)?
            }
            Method::Grlm => {
                if t % config.m == 0 {
                    let jac = match eval.jacobian(&x) {
                        Ok(j) => j,
                        Err(source) => return Err(SolveError::Evaluation { t, source, trace }),
                    };
                    gram = Some(GramOperator::build(jac, config.solve_mode, t)?);
                    record.snapshot_refreshed = true;
                    snapshots += 1;
                }
                let op = gram
                    .as_ref()
                    .expect("snapshot is refreshed at t = 0 before first use");
                record.gram_norm = op.gram_norm_bound();
                op.solve(&lin.gradient, record.lambda)?
            }
        };

        let next = &x - &step;
        record.step_norm = step.norm();
        record.jv_cumulative = eval.counters().jv_products;
        record.wall_seconds = start.elapsed().as_secs_f64();
        observe(&record, &x);
        trace.push(record);

        if next.iter().any(|v| !v.is_finite()) || !(next.norm() <= limit) {
            return Err(SolveError::Diverged { t, trace });
        }
        x = next;
    }

    Ok(SolveOutcome {
        x,
        trace,
        counters: eval.counters(),
        converged,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::h_equation::{HEquation, DEFAULT_C_PARAM};
    use crate::problem::ProblemError;
    use nalgebra::DMatrix;

    #[test]
    fn snapshot_index_examples() {
        assert_eq!(snapshot_index(123, 50), 100);
        assert_eq!(snapshot_index(0, 7), 0);
        for t in 0..20 {
            assert_eq!(snapshot_index(t, 1), t);
        }
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_reg(&DVector::<f64>::zeros(3), 10.0), 0.0);
        let g = DVector::from_vec(vec![0.0, 4.0]);
        assert_eq!(lambda_reg(&g, 4.0), 4.0);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::<f64>::grlm(1.0, 0).validate().is_err());
        assert!(SolverConfig::<f64>::grlm(0.0, 5).validate().is_err());
        assert!(SolverConfig::<f64>::gd(0.0).validate().is_err());
        assert!(SolverConfig::<f64>::lm(1.0)
            .with_max_iters(0)
            .validate()
            .is_err());
        assert!(SolverConfig::<f64>::lm(1.0)
            .with_tol(0.0)
            .validate()
            .is_err());
        assert!(SolverConfig::<f64>::gd(0.5).validate().is_ok());
    }

    #[test]
    fn method_mismatch_is_rejected() {
        let p = HEquation::<f64>::new(3, 0.5).unwrap();
        let x0 = DVector::zeros(3);
        assert!(matches!(
            run_lm(&p, &SolverConfig::grlm(1.0, 2), &x0),
            Err(SolveError::InvalidConfig(_))
        ));
        assert!(run_gd(&p, &SolverConfig::lm(1.0), &x0).is_err());
        assert!(run_grlm(&p, &SolverConfig::gd(0.1), &x0).is_err());
        assert!(solve(&p, &SolverConfig::gd(0.1), &DVector::zeros(4)).is_err());
    }

    #[test]
    fn root_terminates_immediately() {
        let p = HEquation::<f64>::new(10, 0.0).unwrap();
        let ones = DVector::from_element(10, 1.0);
        for cfg in [
            SolverConfig::grlm(1.0, 3),
            SolverConfig::lm(1.0),
            SolverConfig::gd(0.5),
        ] {
            let out = solve(&p, &cfg, &ones).unwrap();
            assert!(out.converged);
            assert_eq!(out.trace.len(), 1);
            assert_eq!(out.trace[0].grad_norm, 0.0);
            assert_eq!(out.trace[0].step_norm, 0.0);
            assert_eq!(out.snapshots, 0);
            assert_eq!(out.x, ones);
        }
    }

    #[test]
    fn identity_problem_converges_in_two_iterations() {
        let p = HEquation::<f64>::new(20, 0.0).unwrap();
        let x0 = DVector::from_fn(20, |i, _| 1.0 + 1e-3 * ((i % 3) as f64 - 1.0));
        // λ_t/(1+λ_t) is the contraction factor, so two steps need a small c
        let cfgs = [
            SolverConfig::grlm(1e-8, 5).with_tol(1e-12),
            SolverConfig::lm(1e-8).with_tol(1e-12),
            SolverConfig::gd(1.0).with_tol(1e-12),
        ];
        for cfg in cfgs {
            let out = solve(&p, &cfg, &x0).unwrap();
            assert!(out.converged, "{:?}", cfg.method);
            assert!(
                out.trace.len() <= 3,
                "{:?}: {}",
                cfg.method,
                out.trace.len()
            );
        }
        // η = 1 lands on the root in one step
        let out = solve(&p, &SolverConfig::gd(1.0).with_tol(1e-12), &x0).unwrap();
        assert_eq!(out.trace.len(), 2);
    }

    #[test]
    fn gd_records_zero_lambda() {
        let p = HEquation::<f64>::new(10, 0.5).unwrap();
        let out = solve(
            &p,
            &SolverConfig::gd(0.5).with_max_iters(5),
            &DVector::zeros(10),
        )
        .unwrap();
        assert!(out
            .trace
            .iter()
            .all(|r| r.lambda == 0.0 && !r.snapshot_refreshed));
        assert_eq!(out.counters.jv_products, 50);
    }

    #[test]
    fn grlm_snapshot_schedule_and_jv_accounting() {
        let p = HEquation::<f64>::new(30, DEFAULT_C_PARAM).unwrap();
        let x0 = p.random_initial_point(1);
        let cfg = SolverConfig::grlm(100.0, 7)
            .with_max_iters(40)
            .with_tol(1e-300);
        let out = solve(&p, &cfg, &x0).unwrap();
        let mut snaps = 0u64;
        for r in &out.trace {
            assert_eq!(r.snapshot_refreshed, r.t % 7 == 0);
            snaps += r.snapshot_refreshed as u64;
            assert_eq!(r.jv_cumulative, 30 * (r.t as u64 + 1) + 30 * snaps);
        }
        assert_eq!(out.snapshots, 6);
        assert_eq!(
            out.counters.jv_products,
            30 * out.counters.full_jacobian_evals
        );
    }

    #[test]
    fn lm_decreases_merit_with_heavy_regularization() {
        let p = HEquation::<f64>::new(15, 0.8).unwrap();
        let x0 = p.random_initial_point(5);
        let out = solve(&p, &SolverConfig::lm(1000.0).with_max_iters(50), &x0).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1].merit <= w[0].merit);
        }
    }

    struct Blowup;

    impl NonlinearSystem<f64> for Blowup {
        fn dim(&self) -> usize {
            1
        }
        fn eval_residual(&self, x: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
            Ok(x.map(|v| v * v * v))
        }
        fn eval_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, ProblemError> {
            Ok(DMatrix::from_element(1, 1, 3.0 * x[0] * x[0]))
        }
    }

    #[test]
    fn divergence_returns_partial_trace() {
        let err = solve(
            &Blowup,
            &SolverConfig::gd(1.0),
            &DVector::from_element(1, 10.0),
        )
        .unwrap_err();
        match &err {
            SolveError::Diverged { t, trace } => assert_eq!(trace.len(), t + 1),
            other => panic!("{other:?}"),
        }
        assert!(!err.trace().is_empty());
    }

    #[test]
    fn singular_evaluation_is_surfaced() {
        let p = HEquation::<f64>::with_nodes(vec![1.0], 1.0).unwrap();
        let err = solve(&p, &SolverConfig::gd(0.1), &DVector::from_element(1, 4.0)).unwrap_err();
        assert!(matches!(
            err,
            SolveError::Evaluation {
                t: 0,
                source: ProblemError::SingularEvaluation { .. },
                ..
            }
        ));
    }

    #[test]
    fn f32_grlm_converges_on_mild_problem() {
        let p = HEquation::<f32>::new(20, 0.5).unwrap();
        let x0 = p.random_initial_point(2);
        let cfg = SolverConfig::<f32>::grlm(1.0, 5)
            .with_tol(1e-4)
            .with_max_iters(200);
        let out = solve(&p, &cfg, &x0).unwrap();
        assert!(out.converged);
    }
}
