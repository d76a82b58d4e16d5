//! Jacobian and trace audits.

use std::fmt;

use nalgebra::DVector;

use crate::problem::{default_fd_step, finite_difference_jacobian, NonlinearSystem, ProblemError};
use crate::scalar::{lit, to_f64, Scalar};
use crate::solver::{IterationRecord, Method, SolverConfig};

/// Absolute slack on the step-length upper bound `r_t ≤ λ_t / c`.
pub const STEP_BOUND_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Warn,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Warn => "warn",
            Verdict::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub measured: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuditReport {
    pub trace_id: String,
    pub checks: Vec<Check>,
}

impl AuditReport {
    pub fn new(trace_id: impl Into<String>) -> Self {
        Self {
            trace_id: trace_id.into(),
            checks: Vec::new(),
        }
    }

    fn push(&mut self, name: impl Into<String>, verdict: Verdict, measured: f64, threshold: f64) {
        self.checks.push(Check {
            name: name.into(),
            verdict,
            measured,
            threshold,
        });
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// No check failed; warnings are allowed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict != Verdict::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.verdict == Verdict::Fail)
    }

    pub const CSV_HEADER: &'static str = "trace_id,check,verdict,measured,threshold";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},{:?},{:?}\n",
                self.trace_id, c.name, c.verdict, c.measured, c.threshold
            ));
        }
        out
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "audit {}", self.trace_id)?;
        for c in &self.checks {
            writeln!(
                f,
                "  [{}] {}: measured {:e}, threshold {:e}",
                c.verdict, c.name, c.measured, c.threshold
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("evaluation failed at audit point {index}: {source}")]
pub struct AuditError {
    pub index: usize,
    #[source]
    pub source: ProblemError,
}

/// Relative Frobenius gap between the analytic and central-difference
/// Jacobians at each point. One check per point, named `jacobian_fd[i]`.
pub fn audit_jacobian<T, S>(
    sys: &S,
    points: &[DVector<T>],
    tol: f64,
) -> Result<AuditReport, AuditError>
where
    T: Scalar,
    S: NonlinearSystem<T> + ?Sized,
{
    assert!(tol > 0.0, "audit tolerance must be positive");
    let mut report = AuditReport::new("jacobian");
    for (index, x) in points.iter().enumerate() {
        let wrap = |source| AuditError { index, source };
        let analytic = sys.eval_jacobian(x).map_err(wrap)?;
        let fd = finite_difference_jacobian(sys, x, default_fd_step(x)).map_err(wrap)?;
        let scale = fd.norm().max(lit::<T>(f64::MIN_POSITIVE));
        let gap = to_f64((&analytic - &fd).norm() / scale);
        let verdict = if gap <= tol {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        report.push(format!("jacobian_fd[{index}]"), verdict, gap, tol);
    }
    Ok(report)
}

/// Audits a solver trace.
///
/// * `step_upper_bound`: `max_t (r_t − λ_t/c)` against [`STEP_BOUND_SLACK`] (LM/GRLM).
/// * `step_lower_bound`: `min_t r_t / (λ_t² / (c(L̂_t + λ_t)))` against 1, where
///   `L̂_t` is the running max of the recorded snapshot Gram norms, a surrogate
///   for the unknown global constant. Warn-only.
/// * `snapshot_schedule`: records whose refresh flag disagrees with
///   `t ≡ 0 (mod m)` (GRLM) or with "every step" (LM), excluding a terminal
///   stationary record.
/// * `termination`: an early stop must end at `‖g‖ ≤ ε`; a run that used the
///   whole budget without reaching it is a warning.
/// * `jv_monotone`: cumulative JV count never decreases.
pub fn audit_trace<T: Scalar>(
    trace: &[IterationRecord<T>],
    config: &SolverConfig<T>,
    trace_id: impl Into<String>,
) -> AuditReport {
    let mut report = AuditReport::new(trace_id);
    let tol = config.tol_eps;
    let is_terminal = |r: &IterationRecord<T>| r.grad_norm <= tol && r.step_norm == T::zero();

    if config.method != Method::Gd {
        let c = config.reg_c;
        let stepping = || {
            trace
                .iter()
                .filter(|r| r.lambda > T::zero() && !is_terminal(r))
        };

        let worst_excess = stepping()
            .map(|r| to_f64(r.step_norm - r.lambda / c))
            .fold(f64::NEG_INFINITY, f64::max);
        let worst_excess = if worst_excess.is_finite() {
            worst_excess
        } else {
            0.0
        };
        let verdict = if worst_excess <= STEP_BOUND_SLACK {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        report.push("step_upper_bound", verdict, worst_excess, STEP_BOUND_SLACK);

        let mut gram_max = T::zero();
        let mut worst_ratio = f64::INFINITY;
        for r in stepping() {
            gram_max = gram_max.max(r.gram_norm);
            let bound = r.lambda * r.lambda / (c * (gram_max + r.lambda));
            worst_ratio = worst_ratio.min(to_f64(r.step_norm / bound));
        }
        let worst_ratio = if worst_ratio.is_finite() {
            worst_ratio
        } else {
            1.0
        };
        // allow rounding in the ratio itself
        let verdict = if worst_ratio >= 1.0 - 1e-9 {
            Verdict::Pass
        } else {
            Verdict::Warn
        };
        report.push("step_lower_bound", verdict, worst_ratio, 1.0);

        let period = if config.method == Method::Grlm {
            config.m.max(1)
        } else {
            1
        };
        let mismatches = trace
            .iter()
            .filter(|r| !is_terminal(r))
            .filter(|r| r.snapshot_refreshed != (r.t % period == 0))
            .count();
        let verdict = if mismatches == 0 {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        report.push("snapshot_schedule", verdict, mismatches as f64, 0.0);
    }

    if let Some(last) = trace.last() {
        let stopped_early = trace.len() < config.max_iters || is_terminal(last);
        let verdict = if last.grad_norm <= tol {
            Verdict::Pass
        } else if stopped_early {
            Verdict::Fail
        } else {
            Verdict::Warn
        };
        report.push("termination", verdict, to_f64(last.grad_norm), to_f64(tol));
    }

    let decreases = trace
        .windows(2)
        .filter(|w| w[1].jv_cumulative < w[0].jv_cumulative)
        .count();
    let verdict = if decreases == 0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    report.push("jv_monotone", verdict, decreases as f64, 0.0);

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::h_equation::{HEquation, DEFAULT_C_PARAM};
    use crate::logistic::{LogisticProblem, SparseDataset};
    use crate::solver::solve;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Corrupted<S>(S);

    impl<S: NonlinearSystem<f64>> NonlinearSystem<f64> for Corrupted<S> {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn eval_residual(&self, x: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
            self.0.eval_residual(x)
        }
        fn eval_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, ProblemError> {
            let mut j = self.0.eval_jacobian(x)?;
            j[(0, 1)] += 1.0;
            Ok(j)
        }
    }

    #[test]
    fn identity_jacobian_has_negligible_gap() {
        let p = HEquation::<f64>::new(10, 0.0).unwrap();
        let pts = vec![
            DVector::from_element(10, 0.4),
            DVector::from_element(10, 1.3),
        ];
        let rep = audit_jacobian(&p, &pts, 1e-5).unwrap();
        assert!(rep.passed());
        assert!(rep.checks.iter().all(|c| c.measured < 1e-9));
    }

    #[test]
    fn logistic_jacobian_passes_and_corruption_fails() {
        let p = LogisticProblem::new(SparseDataset::<f64>::synthetic(300, 20, 4), 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pts: Vec<_> = (0..5)
            .map(|_| DVector::from_fn(20, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        assert!(audit_jacobian(&p, &pts, 1e-5).unwrap().passed());
        let bad = audit_jacobian(&Corrupted(p), &pts, 1e-5).unwrap();
        assert_eq!(bad.failures().count(), pts.len());
    }

    #[test]
    fn audit_error_carries_point_index() {
        let p = HEquation::<f64>::with_nodes(vec![1.0], 1.0).unwrap();
        let pts = vec![DVector::from_element(1, 0.5), DVector::from_element(1, 4.0)];
        let err = audit_jacobian(&p, &pts, 1e-5).unwrap_err();
        assert_eq!(err.index, 1);
    }

    fn grlm_run() -> (Vec<IterationRecord<f64>>, SolverConfig<f64>) {
        let p = HEquation::<f64>::new(40, DEFAULT_C_PARAM).unwrap();
        let cfg = SolverConfig::grlm(10.0, 10)
            .with_max_iters(2000)
            .with_tol(1e-8);
        let out = solve(&p, &cfg, &p.random_initial_point(3)).unwrap();
        assert!(out.converged);
        (out.trace, cfg)
    }

    #[test]
    fn converged_grlm_trace_passes() {
        let (trace, cfg) = grlm_run();
        let rep = audit_trace(&trace, &cfg, "grlm");
        assert!(rep.passed(), "{rep}");
        assert_eq!(
            rep.check("step_upper_bound").unwrap().verdict,
            Verdict::Pass
        );
    }

    #[test]
    fn fabricated_step_flips_only_upper_bound() {
        let (mut trace, cfg) = grlm_run();
        let clean = audit_trace(&trace, &cfg, "x");
        trace[3].step_norm = 2.0 * trace[3].lambda / cfg.reg_c;
        let dirty = audit_trace(&trace, &cfg, "x");
        for (a, b) in clean.checks.iter().zip(&dirty.checks) {
            if a.name == "step_upper_bound" {
                assert_eq!(b.verdict, Verdict::Fail);
            } else {
                assert_eq!(a.verdict, b.verdict, "{}", a.name);
            }
        }
    }

    #[test]
    fn misplaced_refresh_fails_schedule() {
        let (mut trace, cfg) = grlm_run();
        trace[4].snapshot_refreshed = true;
        let rep = audit_trace(&trace, &cfg, "x");
        assert_eq!(
            rep.check("snapshot_schedule").unwrap().verdict,
            Verdict::Fail
        );
        assert_eq!(
            rep.check("step_upper_bound").unwrap().verdict,
            Verdict::Pass
        );
    }

    #[test]
    fn gd_trace_skips_lambda_checks() {
        let p = HEquation::<f64>::new(10, 0.5).unwrap();
        let cfg = SolverConfig::gd(0.5).with_max_iters(20);
        let out = solve(&p, &cfg, &p.random_initial_point(0)).unwrap();
        let rep = audit_trace(&out.trace, &cfg, "gd");
        assert!(rep.check("step_upper_bound").is_none());
        assert!(rep.check("snapshot_schedule").is_none());
        assert!(rep.check("termination").is_some());
    }

    #[test]
    fn audit_is_pure() {
        let (trace, cfg) = grlm_run();
        assert_eq!(
            audit_trace(&trace, &cfg, "a"),
            audit_trace(&trace, &cfg, "a")
        );
        let csv = audit_trace(&trace, &cfg, "a").to_csv();
        assert!(csv.starts_with(AuditReport::CSV_HEADER));
    }
}
