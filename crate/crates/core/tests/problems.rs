use std::path::PathBuf;

use grlm::{
    audit_jacobian, default_fd_step, fd_merit_gradient, read_libsvm_file, solve, Evaluator,
    HEquation64, LogisticProblem64, NonlinearSystem, SolverConfig, SparseDataset64,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(d: usize, count: usize, seed: u64, lo: f64, hi: f64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| DVector::from_fn(d, |_, _| rng.random_range(lo..hi)))
        .collect()
}

fn check_gradient<S: NonlinearSystem<f64>>(sys: &S, points: &[DVector<f64>], rel_tol: f64) {
    for x in points {
        let mut ev = Evaluator::new(sys);
        let g = ev.grad_merit(x).unwrap();
        let fd = fd_merit_gradient(sys, x, default_fd_step(x)).unwrap();
        let err = (&g - &fd).norm();
        assert!(
            err <= rel_tol * (1.0 + g.norm()),
            "gradient mismatch {err:e}"
        );
    }
}

#[test]
fn h_equation_gradient_consistency() {
    let sys = HEquation64::new(50, 0.9).unwrap();
    check_gradient(&sys, &random_points(50, 20, 11, 0.0, 1.0), 1e-6);
    let report = audit_jacobian(&sys, &random_points(50, 20, 12, 0.0, 1.0), 1e-6).unwrap();
    assert!(report.passed(), "{report}");
}

#[test]
fn logistic_gradient_consistency() {
    let sys = LogisticProblem64::new(SparseDataset64::synthetic(300, 20, 1), 0.1).unwrap();
    check_gradient(&sys, &random_points(20, 20, 13, -2.0, 2.0), 1e-6);
    let report = audit_jacobian(&sys, &random_points(20, 20, 14, -2.0, 2.0), 1e-6).unwrap();
    assert!(report.passed(), "{report}");
}

#[test]
fn logistic_hessian_is_symmetric() {
    let sys = LogisticProblem64::new(SparseDataset64::synthetic(500, 30, 2), 0.1).unwrap();
    for x in random_points(30, 10, 15, -3.0, 3.0) {
        let h = sys.eval_jacobian(&x).unwrap();
        assert_eq!(h, h.transpose());
    }
}

fn a1a_path() -> PathBuf {
    std::env::var_os("GRLM_A1A")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/a1a"))
}

// Runs only when the a1a file is available (set GRLM_A1A or place it in data/).
#[test]
fn a1a_dataset() {
    let path = a1a_path();
    if !path.is_file() {
        eprintln!("skipping: {} not found", path.display());
        return;
    }
    let data = read_libsvm_file::<f64>(&path, Some(123)).unwrap();
    assert_eq!(data.len(), 1605);
    assert_eq!(data.dim(), 123);
    let sys = LogisticProblem64::new(data, 0.1).unwrap();
    let h = sys.eval_jacobian(&DVector::zeros(123)).unwrap();
    assert_eq!(h, h.transpose());
    check_gradient(&sys, &random_points(123, 5, 16, -1.0, 1.0), 1e-6);
    let out = solve(&sys, &SolverConfig::grlm(1.0, 50), &DVector::zeros(123)).unwrap();
    assert!(out.trace.iter().all(|r| r.grad_norm.is_finite()));
}
