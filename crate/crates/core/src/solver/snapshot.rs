//! Snapshot factorization of `J(z)` and the regularized Gram solve built on it.

use nalgebra::{DMatrix, DVector, SVD};

use crate::problem::{Evaluator, NonlinearSystem};
use crate::scalar::Scalar;

use super::SolveError;

const SVD_MAX_SWEEPS: usize = 10_000;

/// Singular values and right singular vectors of `J(z)`.
///
/// With `J = UΣVᵀ` the Gram matrix is `JᵀJ = VΣ²Vᵀ`, so for any `λ > 0`
/// `(JᵀJ + λI)⁻¹g = V diag(1/(σ² + λ)) Vᵀg`. `U` is never needed.
#[derive(Debug, Clone)]
pub struct SnapshotFactorization<T: Scalar> {
    pub sigma: DVector<T>,
    pub v: DMatrix<T>,
    pub snapshot_index: usize,
}

impl<T: Scalar> SnapshotFactorization<T> {
    pub fn from_jacobian(jac: DMatrix<T>, snapshot_index: usize) -> Result<Self, SolveError<T>> {
        let svd = SVD::try_new(jac, false, true, T::default_epsilon(), SVD_MAX_SWEEPS)
            .ok_or(SolveError::Numerical("SVD did not converge"))?;
        let v_t = svd
            .v_t
            .ok_or(SolveError::Numerical("SVD returned no V factor"))?;
        Ok(Self {
            sigma: svd.singular_values,
            v: v_t.transpose(),
            snapshot_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    /// `‖JᵀJ‖₂ = σ_max²`.
    pub fn gram_norm(&self) -> T {
        let s = self.sigma.max();
        s * s
    }

    /// `(JᵀJ + λI)⁻¹ g` in `O(d²)`.
    pub fn solve_regularized(&self, g: &DVector<T>, lambda: T) -> DVector<T> {
        let mut coeffs = self.v.tr_mul(g);
        for (c, &s) in coeffs.iter_mut().zip(self.sigma.iter()) {
            *c /= s * s + lambda;
        }
        &self.v * coeffs
    }
}

/// Factors `J(z)`; charges one full Jacobian to the evaluator.
pub fn refresh_snapshot<T, S>(
    eval: &mut Evaluator<'_, T, S>,
    z: &DVector<T>,
    snapshot_index: usize,
) -> Result<SnapshotFactorization<T>, SolveError<T>>
where
    T: Scalar,
    S: NonlinearSystem<T> + ?Sized,
{
    if z.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::Numerical("snapshot point is not finite"));
    }
    let jac = eval.jacobian(z).map_err(|source| SolveError::Evaluation {
        t: snapshot_index,
        source,
        trace: Vec::new(),
    })?;
    SnapshotFactorization::from_jacobian(jac, snapshot_index)
}

/// `x − V diag(1/(σ² + λ)) Vᵀ g`.
pub fn grlm_step<T: Scalar>(
    x: &DVector<T>,
    snap: &SnapshotFactorization<T>,
    g: &DVector<T>,
    lambda: T,
) -> DVector<T> {
    x - snap.solve_regularized(g, lambda)
}

/// Dense route: Cholesky of `G + λI`.
pub fn direct_regularized_solve<T: Scalar>(
    gram: &DMatrix<T>,
    g: &DVector<T>,
    lambda: T,
) -> Result<DVector<T>, SolveError<T>> {
    let mut a = gram.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    let chol = a.cholesky().ok_or(SolveError::Numerical(
        "regularized Gram matrix is not positive definite",
    ))?;
    Ok(chol.solve(g))
}

/// Snapshot in whichever form the configured solve mode uses.
#[derive(Debug, Clone)]
pub(crate) enum GramOperator<T: Scalar> {
    Svd(SnapshotFactorization<T>),
    Direct { gram: DMatrix<T> },
}

impl<T: Scalar> GramOperator<T> {
    pub(crate) fn build(
        jac: DMatrix<T>,
        mode: super::SolveMode,
        snapshot_index: usize,
    ) -> Result<Self, SolveError<T>> {
        match mode {
            super::SolveMode::SvdReuse => Ok(Self::Svd(SnapshotFactorization::from_jacobian(
                jac,
                snapshot_index,
            )?)),
            super::SolveMode::Direct => Ok(Self::Direct {
                gram: jac.tr_mul(&jac),
            }),
        }
    }

    pub(crate) fn solve(&self, g: &DVector<T>, lambda: T) -> Result<DVector<T>, SolveError<T>> {
        match self {
            Self::Svd(snap) => Ok(snap.solve_regularized(g, lambda)),
            Self::Direct { gram } => direct_regularized_solve(gram, g, lambda),
        }
    }

    /// Upper bound on `‖G(z)‖₂`: exact from the SVD, Frobenius norm otherwise.
    pub(crate) fn gram_norm_bound(&self) -> T {
        match self {
            Self::Svd(snap) => snap.gram_norm(),
            Self::Direct { gram } => gram.norm(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::h_equation::HEquation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0))
    }

    // Gaussian elimination with partial pivoting on (JᵀJ + λI) s = g.
    #[allow(clippy::needless_range_loop)]
    fn gauss_solve(j: &DMatrix<f64>, g: &DVector<f64>, lambda: f64) -> DVector<f64> {
        let d = g.len();
        let mut a = vec![vec![0.0; d + 1]; d];
        for r in 0..d {
            for c in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += j[(k, r)] * j[(k, c)];
                }
                a[r][c] = s + if r == c { lambda } else { 0.0 };
            }
            a[r][d] = g[r];
        }
        for col in 0..d {
            let piv = (col..d)
                .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
                .unwrap();
            a.swap(col, piv);
            for r in col + 1..d {
                let f = a[r][col] / a[col][col];
                for c in col..=d {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
        let mut s = vec![0.0; d];
        for r in (0..d).rev() {
            let mut acc = a[r][d];
            for c in r + 1..d {
                acc -= a[r][c] * s[c];
            }
            s[r] = acc / a[r][r];
        }
        DVector::from_vec(s)
    }

    #[test]
    fn identity_jacobian() {
        let p = HEquation::<f64>::new(6, 0.0).unwrap();
        let mut ev = Evaluator::new(&p);
        let snap = refresh_snapshot(&mut ev, &DVector::from_element(6, 0.3), 0).unwrap();
        assert!(snap.sigma.iter().all(|s| (s - 1.0).abs() < 1e-14));
        assert!((snap.v.tr_mul(&snap.v) - DMatrix::identity(6, 6)).norm() < 1e-10);
        assert_eq!(ev.counters().jv_products, 6);

        let x = DVector::from_element(6, 2.0);
        let g = DVector::from_vec(vec![1.0, -2.0, 0.5, 4.0, 0.0, 3.0]);
        let next = grlm_step(&x, &snap, &g, 1.0);
        assert!((next - (&x - &g * 0.5)).amax() < 1e-14);
    }

    #[test]
    fn factors_reconstruct_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let j = random_matrix(5, &mut rng);
        let snap = SnapshotFactorization::from_jacobian(j.clone(), 0).unwrap();
        assert!(snap.sigma.iter().all(|&s| s >= 0.0));
        assert!((snap.v.tr_mul(&snap.v) - DMatrix::identity(5, 5)).norm() < 1e-10);
        let vs = &snap.v * DMatrix::from_diagonal(&snap.sigma.map(|s| s * s)) * snap.v.transpose();
        // hand-rolled JᵀJ
        let gram = DMatrix::from_fn(5, 5, |r, c| {
            (0..5).map(|k| j[(k, r)] * j[(k, c)]).sum::<f64>()
        });
        assert!((vs - &gram).norm() <= 1e-10 * gram.norm());
    }

    #[test]
    fn huge_lambda_bounds_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let j = random_matrix(4, &mut rng);
        let snap = SnapshotFactorization::from_jacobian(j, 0).unwrap();
        let g = DVector::from_vec(vec![1.0, 2.0, -3.0, 0.5]);
        let lambda = 1e12;
        let step = snap.solve_regularized(&g, lambda);
        assert!(step.norm() <= g.norm() / lambda);
        assert!((step - &g / lambda).norm() < 1e-20);
    }

    #[test]
    fn svd_and_direct_routes_match_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let j = random_matrix(6, &mut rng);
        let g = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
        for lambda in [1e-3, 0.7, 50.0] {
            let oracle = gauss_solve(&j, &g, lambda);
            let snap = SnapshotFactorization::from_jacobian(j.clone(), 0).unwrap();
            let via_svd = snap.solve_regularized(&g, lambda);
            let via_chol = direct_regularized_solve(&j.tr_mul(&j), &g, lambda).unwrap();
            assert!((&via_svd - &oracle).norm() <= 1e-8 * oracle.norm());
            assert!((&via_chol - &oracle).norm() <= 1e-8 * oracle.norm());
        }
    }

    #[test]
    fn refresh_rejects_non_finite_point() {
        let p = HEquation::<f64>::new(3, 0.5).unwrap();
        let mut ev = Evaluator::new(&p);
        let z = DVector::from_vec(vec![0.0, f64::NAN, 1.0]);
        assert!(matches!(
            refresh_snapshot(&mut ev, &z, 0),
            Err(SolveError::Numerical(_))
        ));
    }
}
