//! Discretized Chandrasekhar H-equation.
//!
//! ```text
//! F_i(x) = x_i − 1 / (1 − s_i),   s_i = (c/2N) Σ_j μ_i x_j / (μ_i + μ_j)
//! ```
//!
//! with midpoint quadrature nodes `μ_i = (i − ½)/N`. As `c → 1` the Jacobian at
//! the solution becomes nearly singular, which is what makes the problem a
//! useful stress test.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::problem::{check_dim, NonlinearSystem, ProblemError};
use crate::scalar::{lit, to_f64, Scalar};

/// `c` used for the benchmark runs.
pub const DEFAULT_C_PARAM: f64 = 1.0 - 1e-10;

const SINGULAR_GAP: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct HEquation<T: Scalar> {
    c_param: T,
    mu: Vec<T>,
    // kernel[(i, j)] = (c/2N) μ_i / (μ_i + μ_j)
    kernel: DMatrix<T>,
}

impl<T: Scalar> HEquation<T> {
    /// Size-`n` problem on the composite midpoint nodes.
    pub fn new(n: usize, c_param: T) -> Result<Self, ProblemError> {
        if n == 0 {
            return Err(ProblemError::InvalidArgument(
                "H-equation size must be positive".into(),
            ));
        }
        let nf = lit::<T>(n as f64);
        let mu = (0..n)
            .map(|i| (lit::<T>(i as f64) + lit::<T>(0.5)) / nf)
            .collect();
        Self::with_nodes(mu, c_param)
    }

    pub fn with_nodes(mu: Vec<T>, c_param: T) -> Result<Self, ProblemError> {
        let n = mu.len();
        if n == 0 {
            return Err(ProblemError::InvalidArgument(
                "H-equation needs at least one node".into(),
            ));
        }
        if !(c_param >= T::zero() && c_param <= T::one()) {
            return Err(ProblemError::InvalidArgument(format!(
                "c_param must lie in [0, 1], got {c_param:e}"
            )));
        }
        if !(mu[0] > T::zero()) || mu.windows(2).any(|w| !(w[1] > w[0])) || mu[n - 1] > T::one() {
            return Err(ProblemError::InvalidArgument(
                "quadrature nodes must be strictly increasing in (0, 1]".into(),
            ));
        }
        let scale = c_param / (lit::<T>(2.0) * lit::<T>(n as f64));
        let kernel = DMatrix::from_fn(n, n, |i, j| scale * (mu[i] / (mu[i] + mu[j])));
        Ok(Self {
            c_param,
            mu,
            kernel,
        })
    }

    pub fn size(&self) -> usize {
        self.mu.len()
    }

    pub fn c_param(&self) -> T {
        self.c_param
    }

    pub fn nodes(&self) -> &[T] {
        &self.mu
    }

    /// `1 − s_i` for every row, rejecting points where it vanishes.
    fn denominators(&self, x: &DVector<T>) -> Result<DVector<T>, ProblemError> {
        check_dim(self.size(), x.len())?;
        let s = &self.kernel * x;
        let gap = lit::<T>(SINGULAR_GAP);
        let denom = s.map(|si| T::one() - si);
        if let Some((index, v)) = denom.iter().enumerate().find(|(_, v)| !(v.abs() >= gap)) {
            return Err(ProblemError::SingularEvaluation {
                index,
                gap: to_f64(v.abs()),
            });
        }
        Ok(denom)
    }

    /// Initial point with i.i.d. entries uniform in `[0, 1)`.
    pub fn random_initial_point(&self, seed: u64) -> DVector<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(self.size(), |_, _| lit::<T>(rng.random::<f64>()))
    }
}

impl<T: Scalar> NonlinearSystem<T> for HEquation<T> {
    fn dim(&self) -> usize {
        self.size()
    }

    fn eval_residual(&self, x: &DVector<T>) -> Result<DVector<T>, ProblemError> {
        let denom = self.denominators(x)?;
        Ok(x.zip_map(&denom, |xi, di| xi - T::one() / di))
    }

    fn eval_jacobian(&self, x: &DVector<T>) -> Result<DMatrix<T>, ProblemError> {
        let denom = self.denominators(x)?;
        let n = self.size();
        let mut jac = DMatrix::from_fn(n, n, |i, k| {
            let w = T::one() / (denom[i] * denom[i]);
            -(w * self.kernel[(i, k)])
        });
        for i in 0..n {
            jac[(i, i)] += T::one();
        }
        Ok(jac)
    }
}
