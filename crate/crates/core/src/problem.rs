//! The square nonlinear-system abstraction, the merit function and
//! Jacobian-vector-product accounting.

use std::marker::PhantomData;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("singular evaluation at component {index}: |1 - s| = {gap:e}")]
    SingularEvaluation { index: usize, gap: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A square system `F: ℝᵈ → ℝᵈ` with an analytic Jacobian.
///
/// Implementations must be pure: evaluating twice at the same `x` returns
/// bit-identical output. Counting is done by [`Evaluator`], so a single
/// problem can be shared by concurrent runs.
pub trait NonlinearSystem<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn eval_residual(&self, x: &DVector<T>) -> Result<DVector<T>, ProblemError>;

    fn eval_jacobian(&self, x: &DVector<T>) -> Result<DMatrix<T>, ProblemError>;
}

impl<T: Scalar, S: NonlinearSystem<T> + ?Sized> NonlinearSystem<T> for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval_residual(&self, x: &DVector<T>) -> Result<DVector<T>, ProblemError> {
        (**self).eval_residual(x)
    }

    fn eval_jacobian(&self, x: &DVector<T>) -> Result<DMatrix<T>, ProblemError> {
        (**self).eval_jacobian(x)
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<(), ProblemError> {
    if expected == got {
        Ok(())
    } else {
        Err(ProblemError::DimensionMismatch { expected, got })
    }
}

/// Evaluation counts for one run. A full Jacobian costs `d` JV products.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounters {
    pub residual_evals: u64,
    pub full_jacobian_evals: u64,
    pub jv_products: u64,
}

/// Residual, Jacobian and `JᵀF` at one point.
#[derive(Debug, Clone)]
pub struct Linearization<T: Scalar> {
    pub residual: DVector<T>,
    pub jacobian: DMatrix<T>,
    pub gradient: DVector<T>,
}

impl<T: Scalar> Linearization<T> {
    pub fn merit(&self) -> T {
        lit::<T>(0.5) * self.residual.norm_squared()
    }
}

/// Counting front-end over a borrowed system. Each solver run owns one.
#[derive(Debug)]
pub struct Evaluator<'a, T: Scalar, S: NonlinearSystem<T> + ?Sized> {
    sys: &'a S,
    counters: EvalCounters,
    _scalar: PhantomData<T>,
}

impl<'a, T: Scalar, S: NonlinearSystem<T> + ?Sized> Evaluator<'a, T, S> {
    pub fn new(sys: &'a S) -> Self {
        Self {
            sys,
            counters: EvalCounters::default(),
            _scalar: PhantomData,
        }
    }

    pub fn dim(&self) -> usize {
        self.sys.dim()
    }

    pub fn counters(&self) -> EvalCounters {
        self.counters
    }

    pub fn system(&self) -> &'a S {
        self.sys
    }

    pub fn residual(&mut self, x: &DVector<T>) -> Result<DVector<T>, ProblemError> {
        check_dim(self.dim(), x.len())?;
        let f = self.sys.eval_residual(x)?;
        self.counters.residual_evals += 1;
        Ok(f)
    }

    pub fn jacobian(&mut self, x: &DVector<T>) -> Result<DMatrix<T>, ProblemError> {
        check_dim(self.dim(), x.len())?;
        let j = self.sys.eval_jacobian(x)?;
        self.counters.full_jacobian_evals += 1;
        self.counters.jv_products += self.dim() as u64;
        Ok(j)
    }

    /// `φ(x) = ½‖F(x)‖²`.
    pub fn merit(&mut self, x: &DVector<T>) -> Result<T, ProblemError> {
        Ok(lit::<T>(0.5) * self.residual(x)?.norm_squared())
    }

    /// `∇φ(x) = J(x)ᵀF(x)`, materializing the full Jacobian.
    pub fn grad_merit(&mut self, x: &DVector<T>) -> Result<DVector<T>, ProblemError> {
        Ok(self.linearize(x)?.gradient)
    }

    pub fn linearize(&mut self, x: &DVector<T>) -> Result<Linearization<T>, ProblemError> {
        let residual = self.residual(x)?;
        let jacobian = self.jacobian(x)?;
        let gradient = jacobian.tr_mul(&residual);
        Ok(Linearization {
            residual,
            jacobian,
            gradient,
        })
    }
}

/// Central-difference step `1e-6·(1 + ‖x‖∞)`.
pub fn default_fd_step<T: Scalar>(x: &DVector<T>) -> T {
    lit::<T>(1e-6) * (T::one() + x.amax())
}

/// Central-difference Jacobian; column `k` is `(F(x+h·e_k) − F(x−h·e_k)) / 2h`.
pub fn finite_difference_jacobian<T, S>(
    sys: &S,
    x: &DVector<T>,
    h: T,
) -> Result<DMatrix<T>, ProblemError>
where
    T: Scalar,
    S: NonlinearSystem<T> + ?Sized,
{
    if !(h > T::zero()) {
        return Err(ProblemError::InvalidArgument(format!(
            "finite-difference step must be positive, got {h:e}"
        )));
    }
    let d = sys.dim();
    check_dim(d, x.len())?;
    let two_h = h + h;
    let mut jac = DMatrix::zeros(d, d);
    let mut xp = x.clone();
    for k in 0..d {
        let xk = x[k];
        xp[k] = xk + h;
        let fp = sys.eval_residual(&xp)?;
        xp[k] = xk - h;
        let fm = sys.eval_residual(&xp)?;
        xp[k] = xk;
        jac.set_column(k, &((fp - fm) / two_h));
    }
    Ok(jac)
}

/// Central-difference gradient of `φ = ½‖F‖²`.
pub fn fd_merit_gradient<T, S>(sys: &S, x: &DVector<T>, h: T) -> Result<DVector<T>, ProblemError>
where
    T: Scalar,
    S: NonlinearSystem<T> + ?Sized,
{
    if !(h > T::zero()) {
        return Err(ProblemError::InvalidArgument(format!(
            "finite-difference step must be positive, got {h:e}"
        )));
    }
    let d = sys.dim();
    check_dim(d, x.len())?;
    let half = lit::<T>(0.5);
    let mut xp = x.clone();
    let mut grad = DVector::zeros(d);
    for k in 0..d {
        let xk = x[k];
        xp[k] = xk + h;
        let phi_p = half * sys.eval_residual(&xp)?.norm_squared();
        xp[k] = xk - h;
        let phi_m = half * sys.eval_residual(&xp)?.norm_squared();
        xp[k] = xk;
        grad[k] = (phi_p - phi_m) / (h + h);
    }
    Ok(grad)
}
