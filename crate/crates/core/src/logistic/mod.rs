//! Non-convex regularized logistic regression posed as `F(x) = ∇f(x) = 0`,
//! with
//!
//! ```text
//! f(x) = (1/n) Σ_i ln(1 + exp(−b_i a_iᵀx)) + λ Σ_p x_p² / (1 + x_p²)
//! ```
//!
//! so the Jacobian is the (symmetric, possibly indefinite) Hessian of `f`.

pub mod libsvm;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::problem::{check_dim, NonlinearSystem, ProblemError};
use crate::scalar::{lit, Scalar};

pub const DEFAULT_REG_LAMBDA: f64 = 0.1;

/// One sparse feature row. Indices are 1-based and strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow<T> {
    pub indices: Vec<usize>,
    pub values: Vec<T>,
}

impl<T> Default for SparseRow<T> {
    fn default() -> Self {
        Self {
            indices: Vec::new(),
            values: Vec::new(),
        }
    }
}

impl<T: Scalar> SparseRow<T> {
    pub fn dot(&self, x: &DVector<T>) -> T {
        self.indices
            .iter()
            .zip(&self.values)
            .fold(T::zero(), |acc, (&i, &v)| acc + v * x[i - 1])
    }
}

/// Row-sparse binary classification data with labels in `{−1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset<T> {
    d: usize,
    rows: Vec<SparseRow<T>>,
    labels: Vec<i8>,
}

impl<T: Scalar> SparseDataset<T> {
    pub(crate) fn from_parts(d: usize, rows: Vec<SparseRow<T>>, labels: Vec<i8>) -> Self {
        debug_assert_eq!(rows.len(), labels.len());
        Self { d, rows, labels }
    }

    /// Builds a dataset from dense rows, dropping zero entries.
    pub fn from_dense(rows: &[Vec<T>], labels: &[i8]) -> Result<Self, ProblemError> {
        if rows.len() != labels.len() {
            return Err(ProblemError::InvalidArgument(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if labels.iter().any(|&b| b != 1 && b != -1) {
            return Err(ProblemError::InvalidArgument("labels must be ±1".into()));
        }
        let d = rows.first().map_or(0, Vec::len);
        let mut sparse = Vec::with_capacity(rows.len());
        for row in rows {
            check_dim(d, row.len())?;
            let mut r = SparseRow::default();
            for (p, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    r.indices.push(p + 1);
                    r.values.push(v);
                }
            }
            sparse.push(r);
        }
        Ok(Self::from_parts(d, sparse, labels.to_vec()))
    }

    /// Synthetic stand-in for the "splice" data: every feature takes one of
    /// four levels in `[−1, 1]`, and labels come from a planted linear model
    /// on a central window of features with 10% label noise.
    pub fn synthetic(n: usize, d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        const LEVELS: [f64; 4] = [-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0];
        let lo = d / 2 - d.min(10) / 2;
        let hi = (lo + 10).min(d);
        let w: Vec<f64> = (0..d)
            .map(|p| {
                if (lo..hi).contains(&p) {
                    rng.random_range(-2.0..2.0)
                } else {
                    0.0
                }
            })
            .collect();
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let a: Vec<f64> = (0..d).map(|_| LEVELS[rng.random_range(0..4)]).collect();
            let score: f64 = a.iter().zip(&w).map(|(ai, wi)| ai * wi).sum();
            let mut b: i8 = if score >= 0.0 { 1 } else { -1 };
            if rng.random::<f64>() < 0.1 {
                b = -b;
            }
            rows.push(SparseRow {
                indices: (1..=d).collect(),
                values: a.into_iter().map(lit::<T>).collect(),
            });
            labels.push(b);
        }
        Self::from_parts(d, rows, labels)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn rows(&self) -> &[SparseRow<T>] {
        &self.rows
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }
}

fn sigmoid<T: Scalar>(u: T) -> T {
    if u >= T::zero() {
        T::one() / (T::one() + (-u).exp())
    } else {
        let e = u.exp();
        e / (T::one() + e)
    }
}

#[derive(Debug, Clone)]
pub struct LogisticProblem<T: Scalar> {
    data: SparseDataset<T>,
    reg_lambda: T,
}

impl<T: Scalar> LogisticProblem<T> {
    pub fn new(data: SparseDataset<T>, reg_lambda: T) -> Result<Self, ProblemError> {
        if data.is_empty() {
            return Err(ProblemError::InvalidArgument(
                "dataset has no samples".into(),
            ));
        }
        if data.dim() == 0 {
            return Err(ProblemError::InvalidArgument(
                "dataset has no features".into(),
            ));
        }
        if !(reg_lambda > T::zero()) {
            return Err(ProblemError::InvalidArgument(format!(
                "reg_lambda must be positive, got {reg_lambda:e}"
            )));
        }
        Ok(Self { data, reg_lambda })
    }

    pub fn data(&self) -> &SparseDataset<T> {
        &self.data
    }

    pub fn reg_lambda(&self) -> T {
        self.reg_lambda
    }

    /// `(a_i, b_i)` pairs in file order.
    fn samples(&self) -> impl Iterator<Item = (&SparseRow<T>, T)> + '_ {
        self.data
            .rows
            .iter()
            .zip(&self.data.labels)
            .map(|(row, &b)| (row, lit::<T>(b as f64)))
    }
}

impl<T: Scalar> NonlinearSystem<T> for LogisticProblem<T> {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn eval_residual(&self, x: &DVector<T>) -> Result<DVector<T>, ProblemError> {
        check_dim(self.dim(), x.len())?;
        let inv_n = T::one() / lit::<T>(self.data.len() as f64);
        let mut f = DVector::zeros(self.dim());
        for (row, b) in self.samples() {
            let z = b * row.dot(x);
            let coef = -(b * sigmoid(-z)) * inv_n;
            for (&i, &v) in row.indices.iter().zip(&row.values) {
                f[i - 1] += coef * v;
            }
        }
        let two = lit::<T>(2.0);
        for (fp, &xp) in f.iter_mut().zip(x.iter()) {
            let q = T::one() + xp * xp;
            *fp += self.reg_lambda * (two * xp / (q * q));
        }
        Ok(f)
    }

    fn eval_jacobian(&self, x: &DVector<T>) -> Result<DMatrix<T>, ProblemError> {
        check_dim(self.dim(), x.len())?;
        let d = self.dim();
        let inv_n = T::one() / lit::<T>(self.data.len() as f64);
        let mut h = DMatrix::zeros(d, d);
        // upper triangle only, mirrored below so the result is exactly symmetric
        for (row, b) in self.samples() {
            let z = b * row.dot(x);
            let w = sigmoid(z) * sigmoid(-z) * inv_n;
            for (a, (&p, &vp)) in row.indices.iter().zip(&row.values).enumerate() {
                for (&q, &vq) in row.indices[a..].iter().zip(&row.values[a..]) {
                    h[(p - 1, q - 1)] += w * (vp * vq);
                }
            }
        }
        let (two, three) = (lit::<T>(2.0), lit::<T>(3.0));
        for p in 0..d {
            let u = x[p];
            let q = T::one() + u * u;
            h[(p, p)] += self.reg_lambda * (two * (T::one() - three * u * u) / (q * q * q));
            for r in 0..p {
                h[(p, r)] = h[(r, p)];
            }
        }
        Ok(h)
    }
}
