//! Experiment description and problem construction.

use std::io;
use std::path::{Path, PathBuf};

use grlm::h_equation::DEFAULT_C_PARAM;
use grlm::logistic::DEFAULT_REG_LAMBDA;
use grlm::{
    read_libsvm_file, HEquation64, LogisticProblem64, Method, NonlinearSystem, ParseError,
    ProblemError, SolveMode, SparseDataset64,
};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error("dataset: {0}")]
    Dataset(#[from] ParseError),
    #[error("problem: {0}")]
    Problem(#[from] ProblemError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 2 for bad input, 1 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Io { .. } => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Libsvm(PathBuf),
    /// Seeded synthetic data with `n` samples and `d` features.
    Synthetic {
        n: usize,
        d: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    HEquation {
        n: usize,
        c_param: f64,
    },
    Logistic {
        source: DataSource,
        dim: Option<usize>,
        reg_lambda: f64,
    },
}

impl ProblemSpec {
    pub fn h_equation(n: usize) -> Self {
        ProblemSpec::HEquation {
            n,
            c_param: DEFAULT_C_PARAM,
        }
    }

    pub fn synthetic_logistic(n: usize, d: usize) -> Self {
        ProblemSpec::Logistic {
            source: DataSource::Synthetic { n, d },
            dim: None,
            reg_lambda: DEFAULT_REG_LAMBDA,
        }
    }

    /// Short name used for output subdirectories.
    pub fn tag(&self) -> String {
        match self {
            ProblemSpec::HEquation { n, .. } => format!("heq_n{n}"),
            ProblemSpec::Logistic {
                source: DataSource::Libsvm(path),
                ..
            } => format!(
                "logistic_{}",
                path.file_stem()
                    .map_or("data".into(), |s| s.to_string_lossy())
            ),
            ProblemSpec::Logistic {
                source: DataSource::Synthetic { n, d },
                ..
            } => format!("logistic_synthetic_{n}x{d}"),
        }
    }

    pub fn build(&self, seed: u64) -> Result<BuiltProblem, HarnessError> {
        match self {
            ProblemSpec::HEquation { n, c_param } => {
                let p = HEquation64::new(*n, *c_param)?;
                let x0 = p.random_initial_point(seed);
                Ok(BuiltProblem {
                    system: Problem::HEquation(p),
                    x0,
                })
            }
            ProblemSpec::Logistic {
                source,
                dim,
                reg_lambda,
            } => {
                let data = match source {
                    DataSource::Libsvm(path) => read_libsvm_file(path, *dim)?,
                    DataSource::Synthetic { n, d } => SparseDataset64::synthetic(*n, *d, seed),
                };
                let p = LogisticProblem64::new(data, *reg_lambda)?;
                let x0 = DVector::zeros(p.dim());
                Ok(BuiltProblem {
                    system: Problem::Logistic(p),
                    x0,
                })
            }
        }
    }
}

/// One of the benchmark problems, ready to solve.
#[derive(Debug, Clone)]
pub enum Problem {
    HEquation(HEquation64),
    Logistic(LogisticProblem64),
}

impl NonlinearSystem<f64> for Problem {
    fn dim(&self) -> usize {
        match self {
            Problem::HEquation(p) => p.dim(),
            Problem::Logistic(p) => p.dim(),
        }
    }

    fn eval_residual(&self, x: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
        match self {
            Problem::HEquation(p) => p.eval_residual(x),
            Problem::Logistic(p) => p.eval_residual(x),
        }
    }

    fn eval_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, ProblemError> {
        match self {
            Problem::HEquation(p) => p.eval_jacobian(x),
            Problem::Logistic(p) => p.eval_jacobian(x),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub system: Problem,
    /// Shared starting point for every grid point.
    pub x0: DVector<f64>,
}

/// GD step sizes `{0.1, 0.2, …, 1}`.
pub fn default_eta_grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

pub fn default_reg_c_grid() -> Vec<f64> {
    vec![1.0, 10.0, 100.0, 1000.0]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    pub methods: Vec<Method>,
    pub eta_grid: Vec<f64>,
    pub reg_c_grid: Vec<f64>,
    /// Snapshot periods swept for GRLM.
    pub m_list: Vec<usize>,
    pub max_iters: usize,
    pub tol_eps: f64,
    pub seed: u64,
    /// Overrides the per-method default (SVD reuse for GRLM, direct for LM).
    pub solve_mode: Option<SolveMode>,
    pub out_dir: PathBuf,
    /// Worker threads; 1 runs grid points sequentially, 0 uses all cores.
    pub jobs: usize,
}

impl ExperimentSpec {
    pub fn new(problem: ProblemSpec, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            problem,
            methods: vec![Method::Gd, Method::Lm, Method::Grlm],
            eta_grid: default_eta_grid(),
            reg_c_grid: default_reg_c_grid(),
            m_list: vec![50],
            max_iters: 1000,
            tol_eps: 1e-6,
            seed: 0,
            solve_mode: None,
            out_dir: out_dir.into(),
            jobs: 0,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |msg: &str| Err(HarnessError::Spec(msg.into()));
        if self.methods.is_empty() {
            return err("method list is empty");
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return err("method list has duplicates");
        }
        if self.methods.contains(&Method::Gd) {
            if self.eta_grid.is_empty() {
                return err("GD selected but the eta grid is empty");
            }
            if self.eta_grid.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
                return err("eta values must be positive");
            }
        }
        if self.methods.iter().any(|&m| m != Method::Gd) {
            if self.reg_c_grid.is_empty() {
                return err("LM/GRLM selected but the reg_c grid is empty");
            }
            if self.reg_c_grid.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
                return err("reg_c values must be positive");
            }
        }
        if self.methods.contains(&Method::Grlm) {
            if self.m_list.is_empty() {
                return err("GRLM selected but the m list is empty");
            }
            if self.m_list.contains(&0) {
                return err("m must be at least 1");
            }
        }
        if self.max_iters == 0 {
            return err("max_iters must be at least 1");
        }
        if !(self.tol_eps > 0.0) {
            return err("tol must be positive");
        }
        match &self.problem {
            ProblemSpec::HEquation { n, c_param } => {
                if *n == 0 {
                    return err("H-equation size must be positive");
                }
                if !(0.0..=1.0).contains(c_param) {
                    return err("c_param must lie in [0, 1]");
                }
            }
            ProblemSpec::Logistic {
                source, reg_lambda, ..
            } => {
                if !(*reg_lambda > 0.0) {
                    return err("reg_lambda must be positive");
                }
                match source {
                    DataSource::Libsvm(path) if !path.is_file() => {
                        return Err(HarnessError::Spec(format!(
                            "dataset {} does not exist",
                            path.display()
                        )))
                    }
                    DataSource::Synthetic { n, d } if *n == 0 || *d == 0 => {
                        return err("synthetic data needs n, d > 0")
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}
