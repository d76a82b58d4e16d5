//! Grid sweeps over methods and tuning parameters.

use std::fs;
use std::path::PathBuf;

use grlm::{solve, IterationRecord, Method, SolveError, SolveOutcome, SolverConfig};
use rayon::prelude::*;

use crate::spec::{BuiltProblem, ExperimentSpec, HarnessError};
use crate::trace_csv::emit_trace_csv;

pub const SUMMARY_HEADER: &str =
    "method,m,param,status,iterations,jv_to_tol,final_grad_norm,wall_seconds,best";

/// One tuning configuration. `param` is `η` for GD and `c` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub method: Method,
    pub param: f64,
    pub m: Option<usize>,
}

impl GridPoint {
    pub fn file_stem(&self) -> String {
        match (self.method, self.m) {
            (Method::Gd, _) => format!("gd_eta{}", self.param),
            (method, Some(m)) => format!("{method}_c{}_m{m}", self.param),
            (method, None) => format!("{method}_c{}", self.param),
        }
    }

    /// Methods are compared per `(method, m)` group.
    pub fn group(&self) -> (Method, Option<usize>) {
        (self.method, self.m)
    }

    pub fn config(&self, spec: &ExperimentSpec) -> SolverConfig<f64> {
        let mut cfg = match self.method {
            Method::Gd => SolverConfig::gd(self.param),
            Method::Lm => SolverConfig::lm(self.param),
            Method::Grlm => SolverConfig::grlm(self.param, self.m.unwrap_or(1)),
        };
        cfg.max_iters = spec.max_iters;
        cfg.tol_eps = spec.tol_eps;
        cfg.seed = spec.seed;
        if let Some(mode) = spec.solve_mode {
            cfg.solve_mode = mode;
        }
        cfg
    }
}

/// Grid points in a fixed order: methods as listed, then `m`, then parameter.
pub fn enumerate_grid(spec: &ExperimentSpec) -> Vec<GridPoint> {
    let mut points = Vec::new();
    for &method in &spec.methods {
        match method {
            Method::Gd => points.extend(spec.eta_grid.iter().map(|&param| GridPoint {
                method,
                param,
                m: None,
            })),
            Method::Lm => points.extend(spec.reg_c_grid.iter().map(|&param| GridPoint {
                method,
                param,
                m: None,
            })),
            Method::Grlm => {
                for &m in &spec.m_list {
                    points.extend(spec.reg_c_grid.iter().map(|&param| GridPoint {
                        method,
                        param,
                        m: Some(m),
                    }));
                }
            }
        }
    }
    points
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Converged,
    MaxIters,
    Diverged,
    Failed(String),
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIters => "max_iters",
            RunStatus::Diverged => "diverged",
            RunStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub point: GridPoint,
    pub status: RunStatus,
    pub trace: Vec<IterationRecord<f64>>,
    pub trace_path: PathBuf,
    pub best: bool,
}

impl RunResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    /// Cumulative JV products at the record that met the tolerance.
    pub fn jv_to_tol(&self) -> Option<u64> {
        match self.status {
            RunStatus::Converged => self.trace.last().map(|r| r.jv_cumulative),
            _ => None,
        }
    }

    pub fn wall_seconds(&self) -> f64 {
        self.trace.last().map_or(0.0, |r| r.wall_seconds)
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.grad_norm)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub out_dir: PathBuf,
    pub runs: Vec<RunResult>,
}

impl ExperimentReport {
    /// Best converged run of a `(method, m)` group.
    pub fn best(&self, method: Method, m: Option<usize>) -> Option<&RunResult> {
        self.runs
            .iter()
            .find(|r| r.best && r.point.method == method && r.point.m == m)
    }

    /// Groups in which no grid point reached the tolerance.
    pub fn failed_groups(&self) -> Vec<(Method, Option<usize>)> {
        let mut groups: Vec<_> = self.runs.iter().map(|r| r.point.group()).collect();
        groups.dedup();
        groups
            .into_iter()
            .filter(|&(method, m)| self.best(method, m).is_none())
            .collect()
    }

    pub fn summary_csv(&self) -> String {
        let mut out = format!("{SUMMARY_HEADER}\n");
        for r in &self.runs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:?},{:?},{}\n",
                r.point.method,
                r.point.m.map_or(String::new(), |m| m.to_string()),
                r.point.param,
                r.status.label(),
                r.iterations(),
                r.jv_to_tol().map_or(String::new(), |v| v.to_string()),
                r.final_grad_norm(),
                r.wall_seconds(),
                u8::from(r.best),
            ));
        }
        out
    }
}

fn run_point(
    problem: &BuiltProblem,
    spec: &ExperimentSpec,
    point: &GridPoint,
) -> (RunStatus, Vec<IterationRecord<f64>>) {
    let cfg = point.config(spec);
    match solve(&problem.system, &cfg, &problem.x0) {
        Ok(SolveOutcome {
            trace, converged, ..
        }) => {
            let status = if converged {
                RunStatus::Converged
            } else {
                RunStatus::MaxIters
            };
            (status, trace)
        }
        Err(SolveError::Diverged { trace, .. }) => (RunStatus::Diverged, trace),
        Err(e @ SolveError::Evaluation { .. }) => {
            let trace = e.trace().to_vec();
            (RunStatus::Failed(e.to_string()), trace)
        }
        Err(e) => (RunStatus::Failed(e.to_string()), Vec::new()),
    }
}

/// Marks the best run of each `(method, m)` group: fewest JV products to
/// tolerance, then lower wall time, then smaller parameter.
fn mark_best(runs: &mut [RunResult]) {
    let mut groups: Vec<_> = runs.iter().map(|r| r.point.group()).collect();
    groups.dedup();
    for group in groups {
        let best = runs
            .iter()
            .enumerate()
            .filter(|(_, r)| r.point.group() == group)
            .filter_map(|(i, r)| {
                r.jv_to_tol()
                    .map(|jv| (i, jv, r.wall_seconds(), r.point.param))
            })
            .min_by(|a, b| {
                a.1.cmp(&b.1)
                    .then(a.2.total_cmp(&b.2))
                    .then(a.3.total_cmp(&b.3))
            });
        if let Some((i, ..)) = best {
            runs[i].best = true;
        }
    }
}

/// Runs every grid point of `spec` on one shared problem and starting point,
/// writing `<out>/<tag>/<point>.csv` per run and `<out>/<tag>/summary.csv`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    let problem = spec.problem.build(spec.seed)?;
    let out_dir = spec.out_dir.join(spec.problem.tag());
    fs::create_dir_all(&out_dir).map_err(|e| HarnessError::io(&out_dir, e))?;

    let points = enumerate_grid(spec);
    let execute = |point: &GridPoint| {
        let (status, trace) = run_point(&problem, spec, point);
        let trace_path = out_dir.join(format!("{}.csv", point.file_stem()));
        emit_trace_csv(&trace, &trace_path)?;
        Ok(RunResult {
            point: point.clone(),
            status,
            trace,
            trace_path,
            best: false,
        })
    };

    let results: Vec<Result<RunResult, HarnessError>> = if spec.jobs == 1 {
        points.iter().map(execute).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| HarnessError::Spec(format!("thread pool: {e}")))?;
        pool.install(|| points.par_iter().map(execute).collect())
    };
    let mut runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    mark_best(&mut runs);

    let report = ExperimentReport { out_dir, runs };
    let summary = report.out_dir.join("summary.csv");
    fs::write(&summary, report.summary_csv()).map_err(|e| HarnessError::io(&summary, e))?;
    Ok(report)
}
