use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use grlm::h_equation::DEFAULT_C_PARAM;
use grlm::logistic::DEFAULT_REG_LAMBDA;
use grlm::{audit_trace, solve, Method, SolveError, SolveMode};
use grlm_bench::spec::{default_eta_grid, default_reg_c_grid};
use grlm_bench::{
    emit_trace_csv, emit_trace_dat, run_experiment, DataSource, ExperimentSpec, GridPoint,
    HarnessError, ProblemSpec,
};

const EXIT_SPEC: u8 = 2;
const EXIT_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "grlm",
    version,
    about = "Gram-reduced Levenberg-Marquardt benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single solver run.
    Solve(CommonArgs),
    /// Tuning-grid sweep over methods, parameters and snapshot periods.
    Bench(CommonArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemKind {
    Heq,
    Logistic,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Gd,
    Lm,
    Grlm,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Gd => Method::Gd,
            MethodArg::Lm => Method::Lm,
            MethodArg::Grlm => Method::Grlm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Svd,
    Direct,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, value_enum, default_value = "heq")]
    problem: ProblemKind,
    /// H-equation size(s); `bench` accepts a comma-separated list.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    n: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_C_PARAM)]
    c_param: f64,
    /// LIBSVM dataset for the logistic problem.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Synthetic logistic data instead of a file, as `<n>x<d>`.
    #[arg(long, conflicts_with = "data")]
    synthetic: Option<String>,
    /// Feature dimension override for LIBSVM files.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_REG_LAMBDA)]
    reg_lambda: f64,
    #[arg(long, value_enum, value_delimiter = ',')]
    method: Vec<MethodArg>,
    /// GD step size(s); defaults to 0.1, 0.2, ..., 1.
    #[arg(long, value_delimiter = ',')]
    eta: Vec<f64>,
    /// LM/GRLM regularization constant(s); defaults to 1, 10, 100, 1000.
    #[arg(long, value_delimiter = ',')]
    reg_c: Vec<f64>,
    /// GRLM snapshot period(s).
    #[arg(long, value_delimiter = ',', default_value = "50")]
    m: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    solve_mode: Option<ModeArg>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for `bench`; 1 runs sequentially for timing fidelity.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Also write whitespace-separated `.dat` traces (`solve` only).
    #[arg(long)]
    gnuplot: bool,
}

fn parse_synthetic(s: &str) -> Result<(usize, usize), HarnessError> {
    s.split_once('x')
        .and_then(|(n, d)| Some((n.parse().ok()?, d.parse().ok()?)))
        .ok_or_else(|| HarnessError::Spec(format!("--synthetic expects <n>x<d>, got {s:?}")))
}

impl CommonArgs {
    fn problems(&self) -> Result<Vec<ProblemSpec>, HarnessError> {
        match self.problem {
            ProblemKind::Heq => Ok(self
                .n
                .iter()
                .map(|&n| ProblemSpec::HEquation {
                    n,
                    c_param: self.c_param,
                })
                .collect()),
            ProblemKind::Logistic => {
                let source = match (&self.data, &self.synthetic) {
                    (Some(path), _) => DataSource::Libsvm(path.clone()),
                    (None, Some(s)) => {
                        let (n, d) = parse_synthetic(s)?;
                        DataSource::Synthetic { n, d }
                    }
                    (None, None) => {
                        return Err(HarnessError::Spec(
                            "--problem logistic needs --data or --synthetic".into(),
                        ))
                    }
                };
                Ok(vec![ProblemSpec::Logistic {
                    source,
                    dim: self.dim,
                    reg_lambda: self.reg_lambda,
                }])
            }
        }
    }

    fn spec(&self, problem: ProblemSpec, default_methods: &[Method]) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(problem, &self.out);
        spec.methods = if self.method.is_empty() {
            default_methods.to_vec()
        } else {
            self.method.iter().map(|&m| m.into()).collect()
        };
        spec.eta_grid = if self.eta.is_empty() {
            default_eta_grid()
        } else {
            self.eta.clone()
        };
        spec.reg_c_grid = if self.reg_c.is_empty() {
            default_reg_c_grid()
        } else {
            self.reg_c.clone()
        };
        spec.m_list = self.m.clone();
        spec.max_iters = self.max_iters;
        spec.tol_eps = self.tol;
        spec.seed = self.seed;
        spec.solve_mode = self.solve_mode.map(|m| match m {
            ModeArg::Svd => SolveMode::SvdReuse,
            ModeArg::Direct => SolveMode::Direct,
        });
        spec.jobs = self.jobs;
        spec
    }
}

fn single<T: Copy>(values: &[T], default: T, flag: &str) -> Result<T, HarnessError> {
    match values {
        [] => Ok(default),
        [v] => Ok(*v),
        _ => Err(HarnessError::Spec(format!("solve takes a single {flag}"))),
    }
}

fn cmd_solve(args: &CommonArgs) -> Result<ExitCode, HarnessError> {
    let problems = args.problems()?;
    let [problem] = problems.as_slice() else {
        return Err(HarnessError::Spec("solve takes a single --n".into()));
    };
    let method: Method = single(&args.method, MethodArg::Grlm, "--method")?.into();
    let param = match method {
        Method::Gd => single(&args.eta, 0.1, "--eta")?,
        _ => single(&args.reg_c, 1.0, "--reg-c")?,
    };
    let m = match method {
        Method::Grlm => Some(single(&args.m, 50, "--m")?),
        _ => None,
    };
    let spec = args.spec(problem.clone(), &[method]);
    spec.validate()?;
    let point = GridPoint { method, param, m };
    let cfg = point.config(&spec);

    let built = problem.build(spec.seed)?;
    let out_dir = spec.out_dir.join(problem.tag());
    fs::create_dir_all(&out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.clone(),
        source,
    })?;

    let result = solve(&built.system, &cfg, &built.x0);
    let (trace, code) = match &result {
        Ok(out) => {
            let last = out.trace.last().expect("at least one record");
            println!(
                "{} {}: {} after {} iterations, |JᵀF| = {:e}, #JV = {}, {:.3}s",
                problem.tag(),
                point.file_stem(),
                if out.converged {
                    "converged"
                } else {
                    "stopped"
                },
                out.iterations(),
                last.grad_norm,
                last.jv_cumulative,
                last.wall_seconds
            );
            (out.trace.as_slice(), ExitCode::SUCCESS)
        }
        Err(e @ (SolveError::Diverged { .. } | SolveError::Evaluation { .. })) => {
            eprintln!("{}: {e}", point.file_stem());
            (e.trace(), ExitCode::from(EXIT_FAILED))
        }
        Err(e) => {
            eprintln!("{}: {e}", point.file_stem());
            return Ok(ExitCode::from(EXIT_FAILED));
        }
    };

    let stem = out_dir.join(point.file_stem());
    emit_trace_csv(trace, &stem.with_extension("csv"))?;
    if args.gnuplot {
        emit_trace_dat(trace, &stem.with_extension("dat"))?;
    }
    let audit = audit_trace(trace, &cfg, point.file_stem());
    let audit_path = out_dir.join(format!("{}.audit.csv", point.file_stem()));
    fs::write(&audit_path, audit.to_csv()).map_err(|source| HarnessError::Io {
        path: audit_path,
        source,
    })?;
    for check in audit.failures() {
        eprintln!(
            "audit failure: {} = {:e} (threshold {:e})",
            check.name, check.measured, check.threshold
        );
    }
    Ok(code)
}

fn cmd_bench(args: &CommonArgs) -> Result<ExitCode, HarnessError> {
    let mut code = ExitCode::SUCCESS;
    for problem in args.problems()? {
        let spec = args.spec(problem, &[Method::Gd, Method::Lm, Method::Grlm]);
        let report = run_experiment(&spec)?;
        println!("{}:", report.out_dir.display());
        for r in report.runs.iter().filter(|r| r.best) {
            println!(
                "  best {:<16} iterations {:>7}  #JV {:>10}  {:.3}s",
                r.point.file_stem(),
                r.iterations(),
                r.jv_to_tol().unwrap_or_default(),
                r.wall_seconds()
            );
        }
        for (method, m) in report.failed_groups() {
            let m = m.map_or(String::new(), |m| format!(" (m = {m})"));
            eprintln!(
                "  {method}{m}: no grid point reached tol {:e}",
                spec.tol_eps
            );
            code = ExitCode::from(EXIT_FAILED);
        }
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e.exit_code() {
                2 => ExitCode::from(EXIT_SPEC),
                c => ExitCode::from(c as u8),
            }
        }
    }
}
