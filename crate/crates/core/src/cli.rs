//! Command-line front end: JSON configs in, JSON or CSV out.
//!
//! Exit codes: 0 on success, 2 when an input fails validation, 3 when a
//! solver or certificate fails.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    classify_wellposedness, detect_ttpm, detect_ttpm_discrete, monte_carlo_is, solve_trajectory, Resolution,
};
use crate::continuous::{
    check_existence_uniqueness, check_second_order, closed_form, solve_bvp_shooting, ExistenceCertificate,
    SecondOrderCertificate, ShootingOptions, Trajectory,
};
use crate::discrete::{
    check_bmatrix_sufficient, cost, is_b_matrix, is_diagonally_dominant, is_spd, solve_optimal, BMatrixCertificate,
    DiagonalDominance, ImpactMatrix, SpdCertificate, SufficientBMatrix,
};
use crate::error::ExecError;
use crate::impact::MarketModel;
use crate::sweep::{run_sweep, write_csv, write_json, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "execwell", version, about = "Optimal execution under time-varying impact")]
struct Cli {
    /// Worker threads for sweeps and simulation.
    #[arg(long, global = true, env = "EXECWELL_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal discrete schedule on N intervals.
    SolveDiscrete {
        #[command(flatten)]
        io: ModelIo,
        #[arg(long)]
        n: usize,
    },
    /// Optimal continuous schedule by shooting.
    SolveContinuous {
        #[command(flatten)]
        io: ModelIo,
        #[arg(long, default_value_t = 2000)]
        grid: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Solve even if the existence certificate fails.
        #[arg(long)]
        force: bool,
    },
    /// Analytic schedule for the regimes that have one.
    ClosedForm {
        #[command(flatten)]
        io: ModelIo,
        #[arg(long, default_value_t = 2000)]
        grid: usize,
    },
    /// Well-posedness certificates.
    Certify {
        #[command(flatten)]
        io: ModelIo,
        #[command(flatten)]
        res: ResolutionArgs,
    },
    /// Shape, manipulation and well-posedness report.
    Classify {
        #[command(flatten)]
        io: ModelIo,
        #[command(flatten)]
        res: ResolutionArgs,
    },
    /// Monte-Carlo implementation shortfall along a schedule.
    Simulate {
        #[command(flatten)]
        io: ModelIo,
        #[arg(long)]
        paths: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        grid: usize,
        #[arg(long, value_enum, default_value_t = Schedule::Optimal)]
        schedule: Schedule,
    },
    /// Parameter sweep over exponential or power-law impacts.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// CSV output.
        #[arg(long)]
        out: PathBuf,
        /// JSON output with the same cells.
        #[arg(long)]
        out_json: Option<PathBuf>,
        /// Solve cells outside the admissible region too.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Debug, Args)]
struct ModelIo {
    /// Model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(multiple = false)]
struct ResolutionArgs {
    /// Discrete intervals.
    #[arg(long)]
    n: Option<usize>,
    /// Continuous ODE steps.
    #[arg(long)]
    grid: Option<usize>,
}

impl ResolutionArgs {
    fn resolve(&self) -> Resolution {
        match (self.n, self.grid) {
            (Some(n), _) => Resolution::Discrete(n),
            (None, Some(m)) => Resolution::Continuous(m),
            (None, None) => Resolution::Continuous(2000),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Schedule {
    Optimal,
    Twap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSolution {
    pub quantity: f64,
    pub xi: Vec<f64>,
    pub cost: f64,
    pub ttpm: bool,
    pub turning_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCertificates {
    pub spd: SpdCertificate,
    pub diagonally_dominant: DiagonalDominance,
    pub b_matrix: BMatrixCertificate,
    /// Absent when permanent impact is not non-increasing.
    pub sufficient_b_matrix: Option<SufficientBMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousCertificates {
    pub existence: ExistenceCertificate,
    pub second_order: SecondOrderCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSolution {
    #[serde(flatten)]
    pub trajectory: Trajectory,
    pub ttpm: bool,
    pub turning_points: usize,
}

/// A failed command: exit code plus what to print.
struct Failure {
    code: i32,
    message: String,
    /// Certificate or report explaining a solver failure.
    detail: Option<String>,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.into(),
            detail: None,
        }
    }

    fn with_detail(mut self, detail: &impl Serialize) -> Self {
        self.detail = to_json(detail).ok();
        self
    }
}

impl From<ExecError> for Failure {
    fn from(e: ExecError) -> Self {
        Failure {
            code: if e.is_solver_error() { EXIT_SOLVER } else { EXIT_INVALID },
            message: e.to_string(),
            detail: None,
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn to_json(value: &impl Serialize) -> std::result::Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::invalid(format!("cannot encode output: {e}")))
}

fn read_text(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))
}

fn load_model(path: &Path) -> std::result::Result<MarketModel, Failure> {
    let text = read_text(path)?;
    MarketModel::from_json(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn emit(value: &impl Serialize, out: Option<&Path>, stdout: &mut dyn Write) -> Outcome {
    let text = to_json(value)?;
    match out {
        Some(path) => fs::write(path, format!("{text}\n"))
            .map_err(|e| Failure::invalid(format!("cannot write {}: {e}", path.display()))),
        None => writeln!(stdout, "{text}").map_err(|e| Failure::invalid(format!("cannot write output: {e}"))),
    }
}

fn discrete_certificates(model: &MarketModel, n: usize) -> std::result::Result<DiscreteCertificates, Failure> {
    let grid = model.discretize(n)?;
    let a = ImpactMatrix::build(&grid);
    let sufficient_b_matrix = match check_bmatrix_sufficient(&grid) {
        Ok(s) => Some(s),
        Err(ExecError::NotApplicable(_)) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(DiscreteCertificates {
        spd: is_spd(&a),
        diagonally_dominant: is_diagonally_dominant(&grid),
        b_matrix: is_b_matrix(&a),
        sufficient_b_matrix,
    })
}

fn continuous_certificates(model: &MarketModel, grid: usize) -> std::result::Result<ContinuousCertificates, Failure> {
    Ok(ContinuousCertificates {
        existence: check_existence_uniqueness(model, grid.max(64))?,
        second_order: check_second_order(model),
    })
}

fn continuous_output(traj: Trajectory) -> ContinuousSolution {
    let pattern = detect_ttpm(&traj);
    ContinuousSolution {
        trajectory: traj,
        ttpm: pattern.ttpm,
        turning_points: pattern.turning_points,
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Outcome {
    match command {
        Command::SolveDiscrete { io, n } => {
            let model = load_model(&io.model)?;
            let grid = model.discretize(n)?;
            let a = ImpactMatrix::build(&grid);
            let strategy = solve_optimal(&a, model.quantity).map_err(|e| Failure::from(e).with_detail(&is_spd(&a)))?;
            let pattern = detect_ttpm_discrete(&strategy);
            let solution = DiscreteSolution {
                quantity: strategy.quantity,
                cost: cost(&a, &strategy)?,
                xi: strategy.xi,
                ttpm: pattern.ttpm,
                turning_points: pattern.turning_points,
            };
            emit(&solution, io.out.as_deref(), stdout)
        }
        Command::SolveContinuous { io, grid, tol, force } => {
            let model = load_model(&io.model)?;
            let opts = ShootingOptions { grid, tol, force };
            let traj = solve_bvp_shooting(&model, &opts).map_err(|e| {
                let failure = Failure::from(e);
                match continuous_certificates(&model, grid) {
                    Ok(c) if failure.code == EXIT_SOLVER => failure.with_detail(&c),
                    _ => failure,
                }
            })?;
            emit(&continuous_output(traj), io.out.as_deref(), stdout)
        }
        Command::ClosedForm { io, grid } => {
            let model = load_model(&io.model)?;
            let traj = closed_form(&model, grid)?;
            emit(&continuous_output(traj), io.out.as_deref(), stdout)
        }
        Command::Certify { io, res } => {
            let model = load_model(&io.model)?;
            match res.resolve() {
                Resolution::Discrete(n) => emit(&discrete_certificates(&model, n)?, io.out.as_deref(), stdout),
                Resolution::Continuous(m) => emit(&continuous_certificates(&model, m)?, io.out.as_deref(), stdout),
            }
        }
        Command::Classify { io, res } => {
            let model = load_model(&io.model)?;
            let report = classify_wellposedness(&model, res.resolve())?;
            emit(&report, io.out.as_deref(), stdout)
        }
        Command::Simulate {
            io,
            paths,
            seed,
            grid,
            schedule,
        } => {
            let model = load_model(&io.model)?;
            let traj = match schedule {
                Schedule::Optimal => solve_trajectory(&model, grid)?,
                Schedule::Twap => Trajectory::twap(&model, grid)?,
            };
            emit(&monte_carlo_is(&model, &traj, paths, seed)?, io.out.as_deref(), stdout)
        }
        Command::Sweep {
            spec,
            out,
            out_json,
            force,
        } => {
            let text = read_text(&spec)?;
            let mut parsed: SweepSpec =
                serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", spec.display())))?;
            parsed.force |= force;
            let cells = run_sweep(&parsed)?;
            let write_err = |p: &Path, e: std::io::Error| Failure::invalid(format!("cannot write {}: {e}", p.display()));
            let file = fs::File::create(&out).map_err(|e| write_err(&out, e))?;
            write_csv(&cells, std::io::BufWriter::new(file)).map_err(|e| write_err(&out, e))?;
            if let Some(path) = out_json {
                let file = fs::File::create(&path).map_err(|e| write_err(&path, e))?;
                write_json(&cells, std::io::BufWriter::new(file)).map_err(|e| write_err(&path, e))?;
            }
            Ok(())
        }
    }
}

/// Runs the CLI on `argv` (program name first), printing to the given
/// streams, and returns the exit code.
pub fn run_with<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    if cli.jobs == Some(0) {
        let _ = writeln!(stderr, "error: invalid jobs: must be at least 1");
        return EXIT_INVALID;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build() {
        Ok(pool) => pool,
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot start workers: {e}");
            return EXIT_SOLVER;
        }
    };
    let command = cli.command;
    let mut buffer = Vec::new();
    let outcome = pool.install(|| {
        std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| dispatch(command, &mut buffer)))
    });
    let _ = stdout.write_all(&buffer);
    match outcome {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(f)) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            if let Some(detail) = f.detail {
                let _ = writeln!(stdout, "{detail}");
            }
            f.code
        }
        Err(_) => {
            let _ = writeln!(stderr, "error: internal failure");
            EXIT_SOLVER
        }
    }
}

/// Runs the CLI against the process streams.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
