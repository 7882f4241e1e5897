//! `ensgrad` command-line front end.

mod bench;
mod gradient;
mod manifest;
mod rastrigin;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ensgrad",
    version,
    about = "Ensemble gradient estimators and their benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo benchmark on the Hermite objective.
    Bench(BenchArgs),
    /// Exact versus blurred steepest descent on the Rastrigin function.
    Rastrigin(RastriginArgs),
    /// Identity suite on the bilinear objective.
    LinearCheck(LinearCheckArgs),
    /// One gradient estimate from ensemble files.
    Gradient(GradientArgs),
}

#[derive(Args)]
pub struct BenchArgs {
    /// JSON config; fields left out take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "bench-out")]
    pub out: PathBuf,
    /// Override `n_trials`.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Print the default config and exit.
    #[arg(long)]
    pub print_default_config: bool,
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Args)]
pub struct RastriginArgs {
    #[arg(long, default_value = "rastrigin-out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.012)]
    pub step: f64,
    #[arg(long, default_value_t = 300)]
    pub steps: usize,
    /// Points per axis of the contour grids.
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
}

#[derive(Args)]
struct LinearCheckArgs {
    #[arg(long, default_value_t = 5)]
    dims: usize,
    #[arg(long, default_value_t = 100)]
    seeds: usize,
    #[arg(long, default_value_t = 16)]
    ensemble_size: usize,
    /// Drop the `x` term (`A = 0`).
    #[arg(long)]
    zero_a: bool,
    #[arg(long, hide = true)]
    flip_correction_sign: bool,
}

#[derive(Args)]
pub struct GradientArgs {
    #[arg(long)]
    pub ensemble_u: PathBuf,
    #[arg(long)]
    pub ensemble_x: Option<PathBuf>,
    /// Precomputed objective values (headerless CSV).
    #[arg(long, conflicts_with = "objective", required_unless_present = "objective")]
    pub values: Option<PathBuf>,
    /// Built-in objective: `hermite<k>` or `rastrigin`.
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long)]
    pub estimator: ensgrad::EstimatorKind,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Row of `ℓ(x_n, μ)` for `stosag` and `one_sided`.
    #[arg(long)]
    pub mean_values: Option<PathBuf>,
    /// Pool of control members for the group and two-sided estimators.
    #[arg(long)]
    pub subsamples: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub subsample_size: usize,
    #[arg(long)]
    pub precondition: bool,
}

/// An error with the exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Self {
            code: 1,
            error: e.into(),
        }
    }
}

fn linear_check(args: &LinearCheckArgs) -> Result<ExitCode, Failure> {
    let cfg = ensgrad::harness::LinearCheckConfig {
        dims: args.dims,
        seeds: args.seeds,
        ensemble_size: args.ensemble_size,
        zero_a: args.zero_a,
        flip_correction_sign: args.flip_correction_sign,
        ..Default::default()
    };
    let results = ensgrad::harness::run_linear_check(&cfg).map_err(Failure::usage)?;
    let mut ok = true;
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        ok &= r.passed;
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Bench(a) => bench::run(a),
        Command::Rastrigin(a) => rastrigin::run(a),
        Command::LinearCheck(a) => linear_check(a),
        Command::Gradient(a) => gradient::run(a),
    };
    match res {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
