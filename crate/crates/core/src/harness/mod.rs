//! Monte-Carlo benchmark of the estimators on the Hermite objective,
//! the bilinear verification suite, and the Rastrigin descent demo.

pub mod bench;
pub mod config;
pub mod descent;
pub mod linear_check;
pub mod output;
pub mod stats;
pub mod variance;

pub use bench::{run_bench, run_trial, TrialOutcome};
pub use config::{BenchConfig, SelectionMetric, TruthMode};
pub use descent::{steepest_descent, DescentConfig, RastriginDemo, Trajectory};
pub use linear_check::{run_linear_check, CheckResult, LinearCheckConfig};
pub use stats::{aggregate, bootstrap_bands, select_best_lambda, Band, ResultRow, TrialStats};
