use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{AvgGradMode, EstimatorKind, PrepareOptions};
use crate::objectives::hermite::MAX_ORDER;
use crate::sampling::GaussianSpec;

/// Estimation target for the Hermite benchmark.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthMode {
    /// `E_u ∇L(u)` for the `x` ensemble drawn in the trial.
    #[default]
    Conditional,
    /// `E_{x,u} ∇ℓ(x, u)` over the `x` distribution.
    Distributional,
}

/// Metric minimised when picking the best regularisation per estimator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    #[default]
    Rmse,
    Bias,
}

/// Monte-Carlo benchmark configuration.
///
/// Every field has a default, so a JSON document only needs to list the
/// fields it changes. Unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub base_seed: u64,
    pub n_trials: usize,
    pub dims: usize,
    pub hermite_orders: Vec<usize>,
    pub ensemble_sizes: Vec<usize>,
    pub lambda_grid: Vec<f64>,
    pub estimators: Vec<EstimatorKind>,
    /// Mean of the control distribution (length `dims`).
    pub u_mean: Vec<f64>,
    /// Variance of each control, `C_u = u_variance · I`.
    pub u_variance: f64,
    pub x_mean: Vec<f64>,
    pub x_variance: f64,
    /// Group size `N_m` for `average_lls`, `gen_stosag` and `hybrid`.
    pub subsample_size: usize,
    pub precondition: bool,
    pub truth: TruthMode,
    pub avg_grad_mode: AvgGradMode,
    /// Give `plain_lls`, `fragile` and `avg_grad` their own `x` ensemble
    /// of this size instead of sharing the `M = N` one.
    pub unpaired_x_members: Option<usize>,
    pub charge_cached: bool,
    /// Trials per work unit; also the block length of the bootstrap.
    pub block_size: usize,
    pub bootstrap_resamples: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            base_seed: 20_240_601,
            n_trials: 10_000,
            dims: 5,
            hermite_orders: (0..=MAX_ORDER).collect(),
            ensemble_sizes: vec![3, 4, 5, 6, 8, 10, 15, 20, 30, 50, 100],
            lambda_grid: vec![0.0, 1e-4, 1e-3, 1e-2, 3e-2, 1e-1, 3e-1],
            estimators: EstimatorKind::ALL.to_vec(),
            u_mean: vec![0.0; 5],
            u_variance: 0.01,
            x_mean: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            x_variance: 0.25,
            subsample_size: 2,
            precondition: false,
            truth: TruthMode::Conditional,
            avg_grad_mode: AvgGradMode::Nested,
            unpaired_x_members: None,
            charge_cached: false,
            block_size: 100,
            bootstrap_resamples: 200,
        }
    }
}

impl BenchConfig {
    /// Parses JSON and validates; errors name the offending line or field.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::Invalid(format!("config line {}, column {}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Invalid(format!("field `{field}`: {msg}")));
        if self.n_trials < 2 {
            return bad("n_trials", format!("must be at least 2, got {}", self.n_trials));
        }
        if self.dims == 0 {
            return bad("dims", "must be positive".into());
        }
        if let Some(&o) = self.hermite_orders.iter().find(|&&o| o > MAX_ORDER) {
            return bad("hermite_orders", format!("order {o} outside 0..={MAX_ORDER}"));
        }
        if self.hermite_orders.is_empty() {
            return bad("hermite_orders", "must not be empty".into());
        }
        if self.ensemble_sizes.is_empty() {
            return bad("ensemble_sizes", "must not be empty".into());
        }
        if let Some(&n) = self.ensemble_sizes.iter().find(|&&n| n < 2) {
            return bad("ensemble_sizes", format!("every N must be at least 2, got {n}"));
        }
        if self.lambda_grid.is_empty() {
            return bad("lambda_grid", "must not be empty".into());
        }
        if let Some(l) = self.lambda_grid.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return bad(
                "lambda_grid",
                format!("values must be finite and non-negative, got {l}"),
            );
        }
        if self.estimators.is_empty() {
            return bad("estimators", "must not be empty".into());
        }
        if self.u_mean.len() != self.dims {
            return bad(
                "u_mean",
                format!("length {} does not match dims = {}", self.u_mean.len(), self.dims),
            );
        }
        if self.x_mean.len() != self.dims {
            return bad(
                "x_mean",
                format!("length {} does not match dims = {}", self.x_mean.len(), self.dims),
            );
        }
        if !(self.u_variance > 0.0) || !self.u_variance.is_finite() {
            return bad("u_variance", "must be positive".into());
        }
        if !(self.x_variance >= 0.0) || !self.x_variance.is_finite() {
            return bad("x_variance", "must be non-negative".into());
        }
        if self.subsample_size < 2 {
            return bad("subsample_size", "must be at least 2".into());
        }
        if self.unpaired_x_members == Some(0) {
            return bad("unpaired_x_members", "must be positive".into());
        }
        if self.block_size == 0 {
            return bad("block_size", "must be positive".into());
        }
        Ok(())
    }

    pub fn u_spec(&self) -> Result<GaussianSpec<f64>> {
        GaussianSpec::isotropic(DVector::from_vec(self.u_mean.clone()), self.u_variance)
    }

    pub fn x_spec(&self) -> Result<GaussianSpec<f64>> {
        GaussianSpec::isotropic(DVector::from_vec(self.x_mean.clone()), self.x_variance)
    }

    pub fn prepare_options(&self) -> PrepareOptions {
        PrepareOptions {
            subsample_size: self.subsample_size,
            charge_cached: self.charge_cached,
            avg_grad_mode: self.avg_grad_mode,
            flip_correction_sign: false,
        }
    }
}
