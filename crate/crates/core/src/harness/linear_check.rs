//! Verification suite on the bilinear objective `ℓ = 1ᵀ(A·x + B·u)`,
//! whose gradient in `u` is the constant `1ᵀB`.

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::Rng;

use crate::error::Result;
use crate::estimators::{estimate, EstimatorKind, EstimatorSpec, Inputs, PrepareOptions};
use crate::linalg::{tikhonov_pinv, PinvConfig};
use crate::objectives::BilinearObjective;
use crate::rng::{child_seed, stream};
use crate::sampling::{draw_ensemble, recenter, GaussianSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearCheckConfig {
    pub dims: usize,
    pub seeds: usize,
    pub ensemble_size: usize,
    pub base_seed: u64,
    /// Use `A = 0`, removing all dependence on `x`.
    pub zero_a: bool,
    /// Sabotage the StoSAG correction, to confirm the suite can fail.
    pub flip_correction_sign: bool,
}

impl Default for LinearCheckConfig {
    fn default() -> Self {
        Self {
            dims: 5,
            seeds: 100,
            ensemble_size: 16,
            base_seed: 7,
            zero_a: false,
            flip_correction_sign: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

struct MaxError {
    name: &'static str,
    tol: f64,
    worst: f64,
}

impl MaxError {
    fn new(name: &'static str, tol: f64) -> Self {
        Self { name, tol, worst: 0.0 }
    }

    fn update(&mut self, err: f64) {
        // NaN counts as a failure
        if !(err <= self.worst) {
            self.worst = err;
        }
    }

    fn result(&self) -> CheckResult {
        CheckResult {
            name: self.name.into(),
            passed: self.worst <= self.tol,
            detail: format!("max error {:.3e} (tolerance {:.0e})", self.worst, self.tol),
        }
    }
}

/// Mean of preconditioned estimates against `1ᵀB·C_u`, per dimension.
struct MeanBand {
    name: &'static str,
    sum: DVector<f64>,
    sum_sq: DVector<f64>,
    count: usize,
}

impl MeanBand {
    fn new(name: &'static str, d: usize) -> Self {
        Self {
            name,
            sum: DVector::zeros(d),
            sum_sq: DVector::zeros(d),
            count: 0,
        }
    }

    fn push(&mut self, dev: &RowDVector<f64>) {
        for i in 0..dev.len() {
            self.sum[i] += dev[i];
            self.sum_sq[i] += dev[i] * dev[i];
        }
        self.count += 1;
    }

    fn result(&self) -> CheckResult {
        let n = self.count as f64;
        let mut worst: f64 = 0.0;
        for i in 0..self.sum.len() {
            let mean = self.sum[i] / n;
            let var = (self.sum_sq[i] / n - mean * mean) * n / (n - 1.0);
            let se = (var / n).sqrt();
            let z = if se > 0.0 {
                mean.abs() / se
            } else if mean == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        }
        CheckResult {
            name: self.name.into(),
            passed: worst <= 3.0,
            detail: format!("largest deviation {worst:.2} standard errors (limit 3)"),
        }
    }
}

/// Runs every identity over `cfg.seeds` random `(A, B, X, U)` draws.
pub fn run_linear_check(cfg: &LinearCheckConfig) -> Result<Vec<CheckResult>> {
    let d = cfg.dims;
    let n = cfg.ensemble_size;
    let x_mean = DVector::from_fn(d, |i, _| {
        if d > 1 {
            -2.0 + 4.0 * i as f64 / (d - 1) as f64
        } else {
            0.0
        }
    });
    let x_spec = GaussianSpec::isotropic(x_mean, 0.25)?;
    let u_spec = GaussianSpec::isotropic(DVector::zeros(d), 0.01)?;
    let c_u = u_spec.covariance();
    let options = PrepareOptions {
        flip_correction_sign: cfg.flip_correction_sign,
        ..PrepareOptions::default()
    };

    let mut stosag = MaxError::new("stosag_exact", 1e-8);
    let mut paired = MaxError::new(
        if cfg.zero_a {
            "paired_exact"
        } else {
            "paired_error_formula"
        },
        1e-8,
    );
    let mut decorr = MaxError::new("decorr_eliminates_error", 1e-6);
    let mut others = MaxError::new("consistent_estimators_exact", 1e-8);
    let mut one_sided = MaxError::new("one_sided_equals_stosag", 1e-12);
    let mut paired_mean = MeanBand::new("paired_preconditioned_unbiased", d);
    let mut stosag_mean = MeanBand::new("stosag_preconditioned_unbiased", d);

    for s in 0..cfg.seeds as u64 {
        let seed = child_seed(cfg.base_seed, s);
        let mut r = stream(child_seed(seed, 0));
        let a = if cfg.zero_a {
            DMatrix::zeros(d, d)
        } else {
            DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0))
        };
        let b = DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0));
        let obj = BilinearObjective::<f64>::new(a, b)?;
        let x = draw_ensemble(&x_spec, n, child_seed(seed, 1))?;
        let u = recenter(&draw_ensemble(&u_spec, n, child_seed(seed, 2))?)?;
        let pool = recenter(&draw_ensemble(&u_spec, 2 * n, child_seed(seed, 3))?)?;
        let inputs = Inputs::new(&x, &u).with_subsamples(&pool);
        let truth = obj.gradient();
        let scale = truth.amax().max(1.0);
        let run = |kind: EstimatorKind, pre: bool| {
            estimate(
                &obj,
                &inputs,
                &EstimatorSpec::new(kind).with_options(options).preconditioned(pre),
            )
        };

        let st = run(EstimatorKind::Stosag, false)?;
        stosag.update((&st.grad - truth).amax() / scale);
        let os = run(EstimatorKind::OneSided, false)?;
        one_sided.update((&os.grad - &st.grad).amax() / scale);

        let pa = run(EstimatorKind::Paired, false)?;
        let predicted = obj.a_sum() * x.members() * tikhonov_pinv(&u.anomalies(), PinvConfig::moore_penrose());
        paired.update((&pa.grad - truth - predicted).amax() / scale);

        let de = run(EstimatorKind::Decorr, false)?;
        decorr.update((&de.grad - truth).amax() / scale);

        for kind in [
            EstimatorKind::PlainLls,
            EstimatorKind::Fragile,
            EstimatorKind::GenStosag,
            EstimatorKind::TwoSided,
            EstimatorKind::Mirrored2s,
            EstimatorKind::AvgGrad,
        ] {
            others.update((&run(kind, false)?.grad - truth).amax() / scale);
        }

        let target = truth * &c_u;
        paired_mean.push(&(run(EstimatorKind::Paired, true)?.grad - &target));
        stosag_mean.push(&(run(EstimatorKind::Stosag, true)?.grad - &target));
    }

    Ok(vec![
        stosag.result(),
        paired.result(),
        decorr.result(),
        one_sided.result(),
        others.result(),
        paired_mean.result(),
        stosag_mean.result(),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let res = run_linear_check(&LinearCheckConfig::default()).unwrap();
        for r in &res {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn paired_is_exact_without_x_dependence() {
        let cfg = LinearCheckConfig {
            zero_a: true,
            seeds: 20,
            ..LinearCheckConfig::default()
        };
        let res = run_linear_check(&cfg).unwrap();
        let p = res.iter().find(|r| r.name == "paired_exact").unwrap();
        assert!(p.passed, "{}", p.detail);
    }

    #[test]
    fn sign_mutation_is_caught() {
        let cfg = LinearCheckConfig {
            flip_correction_sign: true,
            seeds: 20,
            ..LinearCheckConfig::default()
        };
        let res = run_linear_check(&cfg).unwrap();
        assert!(!res.iter().find(|r| r.name == "stosag_exact").unwrap().passed);
    }
}
