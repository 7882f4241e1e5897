//! Control-variate arithmetic: subtracting a zero-mean `b` correlated
//! with `a` changes the variance by the relative amount `r(2ρ − r)`,
//! where `ρ` is the correlation and `r² = Var(b)/Var(a)`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::stream;

/// Predicted relative variance improvement `[Var a − Var(a − b)] / Var a`.
pub fn predicted_improvement(rho: f64, r: f64) -> f64 {
    r * (2.0 * rho - r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceReduction {
    pub rho: f64,
    pub r: f64,
    pub predicted: f64,
    pub measured: f64,
}

impl VarianceReduction {
    pub fn relative_error(&self) -> f64 {
        (self.measured - self.predicted).abs() / self.predicted.abs()
    }
}

/// Measures the improvement on `a = z₁`, `b = r(ρ z₁ + √(1 − ρ²) z₂)`
/// with sample variances over `samples` draws.
pub fn measure_variance_reduction(rho: f64, r: f64, samples: usize, seed: u64) -> VarianceReduction {
    let mut g = stream(seed);
    let c = (1.0 - rho * rho).sqrt();
    let (mut sa, mut saa, mut sd, mut sdd) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..samples {
        let z1: f64 = g.sample(StandardNormal);
        let z2: f64 = g.sample(StandardNormal);
        let a = z1;
        let b = r * (rho * z1 + c * z2);
        let diff = a - b;
        sa += a;
        saa += a * a;
        sd += diff;
        sdd += diff * diff;
    }
    let n = samples as f64;
    let var = |s: f64, ss: f64| (ss - s * s / n) / (n - 1.0);
    let (va, vd) = (var(sa, saa), var(sd, sdd));
    VarianceReduction {
        rho,
        r,
        predicted: predicted_improvement(rho, r),
        measured: (va - vd) / va,
    }
}
