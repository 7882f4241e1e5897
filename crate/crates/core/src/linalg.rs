//! Centring, covariance estimation and regularised pseudo-inversion.
//!
//! Ensembles are stored as `d × N` matrices whose columns are members.
//! Row vectors (objective values, gradient estimates) are `1 × N` or
//! `1 × d` matrices so that products read left to right like the
//! estimator formulas: `values · anomalies⁺`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative cutoff below which singular values are treated as zero.
pub const RANK_RTOL: f64 = 1e-12;

/// Tikhonov regularisation of the pseudo-inverse.
///
/// `lambda` is relative to the largest singular value: each reciprocal
/// `1/s` is replaced by `s / (s² + (λ·s₁)²)`. `lambda = 0` is the plain
/// Moore-Penrose inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinvConfig<T> {
    lambda: T,
}

impl<T: Real> PinvConfig<T> {
    pub fn new(lambda: T) -> Result<Self> {
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(Error::Invalid(format!(
                "Tikhonov lambda must be finite and non-negative, got {lambda:?}"
            )));
        }
        Ok(Self { lambda })
    }

    pub fn moore_penrose() -> Self {
        Self { lambda: T::zero() }
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Damped reciprocal of a singular value, given the largest one.
    #[inline]
    pub fn damp(&self, s: T, s_max: T) -> T {
        if s_max <= T::zero() || s < T::lit(RANK_RTOL) * s_max {
            return T::zero();
        }
        let shift = self.lambda * s_max;
        s / (s * s + shift * shift)
    }

    /// Damped reciprocal of a squared singular value (covariance eigenvalue).
    #[inline]
    fn damp_squared(&self, s: T, s_max: T) -> T {
        if s_max <= T::zero() || s < T::lit(RANK_RTOL) * s_max {
            return T::zero();
        }
        let shift = self.lambda * s_max;
        T::one() / (s * s + shift * shift)
    }
}

impl<T: Real> Default for PinvConfig<T> {
    fn default() -> Self {
        Self::moore_penrose()
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> Default for CompensatedSum<T> {
    fn default() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }
}

impl<T: Real> CompensatedSum<T> {
    #[inline]
    pub fn add(&mut self, value: T) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.carry);
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

impl<T: Real> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::default();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

pub(crate) fn compensated_dot<T: Real>(a: impl IntoIterator<Item = T>, b: impl IntoIterator<Item = T>) -> T {
    a.into_iter()
        .zip(b)
        .map(|(x, y)| x * y)
        .collect::<CompensatedSum<T>>()
        .value()
}

/// Column `j` of a column-major matrix as a slice.
#[inline]
pub fn column<T: Real>(m: &DMatrix<T>, j: usize) -> &[T] {
    let d = m.nrows();
    &m.as_slice()[j * d..(j + 1) * d]
}

/// Row-wise sample mean of the columns.
pub fn column_mean<T: Real>(m: &DMatrix<T>) -> Result<DVector<T>> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return Err(Error::dims("column mean", "non-empty matrix", shape(m)));
    }
    let n = T::from_count(m.ncols());
    Ok(DVector::from_iterator(
        m.nrows(),
        m.row_iter()
            .map(|row| row.iter().copied().collect::<CompensatedSum<T>>().value() / n),
    ))
}

/// Subtracts the sample mean from every column.
///
/// Returns `(anomalies, mean)`.
pub fn center_columns<T: Real>(m: &DMatrix<T>) -> Result<(DMatrix<T>, DVector<T>)> {
    let mean = column_mean(m)?;
    let mut anomalies = m.clone();
    for mut col in anomalies.column_iter_mut() {
        col -= &mean;
    }
    Ok((anomalies, mean))
}

/// Thin singular value decomposition `A = U · diag(s) · Vᵀ`.
///
/// `U` is `m × k`, `V` is `n × k` with `k = min(m, n)`; singular values
/// are sorted in decreasing order. Columns of `U` belonging to zero
/// singular values are zero.
#[derive(Debug, Clone)]
pub struct ThinSvd<T: Real> {
    pub u: DMatrix<T>,
    pub s: DVector<T>,
    pub v: DMatrix<T>,
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD.
///
/// Slower than bidiagonalisation for large inputs but accurate on the
/// small, often rank-deficient anomaly matrices met here.
pub fn thin_svd<T: Real>(a: &DMatrix<T>) -> ThinSvd<T> {
    let (m, n) = a.shape();
    if m < n {
        let t = thin_svd(&a.transpose());
        return ThinSvd { u: t.v, s: t.s, v: t.u };
    }
    let mut w = a.clone();
    let mut v = DMatrix::<T>::identity(n, n);
    let eps = T::default_epsilon();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for i in 0..m {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if alpha == T::zero() || beta == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * x - s * y;
                    w[(i, q)] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<T> = w.column_iter().map(|c| c.norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));
    let s = DVector::from_iterator(n, order.iter().map(|&j| norms[j]));
    let u = DMatrix::from_fn(m, n, |i, k| {
        let j = order[k];
        if norms[j] > T::zero() {
            w[(i, j)] / norms[j]
        } else {
            T::zero()
        }
    });
    let v = DMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    ThinSvd { u, s, v }
}

/// Tikhonov-regularised pseudo-inverse via the SVD.
///
/// A zero matrix maps to the zero matrix of transposed shape.
pub fn tikhonov_pinv<T: Real>(a: &DMatrix<T>, cfg: PinvConfig<T>) -> DMatrix<T> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let ThinSvd { u, s, mut v } = thin_svd(a);
    let s_max = s.max();
    let damped = DVector::from_iterator(s.len(), s.iter().map(|&si| cfg.damp(si, s_max)));
    // V · diag(damped) · Uᵀ
    for (j, mut col) in v.column_iter_mut().enumerate() {
        col *= damped[j];
    }
    v * u.transpose()
}

/// Unbiased sample cross-covariance `F · Ũᵀ / (N − 1)`.
///
/// `F` is not centred: the anomalies sum to zero, so any constant offset
/// in `F` cancels.
pub fn sample_cross_cov<T: Real>(f: &DMatrix<T>, anomalies: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = anomalies.ncols();
    if f.ncols() != n {
        return Err(Error::dims("sample_cross_cov", format!("{n} columns"), shape(f)));
    }
    if n < 2 {
        return Err(Error::InsufficientSamples {
            context: "sample_cross_cov",
            required: 2,
            found: n,
        });
    }
    let scale = T::from_count(n - 1);
    Ok(DMatrix::from_fn(f.nrows(), anomalies.nrows(), |i, j| {
        compensated_dot(f.row(i).iter().copied(), anomalies.row(j).iter().copied()) / scale
    }))
}

/// Cross-covariance about a known mean, `(1/N) Σ f_n (u_n − μ)ᵀ`.
pub fn uncentred_cross_cov<T: Real>(f: &DMatrix<T>, u: &DMatrix<T>, mu: &DVector<T>) -> Result<DMatrix<T>> {
    let n = u.ncols();
    if n == 0 {
        return Err(Error::InsufficientSamples {
            context: "uncentred_cross_cov",
            required: 1,
            found: 0,
        });
    }
    if f.ncols() != n {
        return Err(Error::dims("uncentred_cross_cov", format!("{n} columns"), shape(f)));
    }
    if mu.len() != u.nrows() {
        return Err(Error::dims("uncentred_cross_cov mean", u.nrows(), mu.len()));
    }
    let scale = T::from_count(n);
    Ok(DMatrix::from_fn(f.nrows(), u.nrows(), |i, j| {
        compensated_dot(f.row(i).iter().copied(), u.row(j).iter().map(|&x| x - mu[j])) / scale
    }))
}

/// Linear least-squares coefficients `F · Ũ⁺`.
pub fn lls_gradient<T: Real>(f: &DMatrix<T>, anomalies: &DMatrix<T>, cfg: PinvConfig<T>) -> Result<DMatrix<T>> {
    Ok(LlsSystem::new(f, anomalies)?.solve(cfg))
}

/// `F · A⁺` with the SVD of `A` factored once, so that many values of
/// the regularisation parameter can be tried cheaply.
#[derive(Debug, Clone)]
pub struct LlsSystem<T: Real> {
    /// `F · Q` where `A = P · diag(s) · Qᵀ`.
    projected: DMatrix<T>,
    singular: DVector<T>,
    /// `P`, one column per singular value.
    left: DMatrix<T>,
}

impl<T: Real> LlsSystem<T> {
    pub fn new(f: &DMatrix<T>, a: &DMatrix<T>) -> Result<Self> {
        if f.ncols() != a.ncols() {
            return Err(Error::dims(
                "regression",
                format!("{} value columns", a.ncols()),
                shape(f),
            ));
        }
        let (d, n) = a.shape();
        if d == 0 || n == 0 {
            return Ok(Self {
                projected: DMatrix::zeros(f.nrows(), 0),
                singular: DVector::zeros(0),
                left: DMatrix::zeros(d, 0),
            });
        }
        let ThinSvd { u, s, v } = thin_svd(a);
        Ok(Self {
            projected: f * v,
            singular: s,
            left: u,
        })
    }

    pub fn singular_values(&self) -> &DVector<T> {
        &self.singular
    }

    pub fn solve(&self, cfg: PinvConfig<T>) -> DMatrix<T> {
        let s_max = if self.singular.is_empty() {
            T::zero()
        } else {
            self.singular.max()
        };
        let mut scaled = self.projected.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= cfg.damp(self.singular[j], s_max);
        }
        scaled * self.left.transpose()
    }
}

/// `c · C⁺` for a covariance `C = S·Sᵀ` given through its square-root
/// factor `S`.
///
/// Regularisation acts on the singular values of `S`, so that
/// `c · (S·Sᵀ)⁺` with `c = F·Sᵀ` equals `F · S⁺` at every `λ`.
#[derive(Debug, Clone)]
pub struct CovarianceSystem<T: Real> {
    projected: DMatrix<T>,
    singular: DVector<T>,
    left: DMatrix<T>,
}

impl<T: Real> CovarianceSystem<T> {
    pub fn new(cross: &DMatrix<T>, sqrt_factor: &DMatrix<T>) -> Result<Self> {
        let d = sqrt_factor.nrows();
        if cross.ncols() != d {
            return Err(Error::dims("covariance ratio", format!("{d} columns"), shape(cross)));
        }
        if d == 0 || sqrt_factor.ncols() == 0 {
            return Ok(Self {
                projected: DMatrix::zeros(cross.nrows(), 0),
                singular: DVector::zeros(0),
                left: DMatrix::zeros(d, 0),
            });
        }
        let ThinSvd { u, s, .. } = thin_svd(sqrt_factor);
        Ok(Self {
            projected: cross * &u,
            singular: s,
            left: u,
        })
    }

    pub fn solve(&self, cfg: PinvConfig<T>) -> DMatrix<T> {
        let s_max = if self.singular.is_empty() {
            T::zero()
        } else {
            self.singular.max()
        };
        let mut scaled = self.projected.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= cfg.damp_squared(self.singular[j], s_max);
        }
        scaled * self.left.transpose()
    }
}

pub(crate) fn shape<T>(m: &DMatrix<T>) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

/// Frobenius norm, accumulated with compensation.
pub fn frobenius<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().map(|&x| x * x).collect::<CompensatedSum<T>>().value().sqrt()
}
