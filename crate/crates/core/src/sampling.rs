//! Control-variable ensembles: drawing, recentring, mirroring,
//! partitioning and decorrelation.

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{center_columns, column_mean, compensated_dot, shape};
use crate::rng;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance<T: Real> {
    Full(DMatrix<T>),
    /// Diagonal entries (marginal variances).
    Diagonal(DVector<T>),
}

/// Multivariate Gaussian `N(mean, covariance)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec<T: Real> {
    mean: DVector<T>,
    covariance: Covariance<T>,
}

impl<T: Real> GaussianSpec<T> {
    pub fn new(mean: DVector<T>, covariance: DMatrix<T>) -> Result<Self> {
        let d = mean.len();
        if covariance.shape() != (d, d) {
            return Err(Error::dims(
                "Gaussian covariance",
                format!("{d}x{d}"),
                shape(&covariance),
            ));
        }
        let scale = covariance.amax().max(T::lit(1e-30));
        if (&covariance - covariance.transpose()).amax() > T::lit(1e-12) * scale {
            return Err(Error::NotPositiveSemiDefinite);
        }
        psd_cholesky(&covariance)?;
        Ok(Self {
            mean,
            covariance: Covariance::Full(covariance),
        })
    }

    pub fn diagonal(mean: DVector<T>, variances: DVector<T>) -> Result<Self> {
        if variances.len() != mean.len() {
            return Err(Error::dims("Gaussian variances", mean.len(), variances.len()));
        }
        if variances.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
            return Err(Error::NotPositiveSemiDefinite);
        }
        Ok(Self {
            mean,
            covariance: Covariance::Diagonal(variances),
        })
    }

    /// `N(mean, variance · I)`.
    pub fn isotropic(mean: DVector<T>, variance: T) -> Result<Self> {
        let d = mean.len();
        Self::diagonal(mean, DVector::from_element(d, variance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    pub fn covariance(&self) -> DMatrix<T> {
        match &self.covariance {
            Covariance::Full(c) => c.clone(),
            Covariance::Diagonal(v) => DMatrix::from_diagonal(v),
        }
    }

    pub fn marginal_variances(&self) -> DVector<T> {
        match &self.covariance {
            Covariance::Full(c) => c.diagonal(),
            Covariance::Diagonal(v) => v.clone(),
        }
    }

    /// Lower-triangular `L` with `L·Lᵀ = C`.
    pub fn cholesky_factor(&self) -> Result<DMatrix<T>> {
        match &self.covariance {
            Covariance::Full(c) => psd_cholesky(c),
            Covariance::Diagonal(v) => Ok(DMatrix::from_diagonal(&v.map(|x| x.sqrt()))),
        }
    }
}

/// Cholesky factorisation tolerant of zero pivots (semi-definite input).
fn psd_cholesky<T: Real>(c: &DMatrix<T>) -> Result<DMatrix<T>> {
    let d = c.nrows();
    let scale = (0..d).map(|i| c[(i, i)].abs()).fold(T::zero(), |a, b| a.max(b));
    let tol = T::lit(1e-12) * scale;
    let off_tol = T::lit(1e-8) * scale;
    let mut l = DMatrix::<T>::zeros(d, d);
    for j in 0..d {
        let pivot = c[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).fold(T::zero(), |a, b| a + b);
        if pivot < -tol || !pivot.is_finite() {
            return Err(Error::NotPositiveSemiDefinite);
        }
        if pivot <= tol {
            for i in j + 1..d {
                let r = c[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).fold(T::zero(), |a, b| a + b);
                if r.abs() > off_tol {
                    return Err(Error::NotPositiveSemiDefinite);
                }
            }
            continue;
        }
        let root = pivot.sqrt();
        l[(j, j)] = root;
        for i in j + 1..d {
            let r = c[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).fold(T::zero(), |a, b| a + b);
            l[(i, j)] = r / root;
        }
    }
    Ok(l)
}

/// `d × N` ensemble with a known true mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T: Real> {
    members: DMatrix<T>,
    true_mean: DVector<T>,
    recentred: bool,
}

impl<T: Real> Ensemble<T> {
    pub fn new(members: DMatrix<T>, true_mean: DVector<T>) -> Result<Self> {
        if members.nrows() != true_mean.len() {
            return Err(Error::dims("ensemble mean", members.nrows(), true_mean.len()));
        }
        if members.ncols() == 0 {
            return Err(Error::InsufficientSamples {
                context: "ensemble",
                required: 1,
                found: 0,
            });
        }
        if members.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("ensemble members"));
        }
        Ok(Self {
            members,
            true_mean,
            recentred: false,
        })
    }

    /// Ensemble whose true mean is taken to be its sample mean.
    pub fn from_members(members: DMatrix<T>) -> Result<Self> {
        let mean = column_mean(&members)?;
        let mut e = Self::new(members, mean)?;
        e.recentred = true;
        Ok(e)
    }

    pub fn dim(&self) -> usize {
        self.members.nrows()
    }

    pub fn size(&self) -> usize {
        self.members.ncols()
    }

    pub fn members(&self) -> &DMatrix<T> {
        &self.members
    }

    pub fn member(&self, n: usize) -> &[T] {
        crate::linalg::column(&self.members, n)
    }

    pub fn true_mean(&self) -> &DVector<T> {
        &self.true_mean
    }

    pub fn is_recentred(&self) -> bool {
        self.recentred
    }

    pub fn sample_mean(&self) -> DVector<T> {
        column_mean(&self.members).expect("ensemble is non-empty")
    }

    /// Members minus their sample mean.
    pub fn anomalies(&self) -> DMatrix<T> {
        center_columns(&self.members).expect("ensemble is non-empty").0
    }

    pub fn into_members(self) -> DMatrix<T> {
        self.members
    }
}

/// Draws `n` i.i.d. members from `spec` using the stream for `seed`.
pub fn draw_ensemble<T: Real>(spec: &GaussianSpec<T>, n: usize, seed: u64) -> Result<Ensemble<T>> {
    if n == 0 {
        return Err(Error::InsufficientSamples {
            context: "draw_ensemble",
            required: 1,
            found: 0,
        });
    }
    let factor = spec.cholesky_factor()?;
    let d = spec.dim();
    let mut rng = rng::stream(seed);
    let z = DMatrix::from_fn(d, n, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)));
    let mut members = factor * z;
    for mut col in members.column_iter_mut() {
        col += spec.mean();
    }
    Ensemble::new(members, spec.mean().clone())
}

/// Shifts the members so that their sample mean equals the true mean.
pub fn recenter<T: Real>(e: &Ensemble<T>) -> Result<Ensemble<T>> {
    if e.size() < 2 {
        return Err(Error::InsufficientSamples {
            context: "recenter",
            required: 2,
            found: e.size(),
        });
    }
    let (mut members, _) = center_columns(&e.members)?;
    for mut col in members.column_iter_mut() {
        col += &e.true_mean;
    }
    Ok(Ensemble {
        members,
        true_mean: e.true_mean.clone(),
        recentred: true,
    })
}

/// Antithetic pair: `W` is `V` reflected about the true mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MirroredPair<T: Real> {
    pub v: DMatrix<T>,
    pub w: DMatrix<T>,
    mean: DVector<T>,
}

impl<T: Real> MirroredPair<T> {
    /// All `2M` members, `V` first.
    pub fn pooled(&self) -> Ensemble<T> {
        let m = self.v.ncols();
        let d = self.v.nrows();
        let mut members = DMatrix::zeros(d, 2 * m);
        members.columns_mut(0, m).copy_from(&self.v);
        members.columns_mut(m, m).copy_from(&self.w);
        Ensemble {
            members,
            true_mean: self.mean.clone(),
            recentred: true,
        }
    }

    /// Covariance of the pooled members about the mean with the factor
    /// `1/2` for the mirrored half: `Σ (u − μ)(u − μ)ᵀ / (2M)`.
    pub fn pooled_covariance(&self) -> DMatrix<T> {
        let pooled = self.pooled();
        let mut dev = pooled.members;
        for mut col in dev.column_iter_mut() {
            col -= &self.mean;
        }
        &dev * dev.transpose() / T::from_count(dev.ncols())
    }
}

/// Mirrors an ensemble about its true mean: `W = 2μ1ᵀ − V`.
///
/// For a recentred ensemble `V − W = 2Ũ`.
pub fn mirror<T: Real>(e: &Ensemble<T>) -> MirroredPair<T> {
    let v = e.members.clone();
    let mut w = -&v;
    for mut col in w.column_iter_mut() {
        col += &e.true_mean * T::lit(2.0);
    }
    MirroredPair {
        v,
        w,
        mean: e.true_mean.clone(),
    }
}

fn check_sizes<T: Real>(e: &Ensemble<T>, sizes: &[usize]) -> Result<()> {
    let total: usize = sizes.iter().sum();
    if total != e.size() {
        return Err(Error::dims("partition sizes", e.size(), total));
    }
    if let Some(&small) = sizes.iter().find(|&&s| s < 2) {
        return Err(Error::InsufficientSamples {
            context: "partition group",
            required: 2,
            found: small,
        });
    }
    Ok(())
}

/// Splits consecutive columns into groups of the given sizes, recentring
/// each group to the true mean.
pub fn partition<T: Real>(e: &Ensemble<T>, sizes: &[usize]) -> Result<Vec<Ensemble<T>>> {
    split(e, sizes)?.iter().map(recenter).collect()
}

/// Splits consecutive columns into groups without shifting any member.
pub fn split<T: Real>(e: &Ensemble<T>, sizes: &[usize]) -> Result<Vec<Ensemble<T>>> {
    check_sizes(e, sizes)?;
    let mut start = 0;
    let mut groups = Vec::with_capacity(sizes.len());
    for &s in sizes {
        groups.push(Ensemble {
            members: e.members.columns(start, s).into_owned(),
            true_mean: e.true_mean.clone(),
            recentred: false,
        });
        start += s;
    }
    Ok(groups)
}

/// Outcome flag of [`decorrelate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecorrelationStatus {
    Applied,
    /// The baseline row was zero; the ensemble is returned unchanged.
    ZeroBaseline,
    /// At least one control dimension lost all its variance in the
    /// projection and could not be rescaled.
    RankCollapsed,
}

#[derive(Debug, Clone)]
pub struct Decorrelated<T: Real> {
    pub ensemble: Ensemble<T>,
    pub status: DecorrelationStatus,
}

/// Projects every control row orthogonally to the centred baseline `ψ`,
/// rescales each row back to its original sample variance and recentres
/// the result to the true mean (rescale first, then recentre).
pub fn decorrelate<T: Real>(e: &Ensemble<T>, psi: &RowDVector<T>) -> Result<Decorrelated<T>> {
    let n = e.size();
    if psi.len() != n {
        return Err(Error::dims("decorrelation baseline", n, psi.len()));
    }
    if n < 2 {
        return Err(Error::InsufficientSamples {
            context: "decorrelate",
            required: 2,
            found: n,
        });
    }
    let psi_mean = psi.mean();
    let psi = psi.map(|x| x - psi_mean);
    let psi_norm2 = compensated_dot(psi.iter().copied(), psi.iter().copied());
    let psi_scale = psi.amax();
    if psi_norm2 <= T::zero() || psi_scale <= T::zero() {
        return Ok(Decorrelated {
            ensemble: e.clone(),
            status: DecorrelationStatus::ZeroBaseline,
        });
    }

    let anomalies = e.anomalies();
    let mut projected = anomalies.clone();
    let mut status = DecorrelationStatus::Applied;
    for (i, mut row) in projected.row_iter_mut().enumerate() {
        let original = anomalies.row(i);
        let coef = compensated_dot(original.iter().copied(), psi.iter().copied()) / psi_norm2;
        for (r, &p) in row.iter_mut().zip(psi.iter()) {
            *r -= coef * p;
        }
        let var_before = compensated_dot(original.iter().copied(), original.iter().copied());
        let var_after = compensated_dot(row.iter().copied(), row.iter().copied());
        if var_before <= T::zero() {
            continue;
        }
        if var_after <= T::lit(1e-24) * var_before {
            status = DecorrelationStatus::RankCollapsed;
            row.fill(T::zero());
            continue;
        }
        row *= (var_before / var_after).sqrt();
    }
    for mut col in projected.column_iter_mut() {
        col += &e.true_mean;
    }
    Ok(Decorrelated {
        ensemble: Ensemble {
            members: projected,
            true_mean: e.true_mean.clone(),
            recentred: true,
        },
        status,
    })
}
