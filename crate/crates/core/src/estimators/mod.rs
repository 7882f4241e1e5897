//! Ensemble gradient estimators behind one interface.
//!
//! Every estimator is built in two steps. [`prepare`] evaluates the
//! objective and factors whatever matrix has to be pseudo-inverted;
//! [`Prepared::solve`] then produces the gradient for a given Tikhonov
//! parameter and preconditioning choice without touching the objective
//! again. [`estimate`] does both at once.
//!
//! Conventions: `X` is `d_x × M`, `U` is `d_u × N`, `μ` is the true mean
//! of `U`, `Ũ` its anomalies. The preconditioned form of a regression
//! `F·Ũ⁺` is `F·Ũᵀ/(N − 1)`, and of a ratio `c·C⁺` it is `c`.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sample_cross_cov, CovarianceSystem, LlsSystem, PinvConfig};
use crate::objectives::Objective;
use crate::sampling::{decorrelate, mirror, split, DecorrelationStatus, Ensemble};
use crate::scalar::Real;

mod kind;

pub use kind::EstimatorKind;

/// How the analytic-gradient baseline averages over the two ensembles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvgGradMode {
    /// `(1/(M·N)) Σ_m Σ_n ∂ℓ/∂u(x_m, u_n)`.
    #[default]
    Nested,
    /// `(1/N) Σ_n ∂ℓ/∂u(x_n, u_n)`; needs `M = N`.
    Paired,
}

/// Options fixed at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepareOptions {
    /// Group size `N_m` for the subsample estimators.
    pub subsample_size: usize,
    /// Count `ℓ(X, μ)` as fresh evaluations instead of cached ones.
    pub charge_cached: bool,
    pub avg_grad_mode: AvgGradMode,
    /// Adds the StoSAG correction instead of subtracting it. Only meant
    /// for checking that the verification suite notices.
    #[doc(hidden)]
    pub flip_correction_sign: bool,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            subsample_size: 2,
            charge_cached: false,
            avg_grad_mode: AvgGradMode::Nested,
            flip_correction_sign: false,
        }
    }
}

/// Estimator choice together with all of its options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSpec<T: Real> {
    pub kind: EstimatorKind,
    pub precondition: bool,
    pub pinv: PinvConfig<T>,
    pub options: PrepareOptions,
}

impl<T: Real> EstimatorSpec<T> {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            precondition: false,
            pinv: PinvConfig::moore_penrose(),
            options: PrepareOptions::default(),
        }
    }

    pub fn with_lambda(mut self, lambda: T) -> Result<Self> {
        self.pinv = PinvConfig::new(lambda)?;
        Ok(self)
    }

    pub fn preconditioned(mut self, on: bool) -> Self {
        self.precondition = on;
        self
    }

    pub fn with_subsample_size(mut self, n_m: usize) -> Self {
        self.options.subsample_size = n_m;
        self
    }

    pub fn with_options(mut self, options: PrepareOptions) -> Self {
        self.options = options;
        self
    }
}

/// A gradient estimate and what it cost.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate<T: Real> {
    pub grad: RowDVector<T>,
    pub estimator: EstimatorKind,
    pub lambda: T,
    pub preconditioned: bool,
    /// Fresh objective (or analytic gradient) evaluations.
    pub evals: usize,
    /// Evaluations of `ℓ(X, μ)` assumed available from the previous
    /// iteration.
    pub cached_evals: usize,
}

/// Ensembles an estimator works on.
#[derive(Debug, Clone, Copy)]
pub struct Inputs<'a, T: Real> {
    /// Uncertain parameters, `d_x × M`.
    pub x: &'a Ensemble<T>,
    /// Controls, `d_u × N`, usually recentred to their true mean.
    pub u: &'a Ensemble<T>,
    /// One group of controls per `x_m`, stored consecutively: the
    /// group estimators read `M` groups of `N_m` members, `two_sided`
    /// reads `M` pairs `(v_m, w_m)`.
    pub subsamples: Option<&'a Ensemble<T>>,
}

impl<'a, T: Real> Inputs<'a, T> {
    pub fn new(x: &'a Ensemble<T>, u: &'a Ensemble<T>) -> Self {
        Self { x, u, subsamples: None }
    }

    pub fn with_subsamples(mut self, s: &'a Ensemble<T>) -> Self {
        self.subsamples = Some(s);
        self
    }
}

#[derive(Debug, Clone)]
enum Form<T: Real> {
    /// `F · A⁺`; `cross` is the preconditioned value.
    Regression {
        system: LlsSystem<T>,
        cross: DMatrix<T>,
    },
    /// `c · C⁺`.
    Ratio {
        system: CovarianceSystem<T>,
        cross: DMatrix<T>,
    },
    /// Mean of two-member group regressions. Each group has a single
    /// non-zero singular value, so Tikhonov damping is the factor
    /// `1/(1 + λ²)` on the Moore-Penrose result.
    PairAverage {
        mp: DMatrix<T>,
        cross: DMatrix<T>,
    },
    /// Mean of general group regressions.
    GroupAverage {
        systems: Vec<LlsSystem<T>>,
        cross: DMatrix<T>,
    },
    Direct {
        grad: DMatrix<T>,
        cross: DMatrix<T>,
    },
}

/// An estimator with all objective evaluations done.
#[derive(Debug, Clone)]
pub struct Prepared<T: Real> {
    kind: EstimatorKind,
    evals: usize,
    cached_evals: usize,
    decorrelation: Option<DecorrelationStatus>,
    form: Form<T>,
}

impl<T: Real> Prepared<T> {
    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn evals(&self) -> usize {
        self.evals
    }

    pub fn cached_evals(&self) -> usize {
        self.cached_evals
    }

    /// Outcome of the decorrelation step, for `decorr`.
    pub fn decorrelation(&self) -> Option<DecorrelationStatus> {
        self.decorrelation
    }

    pub fn solve(&self, pinv: PinvConfig<T>, precondition: bool) -> GradientEstimate<T> {
        let grad = match (&self.form, precondition) {
            (Form::Regression { cross, .. }, true)
            | (Form::Ratio { cross, .. }, true)
            | (Form::PairAverage { cross, .. }, true)
            | (Form::GroupAverage { cross, .. }, true)
            | (Form::Direct { cross, .. }, true) => cross.clone(),
            (Form::Regression { system, .. }, false) => system.solve(pinv),
            (Form::Ratio { system, .. }, false) => system.solve(pinv),
            (Form::PairAverage { mp, .. }, false) => {
                let l = pinv.lambda();
                mp / (T::one() + l * l)
            }
            (Form::GroupAverage { systems, .. }, false) => {
                let mut acc = systems[0].solve(pinv);
                for s in &systems[1..] {
                    acc += s.solve(pinv);
                }
                acc / T::from_count(systems.len())
            }
            (Form::Direct { grad, .. }, false) => grad.clone(),
        };
        GradientEstimate {
            grad: RowDVector::from_iterator(grad.len(), grad.iter().copied()),
            estimator: self.kind,
            lambda: pinv.lambda(),
            preconditioned: precondition,
            evals: self.evals,
            cached_evals: self.cached_evals,
        }
    }
}

/// Evaluates the objective as `kind` requires and factors the result.
pub fn prepare<T: Real, O: Objective<T> + ?Sized>(
    objective: &O,
    kind: EstimatorKind,
    inputs: &Inputs<'_, T>,
    options: &PrepareOptions,
) -> Result<Prepared<T>> {
    let (x, u) = (inputs.x, inputs.u);
    if x.dim() != objective.dim_x() {
        return Err(Error::dims("x ensemble dimension", objective.dim_x(), x.dim()));
    }
    if u.dim() != objective.dim_u() {
        return Err(Error::dims("u ensemble dimension", objective.dim_u(), u.dim()));
    }
    let (m, n) = (x.size(), u.size());
    let paired =
        kind.requires_pairing() || (kind == EstimatorKind::AvgGrad && options.avg_grad_mode == AvgGradMode::Paired);
    if paired && m != n {
        return Err(Error::Precondition {
            estimator: kind.id(),
            requirement: format!("as many x members as u members (M = N), got M = {m}, N = {n}"),
        });
    }

    let mut decorrelation = None;
    let mut cached = 0;
    let (form, evals) = match kind {
        EstimatorKind::PlainLls => {
            let mut f = DMatrix::zeros(1, n);
            for j in 0..n {
                let s: T = (0..m).fold(T::zero(), |acc, i| acc + objective.eval(x.member(i), u.member(j)));
                f[j] = s / T::from_count(m);
            }
            (regression(f, &u.anomalies())?, m * n)
        }
        EstimatorKind::Fragile => {
            let xbar = x.sample_mean();
            let f = DMatrix::from_fn(1, n, |_, j| objective.eval(xbar.as_slice(), u.member(j)));
            (regression(f, &u.anomalies())?, n)
        }
        EstimatorKind::Paired => {
            let f = diagonal_values(objective, x, u);
            (regression(f, &u.anomalies())?, n)
        }
        EstimatorKind::Stosag => {
            let base = baseline(objective, x, u);
            cached = m;
            let f = diagonal_values(objective, x, u);
            let sign = if options.flip_correction_sign {
                -T::one()
            } else {
                T::one()
            };
            let f = DMatrix::from_fn(1, n, |_, j| f[j] - sign * base[j]);
            (regression(f, &u.anomalies())?, n)
        }
        EstimatorKind::OneSided => {
            let base = baseline(objective, x, u);
            cached = m;
            let plus = diagonal_values(objective, x, u);
            let two = T::lit(2.0);
            // ℓ(X, μ − Ũ) replaced by its linear extrapolation 2ℓ(X, μ) − ℓ(X, μ + Ũ)
            let minus = DMatrix::from_fn(1, n, |_, j| two * base[j] - plus[j]);
            let f = (plus - minus) / two;
            (regression(f, &u.anomalies())?, n)
        }
        EstimatorKind::Mirrored2s => {
            let pair = mirror(u);
            let two = T::lit(2.0);
            let f = DMatrix::from_fn(1, n, |_, j| {
                let v = objective.eval(x.member(j), crate::linalg::column(&pair.v, j));
                let w = objective.eval(x.member(j), crate::linalg::column(&pair.w, j));
                (v - w) / two
            });
            (regression(f, &u.anomalies())?, 2 * n)
        }
        EstimatorKind::Decorr => {
            let base = baseline(objective, x, u);
            cached = m;
            let psi = RowDVector::from_iterator(n, base.iter().copied());
            let dec = decorrelate(u, &psi)?;
            decorrelation = Some(dec.status);
            let f = diagonal_values(objective, x, &dec.ensemble);
            (regression(f, &dec.ensemble.anomalies())?, n)
        }
        EstimatorKind::AverageLls | EstimatorKind::GenStosag | EstimatorKind::Hybrid => {
            let n_m = options.subsample_size;
            let groups = groups_for(kind, inputs, n_m)?;
            let values: Vec<DMatrix<T>> = groups
                .iter()
                .enumerate()
                .map(|(i, g)| DMatrix::from_fn(1, g.size(), |_, j| objective.eval(x.member(i), g.member(j))))
                .collect();
            (group_form(kind, &groups, &values)?, m * n_m)
        }
        EstimatorKind::TwoSided => {
            let s = subsamples(kind, inputs, 2)?;
            let d = u.dim();
            let mut diff = DMatrix::zeros(d, m);
            let mut f = DMatrix::zeros(1, m);
            for i in 0..m {
                let (v, w) = (s.member(2 * i), s.member(2 * i + 1));
                let mut zero = true;
                for k in 0..d {
                    diff[(k, i)] = v[k] - w[k];
                    zero &= diff[(k, i)] == T::zero();
                }
                if zero {
                    return Err(Error::DegenerateDifference { index: i });
                }
                f[i] = objective.eval(x.member(i), v) - objective.eval(x.member(i), w);
            }
            // (1/M) Σ_m c̄_m with c̄_m = (ℓ_v − ℓ_w)(v − w)ᵀ/2
            let cross = &f * diff.transpose() / T::from_count(2 * m);
            let system = LlsSystem::new(&f, &diff)?;
            (Form::Regression { system, cross }, 2 * m)
        }
        EstimatorKind::AvgGrad => {
            let d = u.dim();
            let mut acc = RowDVector::<T>::zeros(d);
            let mut count = 0;
            let mut add = |xi: &[T], uj: &[T]| -> Result<()> {
                let g = objective.grad_u(xi, uj).ok_or(Error::Precondition {
                    estimator: "avg_grad",
                    requirement: "an objective with an analytic gradient".into(),
                })?;
                acc += g;
                count += 1;
                Ok(())
            };
            match options.avg_grad_mode {
                AvgGradMode::Nested => {
                    for i in 0..m {
                        for j in 0..n {
                            add(x.member(i), u.member(j))?;
                        }
                    }
                }
                AvgGradMode::Paired => {
                    for j in 0..n {
                        add(x.member(j), u.member(j))?;
                    }
                }
            }
            let grad = DMatrix::from_row_slice(1, d, (acc / T::from_count(count)).as_slice());
            let a = u.anomalies();
            let cross = if n >= 2 {
                &grad * (&a * a.transpose()) / T::from_count(n - 1)
            } else {
                DMatrix::zeros(1, d)
            };
            (Form::Direct { grad, cross }, count)
        }
    };

    let (evals, cached_evals) = if options.charge_cached {
        (evals + cached, 0)
    } else {
        (evals, cached)
    };
    Ok(Prepared {
        kind,
        evals,
        cached_evals,
        decorrelation,
        form,
    })
}

/// Convenience wrapper: [`prepare`] then [`Prepared::solve`].
pub fn estimate<T: Real, O: Objective<T> + ?Sized>(
    objective: &O,
    inputs: &Inputs<'_, T>,
    spec: &EstimatorSpec<T>,
) -> Result<GradientEstimate<T>> {
    let prepared = prepare(objective, spec.kind, inputs, &spec.options)?;
    Ok(prepared.solve(spec.pinv, spec.precondition))
}

/// Estimate from precomputed objective values, for callers that evaluate
/// the objective themselves.
///
/// `values` is `M × N` with entry `(m, n) = ℓ(x_m, u_n)`; the paired
/// estimators also accept a single row of diagonal values
/// `ℓ(x_n, u_n)`, and `fragile` expects the single row `ℓ(x̄, u_n)`.
/// `stosag` and `one_sided` need `mean_values = ℓ(x_n, μ)`.
pub fn from_values<T: Real>(
    values: &DMatrix<T>,
    u: &Ensemble<T>,
    mean_values: Option<&RowDVector<T>>,
    spec: &EstimatorSpec<T>,
) -> Result<GradientEstimate<T>> {
    let kind = spec.kind;
    let n = u.size();
    if values.ncols() != n {
        return Err(Error::dims(
            "value table",
            format!("{n} columns"),
            crate::linalg::shape(values),
        ));
    }
    let diagonal = || -> Result<DMatrix<T>> {
        match values.nrows() {
            1 => Ok(values.clone()),
            r if r == n => Ok(DMatrix::from_fn(1, n, |_, j| values[(j, j)])),
            _ => Err(Error::dims(
                "paired value table",
                format!("1x{n} or {n}x{n}"),
                crate::linalg::shape(values),
            )),
        }
    };
    let baseline = || -> Result<&RowDVector<T>> {
        let b = mean_values.ok_or(Error::Precondition {
            estimator: kind.id(),
            requirement: "values of ℓ(x_n, μ)".into(),
        })?;
        if b.len() != n {
            return Err(Error::dims("mean values", n, b.len()));
        }
        Ok(b)
    };
    let f = match kind {
        EstimatorKind::PlainLls => {
            if values.nrows() == 0 {
                return Err(Error::dims("value table", "at least one row", "0 rows"));
            }
            DMatrix::from_fn(1, n, |_, j| values.column(j).sum() / T::from_count(values.nrows()))
        }
        EstimatorKind::Fragile => {
            if values.nrows() != 1 {
                return Err(Error::dims(
                    "fragile value table",
                    format!("1x{n}"),
                    crate::linalg::shape(values),
                ));
            }
            values.clone()
        }
        EstimatorKind::Paired => diagonal()?,
        EstimatorKind::Stosag | EstimatorKind::OneSided => {
            let d = diagonal()?;
            let b = baseline()?;
            DMatrix::from_fn(1, n, |_, j| d[j] - b[j])
        }
        other => {
            return Err(Error::Precondition {
                estimator: other.id(),
                requirement: "access to the objective (not supported from a value table)".into(),
            })
        }
    };
    let rows = values.nrows();
    let evals = match kind {
        EstimatorKind::PlainLls => rows * n,
        _ => n,
    };
    let cached = if kind.uses_baseline() { n } else { 0 };
    let (evals, cached_evals) = if spec.options.charge_cached {
        (evals + cached, 0)
    } else {
        (evals, cached)
    };
    let prepared = Prepared {
        kind,
        evals,
        cached_evals,
        decorrelation: None,
        form: regression(f, &u.anomalies())?,
    };
    Ok(prepared.solve(spec.pinv, spec.precondition))
}

fn regression<T: Real>(f: DMatrix<T>, anomalies: &DMatrix<T>) -> Result<Form<T>> {
    let cross = sample_cross_cov(&f, anomalies)?;
    let system = LlsSystem::new(&f, anomalies)?;
    Ok(Form::Regression { system, cross })
}

fn diagonal_values<T: Real, O: Objective<T> + ?Sized>(objective: &O, x: &Ensemble<T>, u: &Ensemble<T>) -> DMatrix<T> {
    DMatrix::from_fn(1, u.size(), |_, j| objective.eval(x.member(j), u.member(j)))
}

/// `ℓ(x_m, μ)` for every member of `X`.
fn baseline<T: Real, O: Objective<T> + ?Sized>(objective: &O, x: &Ensemble<T>, u: &Ensemble<T>) -> DVector<T> {
    let mu = u.true_mean();
    DVector::from_fn(x.size(), |i, _| objective.eval(x.member(i), mu.as_slice()))
}

fn subsamples<'a, T: Real>(kind: EstimatorKind, inputs: &Inputs<'a, T>, group: usize) -> Result<&'a Ensemble<T>> {
    let m = inputs.x.size();
    let s = inputs.subsamples.ok_or(Error::Precondition {
        estimator: kind.id(),
        requirement: format!("a subsample ensemble of M·{group} members"),
    })?;
    if s.dim() != inputs.u.dim() {
        return Err(Error::dims("subsample dimension", inputs.u.dim(), s.dim()));
    }
    if s.size() != m * group {
        return Err(Error::Precondition {
            estimator: kind.id(),
            requirement: format!(
                "{} subsample members ({m} groups of {group}), got {}",
                m * group,
                s.size()
            ),
        });
    }
    Ok(s)
}

fn groups_for<T: Real>(kind: EstimatorKind, inputs: &Inputs<'_, T>, n_m: usize) -> Result<Vec<Ensemble<T>>> {
    if n_m < 2 {
        return Err(Error::Precondition {
            estimator: kind.id(),
            requirement: format!("groups of at least 2 members, got {n_m}"),
        });
    }
    let s = subsamples(kind, inputs, n_m)?;
    split(s, &vec![n_m; inputs.x.size()])
}

fn group_form<T: Real>(kind: EstimatorKind, groups: &[Ensemble<T>], values: &[DMatrix<T>]) -> Result<Form<T>> {
    let m = groups.len();
    let d = groups[0].dim();
    let anomalies: Vec<DMatrix<T>> = groups.iter().map(Ensemble::anomalies).collect();
    let mut cbar_sum = DMatrix::zeros(1, d);
    for (f, a) in values.iter().zip(&anomalies) {
        cbar_sum += sample_cross_cov(f, a)?;
    }
    let cbar_mean = &cbar_sum / T::from_count(m);
    Ok(match kind {
        EstimatorKind::AverageLls if groups.iter().all(|g| g.size() == 2) => {
            let mut mp = DMatrix::zeros(1, d);
            for (i, (f, a)) in values.iter().zip(&anomalies).enumerate() {
                // Ũ_m = [ṽ, −ṽ], Ũ_m⁺ = [ṽ, −ṽ]ᵀ / (2‖ṽ‖²)
                let v = a.column(0);
                let norm2 = v.norm_squared();
                if norm2 == T::zero() {
                    return Err(Error::DegenerateDifference { index: i });
                }
                let coef = (f[0] - f[1]) / (norm2 + norm2);
                mp += v.transpose() * coef;
            }
            Form::PairAverage {
                mp: mp / T::from_count(m),
                cross: cbar_mean,
            }
        }
        EstimatorKind::AverageLls => {
            let systems = values
                .iter()
                .zip(&anomalies)
                .map(|(f, a)| LlsSystem::new(f, a))
                .collect::<Result<Vec<_>>>()?;
            Form::GroupAverage {
                systems,
                cross: cbar_mean,
            }
        }
        EstimatorKind::GenStosag => {
            // Σ_m C̄_m = S·Sᵀ with S = [Ũ_m / √(N_m − 1)]
            let total: usize = groups.iter().map(Ensemble::size).sum();
            let mut s = DMatrix::zeros(d, total);
            let mut col = 0;
            for a in &anomalies {
                let scale = T::from_count(a.ncols() - 1).sqrt();
                s.columns_mut(col, a.ncols()).copy_from(&(a / scale));
                col += a.ncols();
            }
            Form::Ratio {
                system: CovarianceSystem::new(&cbar_sum, &s)?,
                cross: cbar_mean,
            }
        }
        EstimatorKind::Hybrid => {
            let total: usize = groups.iter().map(Ensemble::size).sum();
            let mut pool = DMatrix::zeros(d, total);
            let mut col = 0;
            for g in groups {
                pool.columns_mut(col, g.size()).copy_from(g.members());
                col += g.size();
            }
            let (pooled, _) = crate::linalg::center_columns(&pool)?;
            let s = pooled / T::from_count(total - 1).sqrt();
            Form::Ratio {
                system: CovarianceSystem::new(&cbar_mean, &s)?,
                cross: cbar_mean,
            }
        }
        _ => unreachable!("group_form called for {kind}"),
    })
}
