//! Hermite benchmark objective `ℓ(x, u) = Σ_i He_k(u_i + x_i)`.
//!
//! Polynomials follow the probabilists' convention
//! (`He_0 = 1`, `He_1 = t`, `He_{n+1} = t·He_n − n·He_{n−1}`).

use nalgebra::{DMatrix, RowDVector};

use super::quadrature::normal_expectation;
use super::Objective;
use crate::error::{Error, Result};
use crate::sampling::GaussianSpec;
use crate::scalar::Real;

pub const MAX_ORDER: usize = 6;

/// `He_n(t)` by the three-term recurrence.
pub fn hermite_poly<T: Real>(n: usize, t: T) -> T {
    let mut prev = T::one();
    if n == 0 {
        return prev;
    }
    let mut cur = t;
    for k in 1..n {
        let next = t * cur - T::from_count(k) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn check(order: usize, x: usize, u: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::HermiteOrder(order));
    }
    if x != u {
        return Err(Error::dims("Hermite objective", u, x));
    }
    Ok(())
}

pub fn hermite_eval<T: Real>(order: usize, x: &[T], u: &[T]) -> Result<T> {
    check(order, x.len(), u.len())?;
    Ok(x.iter()
        .zip(u)
        .fold(T::zero(), |acc, (&xi, &ui)| acc + hermite_poly(order, ui + xi)))
}

/// `∂ℓ/∂u_i = k·He_{k−1}(u_i + x_i)`.
pub fn hermite_grad_u<T: Real>(order: usize, x: &[T], u: &[T]) -> Result<RowDVector<T>> {
    check(order, x.len(), u.len())?;
    if order == 0 {
        return Ok(RowDVector::zeros(u.len()));
    }
    let k = T::from_count(order);
    Ok(RowDVector::from_fn(u.len(), |_, i| {
        k * hermite_poly(order - 1, u[i] + x[i])
    }))
}

/// Expected gradient `E_u (1/M) Σ_m ∂ℓ/∂u(x_m, u)`, conditional on the
/// columns `x_m` of `x`.
///
/// The objective is separable, so only the marginals of `u_spec` matter;
/// each one-dimensional expectation uses 64-point Gauss–Hermite quadrature,
/// which is exact for these polynomial degrees.
pub fn hermite_expected_grad<T: Real>(order: usize, x: &DMatrix<T>, u_spec: &GaussianSpec<T>) -> Result<RowDVector<T>> {
    let d = u_spec.dim();
    check(order, x.nrows(), d)?;
    if x.ncols() == 0 {
        return Err(Error::InsufficientSamples {
            context: "hermite_expected_grad",
            required: 1,
            found: 0,
        });
    }
    if order == 0 {
        return Ok(RowDVector::zeros(d));
    }
    let var = u_spec.marginal_variances();
    let k = order as f64;
    let m = x.ncols() as f64;
    Ok(RowDVector::from_fn(d, |_, i| {
        let mu = u_spec.mean()[i].as_f64();
        let sd = var[i].as_f64().sqrt();
        let total: f64 = x
            .row(i)
            .iter()
            .map(|&xi| normal_expectation(mu + xi.as_f64(), sd, |t| k * hermite_poly(order - 1, t)))
            .sum();
        T::lit(total / m)
    }))
}

/// Expected gradient with `x` integrated out as well: `x ~ x_spec`,
/// `u ~ u_spec` independent.
pub fn hermite_expected_grad_distributional<T: Real>(
    order: usize,
    x_spec: &GaussianSpec<T>,
    u_spec: &GaussianSpec<T>,
) -> Result<RowDVector<T>> {
    let d = u_spec.dim();
    check(order, x_spec.dim(), d)?;
    if order == 0 {
        return Ok(RowDVector::zeros(d));
    }
    let (vx, vu) = (x_spec.marginal_variances(), u_spec.marginal_variances());
    let k = order as f64;
    Ok(RowDVector::from_fn(d, |_, i| {
        let m = (x_spec.mean()[i] + u_spec.mean()[i]).as_f64();
        let sd = (vx[i] + vu[i]).as_f64().sqrt();
        T::lit(normal_expectation(m, sd, |t| k * hermite_poly(order - 1, t)))
    }))
}

/// Hermite benchmark objective of fixed order and dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermiteObjective {
    order: usize,
    dims: usize,
}

impl HermiteObjective {
    pub fn new(order: usize, dims: usize) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::HermiteOrder(order));
        }
        Ok(Self { order, dims })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dims(&self) -> usize {
        self.dims
    }
}

impl<T: Real> Objective<T> for HermiteObjective {
    fn dim_x(&self) -> usize {
        self.dims
    }
    fn dim_u(&self) -> usize {
        self.dims
    }
    fn eval(&self, x: &[T], u: &[T]) -> T {
        debug_assert_eq!(x.len(), u.len());
        x.iter()
            .zip(u)
            .fold(T::zero(), |acc, (&xi, &ui)| acc + hermite_poly(self.order, ui + xi))
    }
    fn grad_u(&self, x: &[T], u: &[T]) -> Option<RowDVector<T>> {
        hermite_grad_u(self.order, x, u).ok()
    }
    fn expected_grad(&self, x: &DMatrix<T>, u_spec: &GaussianSpec<T>) -> Option<RowDVector<T>> {
        hermite_expected_grad(self.order, x, u_spec).ok()
    }
}
