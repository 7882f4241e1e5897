//! Conditional objectives `ℓ(x, u)` used as black boxes by the estimators.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, RowDVector};

use crate::sampling::GaussianSpec;
use crate::scalar::Real;

pub mod bilinear;
pub mod hermite;
pub mod quadrature;
pub mod rastrigin;

pub use bilinear::BilinearObjective;
pub use hermite::HermiteObjective;
pub use rastrigin::RastriginObjective;

/// A conditional objective `ℓ(x, u)` with optional analytic information.
///
/// Implementations must be thread-safe; the harness evaluates trials in
/// parallel.
pub trait Objective<T: Real>: Sync {
    /// Dimension of the uncertain parameter `x` (may be 0).
    fn dim_x(&self) -> usize;
    /// Dimension of the control `u`.
    fn dim_u(&self) -> usize;

    fn eval(&self, x: &[T], u: &[T]) -> T;

    /// Analytic `∂ℓ/∂u`, if available.
    fn grad_u(&self, _x: &[T], _u: &[T]) -> Option<RowDVector<T>> {
        None
    }

    /// `E_u (1/M) Σ_m ∂ℓ/∂u(x_m, u)` over `u ~ u_spec`, conditional on the
    /// columns of `x`, if the objective knows it.
    fn expected_grad(&self, _x: &DMatrix<T>, _u_spec: &GaussianSpec<T>) -> Option<RowDVector<T>> {
        None
    }
}

impl<T: Real, O: Objective<T> + ?Sized> Objective<T> for &O {
    fn dim_x(&self) -> usize {
        (**self).dim_x()
    }
    fn dim_u(&self) -> usize {
        (**self).dim_u()
    }
    fn eval(&self, x: &[T], u: &[T]) -> T {
        (**self).eval(x, u)
    }
    fn grad_u(&self, x: &[T], u: &[T]) -> Option<RowDVector<T>> {
        (**self).grad_u(x, u)
    }
    fn expected_grad(&self, x: &DMatrix<T>, u_spec: &GaussianSpec<T>) -> Option<RowDVector<T>> {
        (**self).expected_grad(x, u_spec)
    }
}

/// Objective defined by a closure, without analytic extras.
pub struct FnObjective<F> {
    dim_x: usize,
    dim_u: usize,
    f: F,
}

impl<F> FnObjective<F> {
    pub fn new(dim_x: usize, dim_u: usize, f: F) -> Self {
        Self { dim_x, dim_u, f }
    }
}

impl<T: Real, F> Objective<T> for FnObjective<F>
where
    F: Fn(&[T], &[T]) -> T + Sync,
{
    fn dim_x(&self) -> usize {
        self.dim_x
    }
    fn dim_u(&self) -> usize {
        self.dim_u
    }
    fn eval(&self, x: &[T], u: &[T]) -> T {
        (self.f)(x, u)
    }
}

/// Wrapper counting calls to `eval` and `grad_u`.
#[derive(Debug, Default)]
pub struct Counting<O> {
    inner: O,
    evals: AtomicU64,
    grads: AtomicU64,
}

impl<O> Counting<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            evals: AtomicU64::new(0),
            grads: AtomicU64::new(0),
        }
    }

    pub fn evals(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn grads(&self) -> u64 {
        self.grads.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.evals.store(0, Ordering::Relaxed);
        self.grads.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<T: Real, O: Objective<T>> Objective<T> for Counting<O> {
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }
    fn dim_u(&self) -> usize {
        self.inner.dim_u()
    }
    fn eval(&self, x: &[T], u: &[T]) -> T {
        self.evals.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(x, u)
    }
    fn grad_u(&self, x: &[T], u: &[T]) -> Option<RowDVector<T>> {
        self.grads.fetch_add(1, Ordering::Relaxed);
        self.inner.grad_u(x, u)
    }
    fn expected_grad(&self, x: &DMatrix<T>, u_spec: &GaussianSpec<T>) -> Option<RowDVector<T>> {
        self.inner.expected_grad(x, u_spec)
    }
}

/// Central finite-difference gradient of `f` at `u` with per-coordinate
/// step `h·max(1, |u_i|)`.
pub fn central_difference<T: Real>(f: impl Fn(&[T]) -> T, u: &[T], h: T) -> RowDVector<T> {
    let mut point = u.to_vec();
    let two = T::lit(2.0);
    RowDVector::from_fn(u.len(), |_, i| {
        let step = h * u[i].abs().max(T::one());
        point[i] = u[i] + step;
        let up = f(&point);
        point[i] = u[i] - step;
        let down = f(&point);
        point[i] = u[i];
        (up - down) / (two * step)
    })
}
