//! Stretched two-dimensional Rastrigin function and its Gaussian blur.
//!
//! `L(u) = 20 + Σ_i [v_i² − 10 cos(2π v_i)]` with `v_1 = 2u_1`, `v_2 = u_2`.

use nalgebra::RowDVector;

use super::Objective;
use crate::scalar::Real;

const STRETCH: [f64; 2] = [2.0, 1.0];

fn two_pi<T: Real>() -> T {
    T::two_pi()
}

pub fn rastrigin_eval<T: Real>(u: &[T]) -> T {
    assert_eq!(u.len(), 2, "Rastrigin is two-dimensional");
    let ten = T::lit(10.0);
    (0..2).fold(T::lit(20.0), |acc, i| {
        let v = T::lit(STRETCH[i]) * u[i];
        acc + v * v - ten * (two_pi::<T>() * v).cos()
    })
}

pub fn rastrigin_grad<T: Real>(u: &[T]) -> RowDVector<T> {
    assert_eq!(u.len(), 2, "Rastrigin is two-dimensional");
    RowDVector::from_fn(2, |_, i| {
        let a = T::lit(STRETCH[i]);
        let v = a * u[i];
        a * (T::lit(2.0) * v + T::lit(10.0) * two_pi::<T>() * (two_pi::<T>() * v).sin())
    })
}

/// `E L(u)` for `u ~ N(μ, σ²·I)`.
pub fn rastrigin_blurred_with<T: Real>(mu: &[T], blur_variance: T) -> T {
    assert_eq!(mu.len(), 2, "Rastrigin is two-dimensional");
    let ten = T::lit(10.0);
    let tp = two_pi::<T>();
    (0..2).fold(T::lit(20.0), |acc, i| {
        let a = T::lit(STRETCH[i]);
        let m = a * mu[i];
        let var = a * a * blur_variance;
        let damping = (-(tp * tp) * var / T::lit(2.0)).exp();
        acc + m * m + var - ten * (tp * m).cos() * damping
    })
}

pub fn rastrigin_blurred_grad_with<T: Real>(mu: &[T], blur_variance: T) -> RowDVector<T> {
    assert_eq!(mu.len(), 2, "Rastrigin is two-dimensional");
    let tp = two_pi::<T>();
    RowDVector::from_fn(2, |_, i| {
        let a = T::lit(STRETCH[i]);
        let m = a * mu[i];
        let var = a * a * blur_variance;
        let damping = (-(tp * tp) * var / T::lit(2.0)).exp();
        a * (T::lit(2.0) * m + T::lit(10.0) * tp * (tp * m).sin() * damping)
    })
}

/// Blur with the identity covariance.
pub fn rastrigin_blurred<T: Real>(mu: &[T]) -> T {
    rastrigin_blurred_with(mu, T::one())
}

pub fn rastrigin_blurred_grad<T: Real>(mu: &[T]) -> RowDVector<T> {
    rastrigin_blurred_grad_with(mu, T::one())
}

/// Rastrigin as a conditional objective with no uncertain parameter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RastriginObjective;

impl<T: Real> Objective<T> for RastriginObjective {
    fn dim_x(&self) -> usize {
        0
    }
    fn dim_u(&self) -> usize {
        2
    }
    fn eval(&self, _x: &[T], u: &[T]) -> T {
        rastrigin_eval(u)
    }
    fn grad_u(&self, _x: &[T], u: &[T]) -> Option<RowDVector<T>> {
        Some(rastrigin_grad(u))
    }
}
