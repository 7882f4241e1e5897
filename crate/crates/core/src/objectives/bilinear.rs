//! Bilinear objective `ℓ(x, u) = 1ᵀ(A·x + B·u)`.

use nalgebra::{DMatrix, RowDVector};

use super::Objective;
use crate::error::{Error, Result};
use crate::sampling::GaussianSpec;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct BilinearObjective<T: Real> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    /// `1ᵀA`
    a_sum: RowDVector<T>,
    /// `1ᵀB`, the constant gradient.
    b_sum: RowDVector<T>,
}

impl<T: Real> BilinearObjective<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>) -> Result<Self> {
        if a.nrows() != b.nrows() {
            return Err(Error::dims("bilinear A rows", b.nrows(), a.nrows()));
        }
        let a_sum = a.row_sum();
        let b_sum = b.row_sum();
        Ok(Self { a, b, a_sum, b_sum })
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }

    /// `1ᵀA`.
    pub fn a_sum(&self) -> &RowDVector<T> {
        &self.a_sum
    }

    /// `1ᵀB`: the gradient in `u`, everywhere.
    pub fn gradient(&self) -> &RowDVector<T> {
        &self.b_sum
    }
}

pub fn bilinear_eval<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, x: &[T], u: &[T]) -> Result<T> {
    if a.ncols() != x.len() {
        return Err(Error::dims("bilinear x", a.ncols(), x.len()));
    }
    if b.ncols() != u.len() {
        return Err(Error::dims("bilinear u", b.ncols(), u.len()));
    }
    if a.nrows() != b.nrows() {
        return Err(Error::dims("bilinear A rows", b.nrows(), a.nrows()));
    }
    let ax = a * nalgebra::DVector::from_column_slice(x);
    let bu = b * nalgebra::DVector::from_column_slice(u);
    Ok((ax + bu).sum())
}

pub fn bilinear_grad<T: Real>(b: &DMatrix<T>) -> RowDVector<T> {
    b.row_sum()
}

impl<T: Real> Objective<T> for BilinearObjective<T> {
    fn dim_x(&self) -> usize {
        self.a.ncols()
    }
    fn dim_u(&self) -> usize {
        self.b.ncols()
    }
    fn eval(&self, x: &[T], u: &[T]) -> T {
        let dot = |w: &RowDVector<T>, v: &[T]| w.iter().zip(v).fold(T::zero(), |s, (&p, &q)| s + p * q);
        dot(&self.a_sum, x) + dot(&self.b_sum, u)
    }
    fn grad_u(&self, _x: &[T], _u: &[T]) -> Option<RowDVector<T>> {
        Some(self.b_sum.clone())
    }
    fn expected_grad(&self, _x: &DMatrix<T>, _u_spec: &GaussianSpec<T>) -> Option<RowDVector<T>> {
        Some(self.b_sum.clone())
    }
}
