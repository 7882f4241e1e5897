//! Ensemble (regression) gradient estimators for robust optimisation.
//!
//! The crate implements the plain, fragile, paired and StoSAG ensemble
//! gradients together with their generalisations (average LLS, ratio of
//! averages, hybrid, two-sided, mirrored, one-sided) and the decorrelated
//! paired estimator, all behind one interface in [`estimators`]. The
//! [`harness`] module runs seeded Monte-Carlo benchmarks of those
//! estimators on Hermite test objectives and reports RMSE and bias.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod objectives;
pub mod rng;
pub mod sampling;
pub mod scalar;

pub use error::{Error, Result};
pub use estimators::{EstimatorKind, EstimatorSpec, GradientEstimate};
pub use linalg::PinvConfig;
pub use objectives::Objective;
pub use sampling::{Ensemble, GaussianSpec};
pub use scalar::Real;

pub type Matrix64 = nalgebra::DMatrix<f64>;
pub type Matrix32 = nalgebra::DMatrix<f32>;
pub type RowVector64 = nalgebra::RowDVector<f64>;
pub type RowVector32 = nalgebra::RowDVector<f32>;
pub type Ensemble64 = sampling::Ensemble<f64>;
pub type Ensemble32 = sampling::Ensemble<f32>;
pub type GaussianSpec64 = sampling::GaussianSpec<f64>;
pub type GaussianSpec32 = sampling::GaussianSpec<f32>;
pub type PinvConfig64 = linalg::PinvConfig<f64>;
pub type PinvConfig32 = linalg::PinvConfig<f32>;
pub type EstimatorSpec64 = estimators::EstimatorSpec<f64>;
pub type EstimatorSpec32 = estimators::EstimatorSpec<f32>;
pub type GradientEstimate64 = estimators::GradientEstimate<f64>;
pub type GradientEstimate32 = estimators::GradientEstimate<f32>;
