use nalgebra::RowDVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::rastrigin::{rastrigin_blurred, rastrigin_blurred_grad, rastrigin_eval, rastrigin_grad};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub step: f64,
    pub n_steps: usize,
    pub starts: Vec<Vec<f64>>,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            step: 0.012,
            n_steps: 300,
            starts: vec![
                vec![-2.8, 3.5],
                vec![2.3, -3.1],
                vec![-1.7, -2.9],
                vec![2.7, 2.6],
                vec![0.6, 4.1],
            ],
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step >= 0.0) || !self.step.is_finite() {
            return Err(Error::Invalid(format!(
                "step must be finite and non-negative, got {}",
                self.step
            )));
        }
        if self.starts.is_empty() {
            return Err(Error::Invalid("at least one start point is needed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub start_id: usize,
    /// Iterates, starting with the start point.
    pub points: Vec<Vec<T>>,
    /// Set when an iterate became non-finite; the trajectory stops there.
    pub aborted: bool,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &[T] {
        self.points.last().expect("trajectory holds its start point")
    }
}

/// `u_{k+1} = u_k − step · grad(u_k)` from each start.
pub fn steepest_descent<T: Real>(
    grad: impl Fn(&[T]) -> RowDVector<T>,
    cfg: &DescentConfig,
) -> Result<Vec<Trajectory<T>>> {
    cfg.validate()?;
    let step = T::lit(cfg.step);
    Ok(cfg
        .starts
        .iter()
        .enumerate()
        .map(|(id, start)| {
            let mut u: Vec<T> = start.iter().map(|&v| T::lit(v)).collect();
            let mut points = vec![u.clone()];
            let mut aborted = false;
            for _ in 0..cfg.n_steps {
                let g = grad(&u);
                for (ui, gi) in u.iter_mut().zip(g.iter()) {
                    *ui -= step * *gi;
                }
                if u.iter().any(|v| !v.is_finite()) {
                    aborted = true;
                    break;
                }
                points.push(u.clone());
            }
            Trajectory {
                start_id: id,
                points,
                aborted,
            }
        })
        .collect())
}

/// Exact-gradient and blurred-gradient descent on the stretched
/// Rastrigin function.
#[derive(Debug, Clone, PartialEq)]
pub struct RastriginDemo {
    pub exact: Vec<Trajectory<f64>>,
    pub blurred: Vec<Trajectory<f64>>,
}

impl RastriginDemo {
    pub fn run(cfg: &DescentConfig) -> Result<Self> {
        if cfg.starts.iter().any(|s| s.len() != 2) {
            return Err(Error::Invalid("Rastrigin starts must be 2-vectors".into()));
        }
        Ok(Self {
            exact: steepest_descent(|u: &[f64]| rastrigin_grad(u), cfg)?,
            blurred: steepest_descent(|u: &[f64]| rastrigin_blurred_grad(u), cfg)?,
        })
    }

    /// Mean of the true objective at the final iterates.
    pub fn mean_final_loss(trajectories: &[Trajectory<f64>]) -> f64 {
        trajectories.iter().map(|t| rastrigin_eval(t.last())).sum::<f64>() / trajectories.len() as f64
    }

    /// Rows `start_id, step, u1, u2, loss_exact, loss_blurred`.
    pub fn rows(trajectories: &[Trajectory<f64>]) -> Vec<(usize, usize, f64, f64, f64, f64)> {
        trajectories
            .iter()
            .flat_map(|t| {
                t.points
                    .iter()
                    .enumerate()
                    .map(move |(k, u)| (t.start_id, k, u[0], u[1], rastrigin_eval(u), rastrigin_blurred(u)))
            })
            .collect()
    }
}
