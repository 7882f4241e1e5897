use nalgebra::RowDVector;
use rayon::prelude::*;

use super::config::{BenchConfig, TruthMode};
use super::stats::{CellKey, Lambda, StatKey, TrialStats};
use crate::error::{Error, Result};
use crate::estimators::{prepare, EstimatorKind, Inputs};
use crate::linalg::PinvConfig;
use crate::objectives::hermite::hermite_expected_grad_distributional;
use crate::objectives::{HermiteObjective, Objective};
use crate::rng::child_seed;
use crate::sampling::{draw_ensemble, recenter, Ensemble, GaussianSpec};

/// Result of one estimator in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutcome {
    pub estimator: EstimatorKind,
    /// Signed error per λ of the grid, or the reason it could not run.
    pub errors: std::result::Result<Vec<RowDVector<f64>>, String>,
    pub evals: usize,
    pub cached_evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub truth: RowDVector<f64>,
    pub outcomes: Vec<EstimatorOutcome>,
}

/// Seed of trial `trial` in the (order, N) cell.
pub fn trial_seed(base: u64, order: usize, n: usize, trial: u64) -> u64 {
    child_seed(child_seed(child_seed(base, order as u64), n as u64), trial)
}

struct Draws {
    x: Ensemble<f64>,
    u: Ensemble<f64>,
    groups: Option<Ensemble<f64>>,
    pairs: Option<Ensemble<f64>>,
    x_unpaired: Option<Ensemble<f64>>,
}

fn truth_for(
    cfg: &BenchConfig,
    obj: &HermiteObjective,
    x: &Ensemble<f64>,
    x_spec: &GaussianSpec<f64>,
    u_spec: &GaussianSpec<f64>,
) -> Result<RowDVector<f64>> {
    let g = match cfg.truth {
        TruthMode::Conditional => obj
            .expected_grad(x.members(), u_spec)
            .ok_or_else(|| Error::Invalid("objective has no expected gradient".into()))?,
        TruthMode::Distributional => hermite_expected_grad_distributional(obj.order(), x_spec, u_spec)?,
    };
    Ok(if cfg.precondition { g * u_spec.covariance() } else { g })
}

/// Runs every configured estimator on one set of draws.
///
/// Draws: `X` (`M = N` members), `U` (`N` members, recentred), and for
/// the group estimators one pool of `N·N_m` controls recentred jointly
/// and cut into consecutive groups. With `N_m = 2` the same pool provides
/// the `(v, w)` pairs of `two_sided`; otherwise those get their own `2N`
/// pool. Each estimator is prepared once and solved at every λ.
pub fn run_trial(cfg: &BenchConfig, order: usize, n: usize, trial: u64) -> Result<TrialOutcome> {
    let seed = trial_seed(cfg.base_seed, order, n, trial);
    let (x_spec, u_spec) = (cfg.x_spec()?, cfg.u_spec()?);
    let obj = HermiteObjective::new(order, cfg.dims)?;
    let wants = |k: EstimatorKind| cfg.estimators.contains(&k);
    let groups_needed = [
        EstimatorKind::AverageLls,
        EstimatorKind::GenStosag,
        EstimatorKind::Hybrid,
    ]
    .into_iter()
    .any(wants)
        || (wants(EstimatorKind::TwoSided) && cfg.subsample_size == 2);
    let n_m = cfg.subsample_size;
    let draws = Draws {
        x: draw_ensemble(&x_spec, n, child_seed(seed, 0))?,
        u: recenter(&draw_ensemble(&u_spec, n, child_seed(seed, 1))?)?,
        groups: if groups_needed {
            Some(recenter(&draw_ensemble(&u_spec, n * n_m, child_seed(seed, 2))?)?)
        } else {
            None
        },
        pairs: if wants(EstimatorKind::TwoSided) && n_m != 2 {
            Some(recenter(&draw_ensemble(&u_spec, 2 * n, child_seed(seed, 3))?)?)
        } else {
            None
        },
        x_unpaired: match cfg.unpaired_x_members {
            Some(m) => Some(draw_ensemble(&x_spec, m, child_seed(seed, 4))?),
            None => None,
        },
    };
    let truth = truth_for(cfg, &obj, &draws.x, &x_spec, &u_spec)?;
    let truth_unpaired = match &draws.x_unpaired {
        Some(x) => Some(truth_for(cfg, &obj, x, &x_spec, &u_spec)?),
        None => None,
    };
    let lambdas: Vec<PinvConfig<f64>> = cfg
        .lambda_grid
        .iter()
        .map(|&l| PinvConfig::new(l))
        .collect::<Result<_>>()?;
    let options = cfg.prepare_options();

    let outcomes = cfg
        .estimators
        .iter()
        .map(|&kind| {
            let unpaired = matches!(
                kind,
                EstimatorKind::PlainLls | EstimatorKind::Fragile | EstimatorKind::AvgGrad
            );
            let (x, target) = match (&draws.x_unpaired, &truth_unpaired, unpaired) {
                (Some(x), Some(t), true) => (x, t),
                _ => (&draws.x, &truth),
            };
            let subs = if kind == EstimatorKind::TwoSided && n_m != 2 {
                draws.pairs.as_ref()
            } else {
                draws.groups.as_ref()
            };
            let inputs = Inputs {
                x,
                u: &draws.u,
                subsamples: subs,
            };
            match prepare(&obj, kind, &inputs, &options) {
                Ok(p) => EstimatorOutcome {
                    estimator: kind,
                    errors: Ok(lambdas
                        .iter()
                        .map(|&l| p.solve(l, cfg.precondition).grad - target)
                        .collect()),
                    evals: p.evals(),
                    cached_evals: p.cached_evals(),
                },
                Err(e) => EstimatorOutcome {
                    estimator: kind,
                    errors: Err(e.to_string()),
                    evals: 0,
                    cached_evals: 0,
                },
            }
        })
        .collect();
    Ok(TrialOutcome { truth, outcomes })
}

fn run_block(cfg: &BenchConfig, order: usize, n: usize, first: u64, last: u64) -> Result<TrialStats> {
    let mut stats = TrialStats::new();
    for trial in first..last {
        let out = run_trial(cfg, order, n, trial)?;
        for o in out.outcomes {
            let cell = CellKey {
                estimator: o.estimator,
                order,
                n,
            };
            match &o.errors {
                Ok(errs) => {
                    for (e, &l) in errs.iter().zip(&cfg.lambda_grid) {
                        let key = StatKey {
                            cell,
                            lambda: Lambda(l),
                        };
                        stats.record(key, e.as_slice(), o.evals, o.cached_evals);
                    }
                }
                Err(reason) => stats.skip(cell, reason.clone()),
            }
        }
    }
    stats.seal_block();
    Ok(stats)
}

/// Progress callback: `(cells done, cells total)`.
pub type Progress<'a> = &'a (dyn Fn(usize, usize) + Sync);

/// Runs the whole grid of orders and ensemble sizes.
///
/// Trials are processed in blocks of `cfg.block_size` on a pool of
/// `workers` threads (all cores if `None`). Blocks are merged in index
/// order, so the output does not depend on the number of workers.
pub fn run_bench(cfg: &BenchConfig, workers: Option<usize>, progress: Option<Progress<'_>>) -> Result<TrialStats> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let cells: Vec<(usize, usize)> = cfg
        .hermite_orders
        .iter()
        .flat_map(|&o| cfg.ensemble_sizes.iter().map(move |&n| (o, n)))
        .collect();
    let trials = cfg.n_trials as u64;
    let block = cfg.block_size as u64;
    let n_blocks = trials.div_ceil(block);
    let mut total = TrialStats::new();
    for (i, &(order, n)) in cells.iter().enumerate() {
        let parts: Vec<Result<TrialStats>> = pool.install(|| {
            (0..n_blocks)
                .into_par_iter()
                .map(|b| run_block(cfg, order, n, b * block, ((b + 1) * block).min(trials)))
                .collect()
        });
        for p in parts {
            total.merge(&p?);
        }
        if let Some(f) = progress {
            f(i + 1, cells.len());
        }
    }
    Ok(total)
}
