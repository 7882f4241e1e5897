use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::SelectionMetric;
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::linalg::CompensatedSum;
use crate::rng;

/// Regularisation value usable as an ordered map key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lambda(pub f64);

impl Eq for Lambda {}

impl PartialOrd for Lambda {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Lambda {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub estimator: EstimatorKind,
    pub order: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct StatKey {
    pub cell: CellKey,
    pub lambda: Lambda,
}

/// Per-dimension sums of errors and squared errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorAccumulator {
    sum: Vec<CompensatedSum<f64>>,
    sum_sq: Vec<CompensatedSum<f64>>,
    count: u64,
    evals: usize,
    cached_evals: usize,
}

impl ErrorAccumulator {
    pub fn new(dims: usize) -> Self {
        Self {
            sum: vec![CompensatedSum::default(); dims],
            sum_sq: vec![CompensatedSum::default(); dims],
            count: 0,
            evals: 0,
            cached_evals: 0,
        }
    }

    pub fn push(&mut self, error: &[f64]) {
        assert_eq!(error.len(), self.sum.len(), "error vector length");
        for (i, &e) in error.iter().enumerate() {
            self.sum[i].add(e);
            self.sum_sq[i].add(e * e);
        }
        self.count += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.sum.len(), other.sum.len(), "accumulator dimension");
        for i in 0..self.sum.len() {
            self.sum[i].merge(&other.sum[i]);
            self.sum_sq[i].merge(&other.sum_sq[i]);
        }
        self.count += other.count;
        self.evals = self.evals.max(other.evals);
        self.cached_evals = self.cached_evals.max(other.cached_evals);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn dims(&self) -> usize {
        self.sum.len()
    }

    pub fn set_cost(&mut self, evals: usize, cached_evals: usize) {
        self.evals = evals;
        self.cached_evals = cached_evals;
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.sum[i].value() / self.count as f64
    }

    pub fn mean_square(&self, i: usize) -> f64 {
        self.sum_sq[i].value() / self.count as f64
    }

    /// Dimension-averaged RMSE and absolute bias.
    pub fn summary(&self) -> (f64, f64) {
        summarise(
            (0..self.dims()).map(|i| (self.sum[i].value(), self.sum_sq[i].value())),
            self.count as f64,
            self.dims(),
        )
    }

    fn raw(&self) -> BlockSums {
        BlockSums {
            sum: self.sum.iter().map(CompensatedSum::value).collect(),
            sum_sq: self.sum_sq.iter().map(CompensatedSum::value).collect(),
            count: self.count,
        }
    }
}

fn summarise(sums: impl Iterator<Item = (f64, f64)>, count: f64, dims: usize) -> (f64, f64) {
    let (mut rmse, mut bias) = (0.0, 0.0);
    for (s, s2) in sums {
        rmse += (s2 / count).sqrt();
        bias += (s / count).abs();
    }
    (rmse / dims as f64, bias / dims as f64)
}

/// Plain sums of one block of trials, kept for the bootstrap.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSums {
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
    pub count: u64,
}

/// An estimator that could not run, with the number of affected trials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkipRecord {
    pub trials: u64,
    pub reason: String,
}

/// Error statistics for every (estimator, order, N, λ).
///
/// Merging is associative and commutative up to floating-point rounding;
/// the harness always merges in trial order so results do not depend on
/// scheduling.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialStats {
    cells: BTreeMap<StatKey, ErrorAccumulator>,
    blocks: BTreeMap<StatKey, Vec<BlockSums>>,
    skipped: BTreeMap<CellKey, SkipRecord>,
}

impl TrialStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, key: StatKey, error: &[f64], evals: usize, cached_evals: usize) {
        let acc = self
            .cells
            .entry(key)
            .or_insert_with(|| ErrorAccumulator::new(error.len()));
        acc.push(error);
        acc.set_cost(evals, cached_evals);
    }

    pub fn skip(&mut self, cell: CellKey, reason: String) {
        let rec = self.skipped.entry(cell).or_insert(SkipRecord { trials: 0, reason });
        rec.trials += 1;
    }

    pub fn merge(&mut self, other: &TrialStats) {
        for (k, v) in &other.cells {
            match self.cells.get_mut(k) {
                Some(acc) => acc.merge(v),
                None => {
                    self.cells.insert(*k, v.clone());
                }
            }
        }
        for (k, v) in &other.blocks {
            self.blocks.entry(*k).or_default().extend(v.iter().cloned());
        }
        for (k, v) in &other.skipped {
            let rec = self.skipped.entry(*k).or_insert(SkipRecord {
                trials: 0,
                reason: v.reason.clone(),
            });
            rec.trials += v.trials;
        }
    }

    /// Closes a block: its current sums become one bootstrap block.
    pub(crate) fn seal_block(&mut self) {
        for (k, acc) in &self.cells {
            self.blocks.insert(*k, vec![acc.raw()]);
        }
    }

    pub fn get(&self, key: &StatKey) -> Option<&ErrorAccumulator> {
        self.cells.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StatKey, &ErrorAccumulator)> {
        self.cells.iter()
    }

    pub fn blocks(&self, key: &StatKey) -> &[BlockSums] {
        self.blocks.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn skipped(&self) -> &BTreeMap<CellKey, SkipRecord> {
        &self.skipped
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub estimator: EstimatorKind,
    pub order: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub lambda: f64,
    pub rmse: f64,
    pub bias: f64,
    pub evals: usize,
    pub trials: u64,
}

impl ResultRow {
    pub fn metric(&self, metric: SelectionMetric) -> f64 {
        match metric {
            SelectionMetric::Rmse => self.rmse,
            SelectionMetric::Bias => self.bias,
        }
    }

    pub fn key(&self) -> StatKey {
        StatKey {
            cell: CellKey {
                estimator: self.estimator,
                order: self.order,
                n: self.n,
            },
            lambda: Lambda(self.lambda),
        }
    }
}

/// RMSE over trials per dimension, then averaged over dimensions; bias
/// is the absolute mean error per dimension, averaged likewise.
pub fn aggregate(stats: &TrialStats) -> Result<Vec<ResultRow>> {
    if stats.is_empty() {
        return Err(Error::Invalid("no trial statistics to aggregate".into()));
    }
    stats
        .iter()
        .map(|(k, acc)| {
            if acc.count() < 2 {
                return Err(Error::InsufficientSamples {
                    context: "aggregate",
                    required: 2,
                    found: acc.count() as usize,
                });
            }
            let (rmse, bias) = acc.summary();
            Ok(ResultRow {
                estimator: k.cell.estimator,
                order: k.cell.order,
                n: k.cell.n,
                lambda: k.lambda.0,
                rmse,
                bias,
                evals: acc.evals,
                trials: acc.count(),
            })
        })
        .collect()
}

/// Keeps the best row per (estimator, order, N); ties go to the smallest λ.
pub fn select_best_lambda(rows: &[ResultRow], metric: SelectionMetric) -> Vec<ResultRow> {
    let mut best: BTreeMap<CellKey, &ResultRow> = BTreeMap::new();
    for row in rows {
        let cell = row.key().cell;
        match best.get(&cell) {
            Some(cur) => {
                let (a, b) = (row.metric(metric), cur.metric(metric));
                if a < b || (a == b && row.lambda < cur.lambda) {
                    best.insert(cell, row);
                }
            }
            None => {
                best.insert(cell, row);
            }
        }
    }
    best.into_values().cloned().collect()
}

/// Percentile interval of a statistic under the block bootstrap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// 95% block-bootstrap bands for RMSE and bias of one key.
pub fn bootstrap_bands(blocks: &[BlockSums], resamples: usize, seed: u64) -> Option<(Band, Band)> {
    if blocks.len() < 2 || resamples == 0 {
        return None;
    }
    let dims = blocks[0].sum.len();
    let mut r = rng::stream(seed);
    let mut rmse = Vec::with_capacity(resamples);
    let mut bias = Vec::with_capacity(resamples);
    let mut sum = vec![0.0; dims];
    let mut sum_sq = vec![0.0; dims];
    for _ in 0..resamples {
        sum.iter_mut().for_each(|v| *v = 0.0);
        sum_sq.iter_mut().for_each(|v| *v = 0.0);
        let mut count = 0u64;
        for _ in 0..blocks.len() {
            let b = &blocks[r.random_range(0..blocks.len())];
            for i in 0..dims {
                sum[i] += b.sum[i];
                sum_sq[i] += b.sum_sq[i];
            }
            count += b.count;
        }
        let (a, b) = summarise(sum.iter().copied().zip(sum_sq.iter().copied()), count as f64, dims);
        rmse.push(a);
        bias.push(b);
    }
    let band = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let at = |q: f64| v[((q * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)];
        Band {
            lo: at(0.025),
            hi: at(0.975),
        }
    };
    Some((band(&mut rmse), band(&mut bias)))
}
