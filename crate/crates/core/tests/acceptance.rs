//! Acceptance suite. Each test prints one `PASS`/`FAIL` line for its
//! criterion, followed by the individual checks behind it.
//!
//! Run with `cargo test -p ensgrad --test acceptance -- --nocapture`.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ensgrad::estimators::{estimate, EstimatorKind as K, EstimatorSpec, Inputs};
use ensgrad::harness::descent::{DescentConfig, RastriginDemo};
use ensgrad::harness::stats::CellKey;
use ensgrad::harness::variance::measure_variance_reduction;
use ensgrad::harness::{
    aggregate, bootstrap_bands, run_bench, run_linear_check, select_best_lambda, Band, BenchConfig, LinearCheckConfig,
    ResultRow, SelectionMetric, TrialStats,
};
use ensgrad::linalg::{center_columns, sample_cross_cov, tikhonov_pinv, PinvConfig};
use ensgrad::objectives::central_difference;
use ensgrad::objectives::rastrigin::{rastrigin_blurred, rastrigin_blurred_grad, rastrigin_eval, rastrigin_grad};
use ensgrad::objectives::HermiteObjective;
use ensgrad::rng::{child_seed, stream};
use ensgrad::sampling::{draw_ensemble, recenter, GaussianSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

struct Check {
    label: String,
    ok: bool,
}

fn check(label: impl Into<String>, ok: bool) -> Check {
    Check {
        label: label.into(),
        ok,
    }
}

fn report(criterion: &str, title: &str, checks: &[Check], elapsed: Duration) {
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.ok).collect();
    let status = if failed.is_empty() { "PASS" } else { "FAIL" };
    println!(
        "{status} criterion {criterion}: {title} ({} of {} checks, {:.1} s)",
        checks.len() - failed.len(),
        checks.len(),
        elapsed.as_secs_f64()
    );
    for c in checks {
        println!("    [{}] {}", if c.ok { "ok" } else { "FAILED" }, c.label);
    }
    assert!(
        failed.is_empty(),
        "criterion {criterion} failed: {}",
        failed.iter().map(|c| c.label.as_str()).collect::<Vec<_>>().join("; ")
    );
}

// ---------------------------------------------------------------------------
// Hermite benchmark shared by criteria 3 and 4.

const TRIALS: usize = 10_000;
const GRID: [usize; 11] = [3, 4, 5, 6, 8, 10, 15, 20, 30, 50, 100];

struct Bench {
    stats: TrialStats,
    by_rmse: BTreeMap<CellKey, ResultRow>,
    by_bias: BTreeMap<CellKey, ResultRow>,
    resamples: usize,
    seed: u64,
    elapsed: Duration,
}

impl Bench {
    fn row(&self, k: K, order: usize, n: usize) -> &ResultRow {
        &self.by_rmse[&CellKey { estimator: k, order, n }]
    }

    fn bias_row(&self, k: K, order: usize, n: usize) -> &ResultRow {
        &self.by_bias[&CellKey { estimator: k, order, n }]
    }

    fn rmse(&self, k: K, order: usize, n: usize) -> f64 {
        self.row(k, order, n).rmse
    }

    fn band(&self, row: &ResultRow) -> (Band, Band) {
        let key = row.key();
        bootstrap_bands(
            self.stats.blocks(&key),
            self.resamples,
            child_seed(self.seed, row.n as u64),
        )
        .expect("enough blocks for a bootstrap")
    }

    /// Standard error of the dimension-averaged bias estimate.
    fn bias_se(&self, row: &ResultRow) -> f64 {
        let acc = self.stats.get(&row.key()).unwrap();
        let n = acc.count() as f64;
        (0..acc.dims())
            .map(|i| ((acc.mean_square(i) - acc.mean(i).powi(2)) / n).sqrt())
            .sum::<f64>()
            / acc.dims() as f64
    }
}

fn hermite_bench() -> &'static Bench {
    static BENCH: OnceLock<Bench> = OnceLock::new();
    BENCH.get_or_init(|| {
        let cfg = BenchConfig {
            n_trials: TRIALS,
            hermite_orders: vec![2, 3, 5],
            ensemble_sizes: GRID.to_vec(),
            ..BenchConfig::default()
        };
        let start = Instant::now();
        let stats = run_bench(&cfg, None, None).expect("benchmark runs");
        let elapsed = start.elapsed();
        assert!(stats.skipped().is_empty(), "skipped estimators: {:?}", stats.skipped());
        let rows = aggregate(&stats).unwrap();
        let keyed = |m| {
            select_best_lambda(&rows, m)
                .into_iter()
                .map(|r| (r.key().cell, r))
                .collect::<BTreeMap<_, _>>()
        };
        let bench = Bench {
            by_rmse: keyed(SelectionMetric::Rmse),
            by_bias: keyed(SelectionMetric::Bias),
            stats,
            resamples: cfg.bootstrap_resamples,
            seed: cfg.base_seed,
            elapsed,
        };
        print_table(&bench);
        bench
    })
}

fn print_table(b: &Bench) {
    for order in [2, 3, 5] {
        println!("  order {order}: best-lambda RMSE / bias");
        print!("  {:>12}", "N");
        for n in GRID {
            print!("{n:>9}");
        }
        println!();
        for k in K::ALL {
            print!("  {:>12}", k.id());
            for n in GRID {
                print!("{:>9.4}", b.rmse(k, order, n));
            }
            println!();
            print!("  {:>12}", "bias");
            for n in GRID {
                print!("{:>9.4}", b.bias_row(k, order, n).bias);
            }
            println!();
        }
    }
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_1_bilinear_identities() {
    let start = Instant::now();
    let res = run_linear_check(&LinearCheckConfig {
        dims: 5,
        seeds: 100,
        ensemble_size: 16,
        ..LinearCheckConfig::default()
    })
    .unwrap();
    let elapsed = start.elapsed();
    let get = |name: &str| res.iter().find(|r| r.name == name).unwrap();
    let mut checks: Vec<Check> = ["stosag_exact", "paired_error_formula", "decorr_eliminates_error"]
        .iter()
        .map(|n| check(format!("{n}: {}", get(n).detail), get(n).passed))
        .collect();
    checks.push(check(
        format!("runtime {:.2} s < 5 s", elapsed.as_secs_f64()),
        elapsed < Duration::from_secs(5),
    ));
    report(
        "1",
        "bilinear identity suite (d=5, 100 seeds, N=16, lambda=0)",
        &checks,
        elapsed,
    );
}

#[test]
fn criterion_2_algebraic_identities() {
    let start = Instant::now();
    let mut r = stream(2024);
    let (mut one_sided, mut two_sided) = (0.0f64, 0.0f64);
    for case in 0..100u64 {
        let d = r.random_range(1..=5);
        let n = r.random_range(3..=24);
        let order = r.random_range(0..=6);
        let lambda = [0.0, 1e-4, 1e-2, 0.3][case as usize % 4];
        let obj = HermiteObjective::new(order, d).unwrap();
        let xs = GaussianSpec::isotropic(DVector::from_fn(d, |i, _| i as f64 - 1.0), 0.25).unwrap();
        let us = GaussianSpec::isotropic(DVector::zeros(d), 0.01).unwrap();
        let seed = child_seed(99, case);
        let x = draw_ensemble(&xs, n, child_seed(seed, 0)).unwrap();
        let u = recenter(&draw_ensemble(&us, n, child_seed(seed, 1)).unwrap()).unwrap();
        let pool = recenter(&draw_ensemble(&us, 2 * n, child_seed(seed, 2)).unwrap()).unwrap();
        let inputs = Inputs::new(&x, &u).with_subsamples(&pool);
        let g = |k| {
            estimate(&obj, &inputs, &EstimatorSpec::new(k).with_lambda(lambda).unwrap())
                .unwrap()
                .grad
        };
        let rel = |a: DMatrix<f64>, b: DMatrix<f64>| (&a - &b).amax() / b.amax().max(1.0);
        let to_m = |v: nalgebra::RowDVector<f64>| DMatrix::from_row_slice(1, v.len(), v.as_slice());
        one_sided = one_sided.max(rel(to_m(g(K::OneSided)), to_m(g(K::Stosag))));
        two_sided = two_sided.max(rel(to_m(g(K::GenStosag)), to_m(g(K::TwoSided))));
    }

    // Aᵀ(AAᵀ)⁺ = A⁺, and (F·Ũ⁺)·(ŨŨᵀ/(N−1)) = F·Ũᵀ/(N−1)
    let (mut pinv_id, mut precond_id) = (0.0f64, 0.0f64);
    for case in 0..100 {
        let (rows, cols) = if case % 2 == 0 { (3, 7) } else { (7, 3) };
        let a: DMatrix<f64> = DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0));
        let mp = PinvConfig::moore_penrose();
        let lhs = a.transpose() * tikhonov_pinv(&(&a * a.transpose()), mp);
        let rhs = tikhonov_pinv(&a, mp);
        pinv_id = pinv_id.max((lhs - &rhs).amax() / rhs.amax().max(1.0));

        let (ut, _) = center_columns(&a).unwrap();
        let f = DMatrix::from_fn(2, cols, |_, _| r.random_range(-1.0..1.0));
        let cu = &ut * ut.transpose() / (cols - 1) as f64;
        let lhs = &f * tikhonov_pinv(&ut, mp) * cu;
        let rhs = sample_cross_cov(&f, &ut).unwrap();
        precond_id = precond_id.max((lhs - &rhs).amax() / rhs.amax().max(1.0));
    }
    let elapsed = start.elapsed();
    let checks = [
        check(
            format!("one_sided == stosag over 100 cases: max rel. diff {one_sided:.2e} <= 1e-12"),
            one_sided <= 1e-12,
        ),
        check(
            format!("gen_stosag(N_m=2) == two_sided over 100 cases: max rel. diff {two_sided:.2e} <= 1e-12"),
            two_sided <= 1e-12,
        ),
        check(
            format!("pseudo-inverse identity over 100 matrices: {pinv_id:.2e} <= 1e-10"),
            pinv_id <= 1e-10,
        ),
        check(
            format!("preconditioning identity over 100 matrices: {precond_id:.2e} <= 1e-10"),
            precond_id <= 1e-10,
        ),
        check(
            format!("runtime {:.2} s < 5 s", elapsed.as_secs_f64()),
            elapsed < Duration::from_secs(5),
        ),
    ];
    report("2", "algebraic identities", &checks, elapsed);
}

#[test]
fn criterion_3_hermite_rmse_orderings() {
    let b = hermite_bench();
    let mut checks = Vec::new();

    // (a) paired is the worst; averaging per-group LLS gradients is the
    // one method singled out as performing even worse, so it is excluded
    let mut worst_fail = Vec::new();
    for order in [2, 3, 5] {
        for n in GRID.iter().copied().filter(|&n| n >= 6) {
            let p = b.rmse(K::Paired, order, n);
            for k in K::ALL.into_iter().filter(|&k| k != K::Paired && k != K::AverageLls) {
                if b.rmse(k, order, n) > p {
                    worst_fail.push(format!("{k} o{order} N{n}"));
                }
            }
        }
    }
    checks.push(check(
        format!("(a) paired has the highest RMSE at every N >= 6; violations: {worst_fail:?}"),
        worst_fail.is_empty(),
    ));

    // (b) avg_grad is the best everywhere
    let mut best_fail = Vec::new();
    for order in [2, 3, 5] {
        for n in GRID {
            let a = b.rmse(K::AvgGrad, order, n);
            for k in K::ALL.into_iter().filter(|&k| k != K::AvgGrad) {
                if b.rmse(k, order, n) < a {
                    best_fail.push(format!("{k} o{order} N{n}"));
                }
            }
        }
    }
    checks.push(check(
        format!("(b) avg_grad has the lowest RMSE everywhere; violations: {best_fail:?}"),
        best_fail.is_empty(),
    ));

    // (c) StoSAG family and decorr within 15% of each other at N >= 10
    let family = [
        K::Stosag,
        K::GenStosag,
        K::TwoSided,
        K::Mirrored2s,
        K::OneSided,
        K::Decorr,
    ];
    let mut spread_worst = (0.0, 0, 0);
    for order in [2, 3, 5] {
        for n in GRID.iter().copied().filter(|&n| n >= 10) {
            let v: Vec<f64> = family.iter().map(|&k| b.rmse(k, order, n)).collect();
            let ratio = v.iter().cloned().fold(f64::MIN, f64::max) / v.iter().cloned().fold(f64::MAX, f64::min);
            if ratio > spread_worst.0 {
                spread_worst = (ratio, order, n);
            }
        }
    }
    checks.push(check(
        format!(
            "(c) StoSAG family + decorr max/min RMSE {:.3} (order {}, N={}) <= 1.15",
            spread_worst.0, spread_worst.1, spread_worst.2
        ),
        spread_worst.0 <= 1.15,
    ));

    // (d) fragile flattens between N=30 and N=100, stosag keeps falling
    for order in [3, 5] {
        let drop = |k| 1.0 - b.rmse(k, order, 100) / b.rmse(k, order, 30);
        let (f, s) = (drop(K::Fragile), drop(K::Stosag));
        checks.push(check(
            format!(
                "(d) order {order}: fragile RMSE drop 30->100 {:.1}% < 10%, stosag {:.1}% > 30%",
                100.0 * f,
                100.0 * s
            ),
            f < 0.10 && s > 0.30,
        ));
    }

    // (e) fragile beats stosag at moderate N for order >= 3
    for order in [3, 5] {
        let losses: Vec<usize> = GRID
            .iter()
            .copied()
            .filter(|&n| (6..=30).contains(&n))
            .filter(|&n| b.rmse(K::Fragile, order, n) >= b.rmse(K::Stosag, order, n))
            .collect();
        checks.push(check(
            format!("(e) order {order}: fragile RMSE < stosag for N in 6..=30; fails at N = {losses:?}"),
            losses.is_empty(),
        ));
    }

    // (f) order 2: fragile inside plain_lls's bootstrap band
    let outside: Vec<usize> = GRID
        .iter()
        .copied()
        .filter(|&n| {
            let (band, _) = b.band(b.row(K::PlainLls, 2, n));
            !band.contains(b.rmse(K::Fragile, 2, n))
        })
        .collect();
    checks.push(check(
        format!("(f) order 2: fragile RMSE within plain_lls 95% band at every N; outside at N = {outside:?}"),
        outside.is_empty(),
    ));

    report(
        "3",
        "Hermite benchmark RMSE orderings (1e4 trials, orders 2/3/5)",
        &checks,
        b.elapsed,
    );
}

#[test]
fn criterion_4_bias() {
    let b = hermite_bench();
    let mut checks = Vec::new();
    let fr = b.row(K::Fragile, 3, 100);
    let share = (fr.bias / fr.rmse).powi(2);
    checks.push(check(
        format!("fragile bias^2/rmse^2 at N=100 = {share:.3} > 0.8"),
        share > 0.8,
    ));

    let worse: Vec<String> = GRID
        .iter()
        .filter_map(|&n| {
            let p = b.bias_row(K::Paired, 3, n);
            let s = b.bias_row(K::Stosag, 3, n);
            let limit = s.bias + 3.0 * b.bias_se(p);
            (p.bias > limit).then(|| format!("N={n}: {:.4} > {:.4}", p.bias, limit))
        })
        .collect();
    checks.push(check(
        format!("paired bias <= stosag bias + 3 SE at every N; violations: {worse:?}"),
        worse.is_empty(),
    ));

    let mean_bias = |k| GRID.iter().map(|&n| b.bias_row(k, 3, n).bias).sum::<f64>() / GRID.len() as f64;
    let (d, s) = (mean_bias(K::Decorr), mean_bias(K::Stosag));
    checks.push(check(
        format!("decorr mean bias {d:.4} >= stosag mean bias {s:.4}"),
        d >= s,
    ));
    report("4", "bias at order 3 (1e4 trials)", &checks, b.elapsed);
}

#[test]
fn criterion_5_preconditioned_unbiasedness() {
    let start = Instant::now();
    let res = run_linear_check(&LinearCheckConfig {
        seeds: 10_000,
        ..LinearCheckConfig::default()
    })
    .unwrap();
    let checks: Vec<Check> = ["paired_preconditioned_unbiased", "stosag_preconditioned_unbiased"]
        .iter()
        .map(|name| {
            let r = res.iter().find(|r| r.name == *name).unwrap();
            check(format!("{name}: {}", r.detail), r.passed)
        })
        .collect();
    report(
        "5",
        "preconditioned paired/stosag mean within 3 SE of 1'B C_u (1e4 seeds)",
        &checks,
        start.elapsed(),
    );
}

#[test]
fn criterion_6_variance_reduction_law() {
    let start = Instant::now();
    let mut checks = Vec::new();
    for (i, rho) in [0.5, 0.7, 0.9].into_iter().enumerate() {
        for (j, r) in [0.3, 0.6, 0.9].into_iter().enumerate() {
            let m = measure_variance_reduction(rho, r, 4_000_000, child_seed(6, (3 * i + j) as u64));
            checks.push(check(
                format!(
                    "rho={rho} r={r}: measured {:.4}, predicted {:.4}, rel. error {:.2}%",
                    m.measured,
                    m.predicted,
                    100.0 * m.relative_error()
                ),
                m.relative_error() <= 0.05,
            ));
        }
    }
    report(
        "6",
        "variance reduction r(2 rho - r) within 5%",
        &checks,
        start.elapsed(),
    );
}

#[test]
fn criterion_7_plain_lls_consistency() {
    let start = Instant::now();
    let sizes = [25usize, 50, 100, 200, 400];
    let cfg = BenchConfig {
        n_trials: TRIALS,
        hermite_orders: vec![3],
        ensemble_sizes: sizes.to_vec(),
        estimators: vec![K::PlainLls],
        ..BenchConfig::default()
    };
    let rows = aggregate(&run_bench(&cfg, None, None).unwrap()).unwrap();
    let best = select_best_lambda(&rows, SelectionMetric::Rmse);
    let pts: Vec<(f64, f64)> = best.iter().map(|r| ((r.n as f64).ln(), r.rmse.ln())).collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let slope =
        pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let detail: Vec<String> = best.iter().map(|r| format!("N={} rmse={:.4}", r.n, r.rmse)).collect();
    let checks = [
        check(
            format!("log-log slope {slope:.3} in [-0.7, -0.3]"),
            (-0.7..=-0.3).contains(&slope),
        ),
        check(format!("points: {}", detail.join(", ")), true),
    ];
    report(
        "7",
        "plain_lls RMSE consistency slope, order 3",
        &checks,
        start.elapsed(),
    );
}

#[test]
fn criterion_8_rastrigin_demo() {
    let start = Instant::now();
    let mut r = stream(8);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let u: [f64; 2] = [r.random_range(-4.0..4.0), r.random_range(-4.0..4.0)];
        let pairs = [
            (rastrigin_grad(&u), central_difference(rastrigin_eval, &u, 1e-5)),
            (
                rastrigin_blurred_grad(&u),
                central_difference(rastrigin_blurred, &u, 1e-5),
            ),
        ];
        for (g, fd) in pairs {
            for i in 0..2 {
                worst = worst.max((g[i] - fd[i]).abs() / g[i].abs().max(1.0));
            }
        }
    }
    let cfg = DescentConfig::default();
    let demo = RastriginDemo::run(&cfg).unwrap();
    let exact = RastriginDemo::mean_final_loss(&demo.exact);
    let blurred = RastriginDemo::mean_final_loss(&demo.blurred);
    let checks = [
        check(
            format!("gradients match central differences at 20 points: max rel. error {worst:.2e} <= 1e-6"),
            worst <= 1e-6,
        ),
        check(
            format!(
                "step {} x {} steps from 5 starts: mean final loss blurred {blurred:.4} < exact {exact:.4}",
                cfg.step, cfg.n_steps
            ),
            blurred < exact,
        ),
    ];
    report("8", "Rastrigin steepest descent demo", &checks, start.elapsed());
}
