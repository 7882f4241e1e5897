use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ensgrad::harness::output::read_results_csv;
use ensgrad::harness::BenchConfig;
use tempfile::TempDir;

fn ensgrad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ensgrad"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn bench(dir: &Path, out: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = write(dir, &format!("{out}.json"), config);
    let out = dir.join(out);
    let mut args = vec!["bench", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"];
    args.extend_from_slice(extra);
    ensgrad(&args)
}

#[test]
fn default_config_round_trips() {
    let o = ensgrad(&["bench", "--print-default-config"]);
    assert!(o.status.success());
    assert_eq!(BenchConfig::from_json(&stdout(&o)).unwrap(), BenchConfig::default());
}

#[test]
fn order_zero_bench_has_zero_error() {
    let dir = TempDir::new().unwrap();
    let o = bench(
        dir.path(),
        "out",
        r#"{"hermite_orders": [0], "ensemble_sizes": [6], "estimators": ["stosag"]}"#,
        &["--trials", "2"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    let header = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(header.starts_with("estimator,order,N,lambda,rmse,bias,evals,trials\n"));
    let rows = read_results_csv(fs::File::open(out.join("results.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 7);
    for r in &rows {
        assert!(r.rmse < 1e-12 && r.bias < 1e-12, "{r:?}");
        assert_eq!(r.trials, 2);
    }
    let best = read_results_csv(fs::File::open(out.join("best_rmse.csv")).unwrap()).unwrap();
    assert_eq!(best.len(), 1);

    let manifests: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name() == "manifest.json")
        .collect();
    assert_eq!(manifests.len(), 1);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["n_trials"], 2);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    for f in m["outputs"].as_array().unwrap() {
        assert!(out.join(f.as_str().unwrap()).exists());
    }
}

#[test]
fn bench_output_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"n_trials": 40, "block_size": 7, "hermite_orders": [3], "ensemble_sizes": [4, 8], "lambda_grid": [0.0, 0.1]}"#;
    assert!(bench(dir.path(), "a", cfg, &["--workers", "1"]).status.success());
    assert!(bench(dir.path(), "b", cfg, &["--workers", "3"]).status.success());
    for f in ["results.csv", "best_rmse.csv", "best_bias.csv", "best_rmse_bands.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let ma: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    let mb: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("b/manifest.json")).unwrap()).unwrap();
    assert_eq!(ma["config_sha256"], mb["config_sha256"]);
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let o = bench(dir.path(), "syntax", "{\n  \"n_trials\": 10,\n  \"dims\": oops\n}", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = bench(dir.path(), "unknown", r#"{"n_trails": 10}"#, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n_trails"), "{}", stderr(&o));

    let o = bench(dir.path(), "range", r#"{"hermite_orders": [7]}"#, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hermite_orders"), "{}", stderr(&o));

    let o = bench(dir.path(), "trials", "{}", &["--trials", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n_trials"), "{}", stderr(&o));
}

#[test]
fn rastrigin_zero_step_stays_put() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r");
    let o = ensgrad(&[
        "rastrigin",
        "--out",
        out.to_str().unwrap(),
        "--step",
        "0",
        "--steps",
        "4",
        "--grid",
        "5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out.join("trajectory_exact.csv"));
    assert_eq!(rows.len(), 5 * 5);
    for chunk in rows.chunks(5) {
        for r in chunk {
            assert_eq!((r[2], r[3]), (chunk[0][2], chunk[0][3]));
        }
    }
    assert_eq!(csv_rows(&out.join("grid_blurred.csv")).len(), 25);
}

#[test]
fn rastrigin_blurred_descent_reaches_the_central_basin() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r");
    let o = ensgrad(&["rastrigin", "--out", out.to_str().unwrap(), "--grid", "41"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let last = |name: &str| -> Vec<Vec<f64>> {
        let rows = csv_rows(&out.join(name));
        rows.chunks(301).map(|c| c.last().unwrap().clone()).collect()
    };
    let blurred = last("trajectory_blurred.csv");
    assert_eq!(blurred.len(), 5);
    for r in &blurred {
        assert!(r[2].hypot(r[3]) < 0.5, "{r:?}");
    }
    let exact = last("trajectory_exact.csv");
    let mean = |v: &[Vec<f64>]| v.iter().map(|r| r[4]).sum::<f64>() / v.len() as f64;
    assert!(mean(&blurred) < mean(&exact));

    // along each axis the blurred surface rises monotonically away from 0
    let grid = csv_rows(&out.join("grid_blurred.csv"));
    for axis in 0..2 {
        let mut line: Vec<(f64, f64)> = grid
            .iter()
            .filter(|r| r[1 - axis].abs() < 1e-12 && r[axis] >= 0.0)
            .map(|r| (r[axis], r[2]))
            .collect();
        line.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(line.len(), 21);
        assert!(line.windows(2).all(|w| w[1].1 > w[0].1), "axis {axis}: {line:?}");
    }
}

#[test]
fn linear_check_passes_and_catches_sabotage() {
    let o = ensgrad(&["linear-check", "--dims", "5", "--seeds", "100"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
    assert!(stdout(&o).contains("PASS stosag_exact"));

    let o = ensgrad(&["linear-check", "--zero-a", "--seeds", "20"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("PASS paired_exact"), "{}", stdout(&o));

    let o = ensgrad(&["linear-check", "--seeds", "20", "--flip-correction-sign"]);
    assert!(!o.status.success());
    assert!(stdout(&o).contains("FAIL stosag_exact"), "{}", stdout(&o));
}

fn ensemble_csv(cols: &[Vec<f64>]) -> String {
    let d = cols[0].len();
    let mut s = (0..d).map(|i| format!("dim_{i}")).collect::<Vec<_>>().join(",") + "\n";
    for c in cols {
        s += &c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        s += "\n";
    }
    s
}

fn grad_row(o: &Output) -> Vec<f64> {
    let out = stdout(o);
    let mut lines = out.lines();
    assert!(lines.next().unwrap().starts_with("g_0"));
    lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect()
}

fn members(n: usize, d: usize, scale: f64, phase: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|j| {
            (0..d)
                .map(|i| scale * ((1.3 * j as f64 + 0.7 * i as f64 + phase).sin() + 0.1 * (j * i) as f64))
                .collect()
        })
        .collect()
}

#[test]
fn gradient_recovers_linear_coefficients() {
    let dir = TempDir::new().unwrap();
    let coef = [1.5, -2.0, 0.25];
    let u = members(8, 3, 1.0, 0.0);
    let values: Vec<String> = u
        .iter()
        .map(|c| (3.0 + c.iter().zip(coef).map(|(a, b)| a * b).sum::<f64>()).to_string())
        .collect();
    let uf = write(dir.path(), "u.csv", &ensemble_csv(&u));
    let vf = write(dir.path(), "v.csv", &(values.join(",") + "\n"));
    for est in ["plain_lls", "fragile", "paired"] {
        let o = ensgrad(&["gradient", "--ensemble-u", &uf, "--values", &vf, "--estimator", est]);
        assert!(o.status.success(), "{est}: {}", stderr(&o));
        for (g, c) in grad_row(&o).iter().zip(coef) {
            assert!((g - c).abs() < 1e-10, "{est}: {g} vs {c}");
        }
        assert!(stderr(&o).contains("8 objective evaluations"), "{}", stderr(&o));
    }
}

#[test]
fn gradient_rejects_mismatched_shapes() {
    let dir = TempDir::new().unwrap();
    let uf = write(dir.path(), "u.csv", &ensemble_csv(&members(5, 2, 1.0, 0.0)));
    let vf = write(dir.path(), "v.csv", "1,2,3,4,5\n1,2,3,4,5\n1,2,3,4,5\n");
    let o = ensgrad(&[
        "gradient",
        "--ensemble-u",
        &uf,
        "--values",
        &vf,
        "--estimator",
        "paired",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("expected 1x5 or 5x5, found 3x5"), "{}", stderr(&o));

    let vf = write(dir.path(), "w.csv", "1,2,3,4\n");
    let o = ensgrad(&[
        "gradient",
        "--ensemble-u",
        &uf,
        "--values",
        &vf,
        "--estimator",
        "plain_lls",
    ]);
    assert_eq!(o.status.code(), Some(2));

    let vf = write(dir.path(), "z.csv", "1,2,3,4,5\n");
    let o = ensgrad(&[
        "gradient",
        "--ensemble-u",
        &uf,
        "--values",
        &vf,
        "--estimator",
        "stosag",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("stosag"), "{}", stderr(&o));
}

#[test]
fn stosag_from_bilinear_files_gives_exact_gradient() {
    let dir = TempDir::new().unwrap();
    let (n, d) = (9, 3);
    let a = [[0.5, -1.0, 2.0], [1.0, 0.3, -0.7], [-0.2, 0.8, 1.1]];
    let b = [[1.0, 2.0, -1.0], [0.5, -0.5, 0.25], [3.0, 0.0, 1.0]];
    let grad: Vec<f64> = (0..d).map(|j| (0..d).map(|i| b[i][j]).sum()).collect();
    let ell = |x: &[f64], u: &[f64]| -> f64 {
        (0..d)
            .map(|i| (0..d).map(|j| a[i][j] * x[j] + b[i][j] * u[j]).sum::<f64>())
            .sum()
    };
    let u = members(n, d, 0.1, 0.4);
    let mu: Vec<f64> = (0..d).map(|i| u.iter().map(|c| c[i]).sum::<f64>() / n as f64).collect();
    let x = members(n, d, 0.5, 2.0);
    let diag: Vec<String> = (0..n).map(|k| ell(&x[k], &u[k]).to_string()).collect();
    let base: Vec<String> = (0..n).map(|k| ell(&x[k], &mu).to_string()).collect();

    let uf = write(dir.path(), "u.csv", &ensemble_csv(&u));
    let vf = write(dir.path(), "v.csv", &(diag.join(",") + "\n"));
    let mf = write(dir.path(), "m.csv", &(base.join(",") + "\n"));
    let o = ensgrad(&[
        "gradient",
        "--ensemble-u",
        &uf,
        "--values",
        &vf,
        "--mean-values",
        &mf,
        "--estimator",
        "stosag",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for (g, t) in grad_row(&o).iter().zip(&grad) {
        assert!((g - t).abs() < 1e-9, "{g} vs {t}");
    }
    assert!(stderr(&o).contains("9 cached"), "{}", stderr(&o));

    // paired picks up the x-dependence instead
    let o = ensgrad(&[
        "gradient",
        "--ensemble-u",
        &uf,
        "--values",
        &vf,
        "--estimator",
        "paired",
    ]);
    let paired = grad_row(&o);
    assert!(paired.iter().zip(&grad).any(|(g, t)| (g - t).abs() > 1e-3));
}

#[test]
fn gradient_with_builtin_objective() {
    let dir = TempDir::new().unwrap();
    let u = members(12, 2, 0.2, 0.0);
    let uf = write(dir.path(), "u.csv", &ensemble_csv(&u));
    let o = ensgrad(&[
        "gradient",
        "--ensemble-u",
        &uf,
        "--objective",
        "rastrigin",
        "--estimator",
        "plain_lls",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(grad_row(&o).len(), 2);

    let o = ensgrad(&[
        "gradient",
        "--ensemble-u",
        &uf,
        "--objective",
        "hermite2",
        "--estimator",
        "avg_grad",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--ensemble-x"));

    let xf = write(dir.path(), "x.csv", &ensemble_csv(&members(12, 2, 0.5, 1.0)));
    let o = ensgrad(&[
        "gradient",
        "--ensemble-u",
        &uf,
        "--ensemble-x",
        &xf,
        "--objective",
        "hermite1",
        "--estimator",
        "stosag",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for g in grad_row(&o) {
        assert!((g - 1.0).abs() < 1e-10, "{g}");
    }

    let o = ensgrad(&[
        "gradient",
        "--ensemble-u",
        &uf,
        "--objective",
        "sphere",
        "--estimator",
        "paired",
    ]);
    assert_eq!(o.status.code(), Some(2));
}
