use std::fs;
use std::io::Write;
use std::process::ExitCode;

use anyhow::Context;
use ensgrad::harness::output::write_results_csv;
use ensgrad::harness::{aggregate, bootstrap_bands, run_bench, select_best_lambda, BenchConfig, SelectionMetric};
use ensgrad::rng::child_seed;

use crate::manifest::{self, RunManifest};
use crate::{BenchArgs, Failure};

fn load_config(args: &BenchArgs) -> Result<BenchConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::usage)?;
            BenchConfig::from_json(&text)
                .with_context(|| format!("invalid config {}", path.display()))
                .map_err(Failure::usage)?
        }
        None => BenchConfig::default(),
    };
    if let Some(t) = args.trials {
        cfg.n_trials = t;
    }
    cfg.validate().context("invalid config").map_err(Failure::usage)?;
    Ok(cfg)
}

pub fn run(args: &BenchArgs) -> Result<ExitCode, Failure> {
    if args.print_default_config {
        println!("{}", BenchConfig::default().to_json());
        return Ok(ExitCode::SUCCESS);
    }
    let cfg = load_config(args)?;
    let started = manifest::now();
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let quiet = args.quiet;
    let progress = move |done: usize, total: usize| {
        if !quiet {
            eprint!("\rcells {done}/{total}");
            if done == total {
                eprintln!();
            }
        }
    };
    let stats = run_bench(&cfg, args.workers, Some(&progress))?;
    let rows = aggregate(&stats)?;

    let mut m = RunManifest::new("bench", serde_json::to_value(&cfg)?, started);
    let dir = args.out.as_path();
    write_results_csv(&rows, manifest::create(dir, "results.csv", &mut m.outputs)?)?;
    let best_rmse = select_best_lambda(&rows, SelectionMetric::Rmse);
    write_results_csv(&best_rmse, manifest::create(dir, "best_rmse.csv", &mut m.outputs)?)?;
    write_results_csv(
        &select_best_lambda(&rows, SelectionMetric::Bias),
        manifest::create(dir, "best_bias.csv", &mut m.outputs)?,
    )?;

    let mut bands = std::io::BufWriter::new(manifest::create(dir, "best_rmse_bands.csv", &mut m.outputs)?);
    writeln!(bands, "estimator,order,N,lambda,rmse_lo,rmse_hi,bias_lo,bias_hi")?;
    for (i, r) in best_rmse.iter().enumerate() {
        let seed = child_seed(cfg.base_seed ^ 0xb007, i as u64);
        if let Some((rm, bi)) = bootstrap_bands(stats.blocks(&r.key()), cfg.bootstrap_resamples, seed) {
            writeln!(
                bands,
                "{},{},{},{},{},{},{},{}",
                r.estimator, r.order, r.n, r.lambda, rm.lo, rm.hi, bi.lo, bi.hi
            )?;
        }
    }
    bands.flush()?;

    let mut code = ExitCode::SUCCESS;
    for (cell, skip) in stats.skipped() {
        let note = format!(
            "{} order {} N {}: skipped in {} trials, {}",
            cell.estimator, cell.order, cell.n, skip.trials, skip.reason
        );
        eprintln!("warning: {note}");
        m.notes.push(note);
        code = ExitCode::FAILURE;
    }
    m.write(dir)?;
    Ok(code)
}
