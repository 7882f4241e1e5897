use std::fs;
use std::process::ExitCode;

use anyhow::Context;
use ensgrad::harness::output::{write_grid_csv, write_trajectory_csv};
use ensgrad::harness::{DescentConfig, RastriginDemo};
use ensgrad::objectives::rastrigin::{rastrigin_blurred, rastrigin_eval};

use crate::manifest::{self, RunManifest};
use crate::{Failure, RastriginArgs};

const GRID_HALF_WIDTH: f64 = 5.0;

pub fn run(args: &RastriginArgs) -> Result<ExitCode, Failure> {
    let cfg = DescentConfig {
        step: args.step,
        n_steps: args.steps,
        ..DescentConfig::default()
    };
    cfg.validate().map_err(Failure::usage)?;
    let started = manifest::now();
    let demo = RastriginDemo::run(&cfg)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let config = serde_json::json!({
        "step": cfg.step,
        "n_steps": cfg.n_steps,
        "starts": cfg.starts,
        "grid": args.grid,
        "grid_half_width": GRID_HALF_WIDTH,
    });
    let mut m = RunManifest::new("rastrigin", config, started);
    let dir = args.out.as_path();
    write_trajectory_csv(
        &demo.exact,
        manifest::create(dir, "trajectory_exact.csv", &mut m.outputs)?,
    )?;
    write_trajectory_csv(
        &demo.blurred,
        manifest::create(dir, "trajectory_blurred.csv", &mut m.outputs)?,
    )?;
    let (lo, hi) = (-GRID_HALF_WIDTH, GRID_HALF_WIDTH);
    write_grid_csv(
        rastrigin_eval,
        lo,
        hi,
        args.grid,
        manifest::create(dir, "grid_exact.csv", &mut m.outputs)?,
    )?;
    write_grid_csv(
        rastrigin_blurred,
        lo,
        hi,
        args.grid,
        manifest::create(dir, "grid_blurred.csv", &mut m.outputs)?,
    )?;

    let exact = RastriginDemo::mean_final_loss(&demo.exact);
    let blurred = RastriginDemo::mean_final_loss(&demo.blurred);
    println!("mean final loss: exact gradient {exact:.6}, blurred gradient {blurred:.6}");
    m.notes.push(format!("mean final loss exact={exact} blurred={blurred}"));
    m.write(dir)?;
    Ok(ExitCode::SUCCESS)
}
