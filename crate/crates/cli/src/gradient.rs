use std::fs::File;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context};
use ensgrad::estimators::{estimate, from_values, EstimatorSpec, Inputs};
use ensgrad::io::{read_ensemble_csv, read_table_csv};
use ensgrad::objectives::{HermiteObjective, Objective, RastriginObjective};
use ensgrad::{Ensemble, GradientEstimate};
use nalgebra::{DMatrix, DVector, RowDVector};

use crate::{Failure, GradientArgs};

fn open(path: &Path) -> anyhow::Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn ensemble(path: &Path) -> anyhow::Result<Ensemble<f64>> {
    let members = read_ensemble_csv(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    Ok(Ensemble::from_members(members)?)
}

fn table(path: &Path) -> anyhow::Result<DMatrix<f64>> {
    read_table_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn builtin(name: &str, dims: usize) -> anyhow::Result<Box<dyn Objective<f64>>> {
    if name == "rastrigin" {
        return Ok(Box::new(RastriginObjective));
    }
    if let Some(order) = name.strip_prefix("hermite").and_then(|k| k.parse().ok()) {
        return Ok(Box::new(HermiteObjective::new(order, dims)?));
    }
    bail!("unknown objective `{name}` (expected `hermite<k>` or `rastrigin`)")
}

fn compute(args: &GradientArgs) -> anyhow::Result<GradientEstimate<f64>> {
    let spec = EstimatorSpec::new(args.estimator)
        .with_lambda(args.lambda)?
        .preconditioned(args.precondition)
        .with_subsample_size(args.subsample_size);
    let u = ensemble(&args.ensemble_u)?;
    if let Some(path) = &args.values {
        let values = table(path)?;
        let mean = match &args.mean_values {
            Some(p) => {
                let t = table(p)?;
                if t.nrows() != 1 {
                    bail!("mean values: expected a single row, found {} rows", t.nrows());
                }
                Some(RowDVector::from_iterator(t.ncols(), t.iter().copied()))
            }
            None => None,
        };
        return Ok(from_values(&values, &u, mean.as_ref(), &spec)?);
    }

    let name = args
        .objective
        .as_deref()
        .expect("clap enforces --values or --objective");
    let objective = builtin(name, u.dim())?;
    let x = match &args.ensemble_x {
        Some(p) => ensemble(p)?,
        None if objective.dim_x() == 0 => Ensemble::new(DMatrix::zeros(0, u.size()), DVector::zeros(0))?,
        None => bail!("objective `{name}` needs --ensemble-x"),
    };
    let pool = args.subsamples.as_deref().map(ensemble).transpose()?;
    let mut inputs = Inputs::new(&x, &u);
    if let Some(p) = &pool {
        inputs = inputs.with_subsamples(p);
    }
    Ok(estimate(objective.as_ref(), &inputs, &spec)?)
}

pub fn run(args: &GradientArgs) -> Result<ExitCode, Failure> {
    let g = compute(args).map_err(Failure::usage)?;
    let header: Vec<String> = (0..g.grad.len()).map(|i| format!("g_{i}")).collect();
    let row: Vec<String> = g.grad.iter().map(|v| v.to_string()).collect();
    println!("{}", header.join(","));
    println!("{}", row.join(","));
    eprintln!(
        "{} (lambda {}{}): {} objective evaluations charged, {} cached baseline evaluations not charged",
        g.estimator,
        g.lambda,
        if g.preconditioned { ", preconditioned" } else { "" },
        g.evals,
        g.cached_evals
    );
    Ok(ExitCode::SUCCESS)
}
