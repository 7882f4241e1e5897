//! CSV tables written by the benchmark and the descent demo.

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::descent::{RastriginDemo, Trajectory};
use super::stats::ResultRow;

pub const RESULTS_HEADER: [&str; 8] = ["estimator", "order", "N", "lambda", "rmse", "bias", "evals", "trials"];
pub const TRAJECTORY_HEADER: [&str; 6] = ["start_id", "step", "u1", "u2", "loss_exact", "loss_blurred"];

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("CSV: {e}"))
}

pub fn write_results_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

pub fn read_results_csv<R: Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?;
    if header.iter().ne(RESULTS_HEADER) {
        return Err(Error::Invalid(format!("unexpected results header: {header:?}")));
    }
    rdr.deserialize().map(|r| r.map_err(csv_err)).collect()
}

pub fn write_trajectory_csv<W: Write>(trajectories: &[Trajectory<f64>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRAJECTORY_HEADER).map_err(csv_err)?;
    for row in RastriginDemo::rows(trajectories) {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// Values of `f` on a regular `steps × steps` grid over `[lo, hi]²`.
pub fn write_grid_csv<W: Write>(f: impl Fn(&[f64]) -> f64, lo: f64, hi: f64, steps: usize, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["u1", "u2", "loss"]).map_err(csv_err)?;
    let h = (hi - lo) / (steps.max(2) - 1) as f64;
    for i in 0..steps {
        for j in 0..steps {
            let u = [lo + h * i as f64, lo + h * j as f64];
            w.serialize((u[0], u[1], f(&u))).map_err(csv_err)?;
        }
    }
    w.flush().map_err(csv_err)
}
