//! CSV formats shared with the command-line tool.
//!
//! Ensemble files have a header `dim_0,...,dim_{d-1}` and one member per
//! row. Value tables are headerless rows of decimal numbers.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("CSV: {e}"))
}

fn parse_field<T: Real>(field: &str, line: u64) -> Result<T> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Invalid(format!("CSV line {line}: `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::NonFinite("CSV input"));
    }
    Ok(T::lit(v))
}

/// Reads an ensemble file into a `d × N` member matrix.
pub fn read_ensemble_csv<T: Real, R: Read>(reader: R) -> Result<DMatrix<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let d = headers.len();
    for (i, h) in headers.iter().enumerate() {
        if h.trim() != format!("dim_{i}") {
            return Err(Error::Invalid(format!(
                "ensemble header column {i} is `{h}`, expected `dim_{i}`"
            )));
        }
    }
    let mut data = Vec::new();
    let mut n = 0;
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != d {
            return Err(Error::dims("ensemble row", d, record.len()));
        }
        for field in record.iter() {
            data.push(parse_field::<T>(field, line)?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InsufficientSamples {
            context: "ensemble file",
            required: 1,
            found: 0,
        });
    }
    // rows of the file are members, i.e. columns of the matrix
    Ok(DMatrix::from_column_slice(d, n, &data))
}

pub fn write_ensemble_csv<T: Real, W: Write>(members: &DMatrix<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record((0..members.nrows()).map(|i| format!("dim_{i}")))
        .map_err(csv_err)?;
    for col in members.column_iter() {
        w.write_record(col.iter().map(|x| x.as_f64().to_string()))
            .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// Reads a headerless numeric table; rows of the file are matrix rows.
pub fn read_table_csv<T: Real, R: Read>(reader: R) -> Result<DMatrix<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut rows: Vec<Vec<T>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|f| parse_field::<T>(f, line))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::dims("table row", first.len(), row.len()));
            }
        }
        rows.push(row);
    }
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(Error::Invalid("empty value table".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn write_table_csv<T: Real, W: Write>(table: &DMatrix<T>, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in table.row_iter() {
        w.write_record(row.iter().map(|x| x.as_f64().to_string()))
            .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}
