//! CSV and Matrix Market output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::driver::StudyRecord;
use crate::error::{Error, Result};
use crate::grid::DyadicGrid;
use crate::sparse::CsrMatrix;
use crate::FieldMatrix;

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

/// Study rows with a header line, columns in declaration order.
pub fn write_study<W: Write>(w: W, record: &StudyRecord) -> Result<()> {
    write_rows(w, &record.rows)
}

#[derive(Serialize)]
struct SolutionPoint {
    x: f64,
    t: f64,
    value: f64,
}

/// `(x, t, value)` triples, time-major.
pub fn write_solution<W: Write>(w: W, grid: &DyadicGrid, field: &FieldMatrix) -> Result<()> {
    crate::error::check_shape("solution export", grid.shape(), field.dim())?;
    let (xs, ts) = (grid.xs(), grid.ts());
    let points = ts.iter().enumerate().flat_map(|(k, &t)| {
        xs.iter().enumerate().map(move |(i, &x)| SolutionPoint { x, t, value: field[[i, k]] })
    });
    write_rows(w, points)
}

#[derive(Serialize)]
struct Eigenvalue {
    re: f64,
    im: f64,
}

pub fn write_spectrum<W: Write>(w: W, eigenvalues: &[Complex64]) -> Result<()> {
    write_rows(w, eigenvalues.iter().map(|z| Eigenvalue { re: z.re, im: z.im }))
}

/// Creates `path` and hands a buffered writer to `body`.
pub fn to_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_matrix_market_file(path: &Path, m: &CsrMatrix) -> Result<()> {
    to_file(path, |w| Ok(m.write_matrix_market(w)?))
}
