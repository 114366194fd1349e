//! CSV encodings for dense matrices.
//!
//! Complex `p x p` matrices are written one matrix row per line with real and
//! imaginary parts interleaved under the header `re_0,im_0,re_1,im_1,...`.
//! Real matrices use the header `c_0,c_1,...`. Values round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SddError};

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| SddError::io(path, e))?,
    ))
}

pub fn write_complex_csv(m: &DMatrix<Complex64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let io = |e| SddError::io(path, e);
    let header: Vec<String> = (0..m.ncols())
        .flat_map(|j| [format!("re_{j}"), format!("im_{j}")])
        .collect();
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for row in m.row_iter() {
        let cells: Vec<String> = row
            .iter()
            .flat_map(|z| [format!("{:?}", z.re), format!("{:?}", z.im)])
            .collect();
        writeln!(out, "{}", cells.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_real_csv(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let io = |e| SddError::io(path, e);
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("c_{j}")).collect();
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", cells.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => SddError::io(path, io),
            other => SddError::Structure(format!("{other:?}")),
        })?;
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| SddError::Structure(e.to_string()))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>().map_err(|_| SddError::Parse {
                    row: r,
                    column: c,
                    message: format!("not a number: {cell:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_real_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let rows = read_rows(path.as_ref())?;
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn read_complex_csv(path: impl AsRef<Path>) -> Result<DMatrix<Complex64>> {
    let path = path.as_ref();
    let rows = read_rows(path)?;
    let width = rows.first().map_or(0, Vec::len);
    if width % 2 != 0 {
        return Err(SddError::Structure(format!(
            "{}: odd number of columns in complex matrix",
            path.display()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), width / 2, |i, j| {
        Complex64::new(rows[i][2 * j], rows[i][2 * j + 1])
    }))
}
