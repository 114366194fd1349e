//! Multivariate time-series panels: CSV ingestion, de-meaning and segmentation.
//!
//! A panel stores one experimental condition as an `n x p` matrix with time
//! running down the rows. Panels are immutable once built; every operation
//! returns a new panel.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Result, SddError};

/// Orientation of the numeric block in a CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    RowsAreTime,
    RowsAreChannels,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    data: DMatrix<f64>,
    channel_names: Vec<String>,
    sampling_rate_hz: Option<f64>,
    condition_label: String,
}

impl TimeSeriesPanel {
    /// Builds a panel from an `n x p` matrix, checking shape and finiteness.
    pub fn new(data: DMatrix<f64>, condition_label: impl Into<String>) -> Result<Self> {
        let (n, p) = data.shape();
        if n < 2 {
            return Err(SddError::Structure(format!(
                "panel needs at least 2 observations, got {n}"
            )));
        }
        if p < 1 {
            return Err(SddError::Structure("panel needs at least 1 channel".into()));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            // column-major storage
            return Err(SddError::Parse {
                row: idx % n,
                column: idx / n,
                message: "non-finite value".into(),
            });
        }
        let channel_names = (0..p).map(|c| format!("ch{c}")).collect();
        Ok(Self {
            data,
            channel_names,
            sampling_rate_hz: None,
            condition_label: condition_label.into(),
        })
    }

    pub fn with_channel_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(SddError::Structure(format!(
                "{} channel names for {} channels",
                names.len(),
                self.p()
            )));
        }
        self.channel_names = names;
        Ok(self)
    }

    pub fn with_sampling_rate(mut self, hz: f64) -> Result<Self> {
        if !(hz.is_finite() && hz > 0.0) {
            return Err(SddError::Argument(format!(
                "sampling rate must be positive, got {hz}"
            )));
        }
        self.sampling_rate_hz = Some(hz);
        Ok(self)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Number of channels.
    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn sampling_rate_hz(&self) -> Option<f64> {
        self.sampling_rate_hz
    }

    pub fn condition_label(&self) -> &str {
        &self.condition_label
    }

    fn with_data(&self, data: DMatrix<f64>) -> Self {
        Self {
            data,
            channel_names: self.channel_names.clone(),
            sampling_rate_hz: self.sampling_rate_hz,
            condition_label: self.condition_label.clone(),
        }
    }
}

/// Subtracts each column's sample mean.
pub fn demean(panel: &TimeSeriesPanel) -> TimeSeriesPanel {
    let mut data = panel.data.clone();
    let n = data.nrows() as f64;
    for mut col in data.column_iter_mut() {
        let mean = col.iter().sum::<f64>() / n;
        col.iter_mut().for_each(|v| *v -= mean);
    }
    panel.with_data(data)
}

/// Extracts rows `[start, end)`. The result is not re-centred.
pub fn segment(panel: &TimeSeriesPanel, start: usize, end: usize) -> Result<TimeSeriesPanel> {
    let n = panel.n();
    if start >= end || end > n {
        return Err(SddError::Bounds { start, end, len: n });
    }
    let rows = panel.data.rows(start, end - start).into_owned();
    if rows.nrows() < 2 {
        return Err(SddError::Bounds { start, end, len: n });
    }
    Ok(panel.with_data(rows))
}

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<f64> {
    let trimmed = cell.trim();
    if trimmed.is_empty() {
        return Err(SddError::Parse {
            row,
            column,
            message: "missing value".into(),
        });
    }
    let v: f64 = trimmed.parse().map_err(|_| SddError::Parse {
        row,
        column,
        message: format!("not a number: {trimmed:?}"),
    })?;
    if !v.is_finite() {
        return Err(SddError::Parse {
            row,
            column,
            message: format!("non-finite value: {trimmed:?}"),
        });
    }
    Ok(v)
}

/// Loads a panel from a comma-separated file.
///
/// The first line is taken as a header of channel names when none of its
/// cells parses as a number. Parse errors report 0-based data row and column
/// indices (the header, if any, is not counted).
pub fn load_panel(path: impl AsRef<Path>, layout: Layout) -> Result<TimeSeriesPanel> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => SddError::io(path, io),
            other => SddError::Structure(format!("{other:?}")),
        })?;

    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (line_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| SddError::Structure(e.to_string()))?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if line_no == 0 && record.iter().all(|c| c.trim().parse::<f64>().is_err()) {
            header = Some(record.iter().map(str::to_owned).collect());
            width = Some(record.len());
            continue;
        }
        let row_idx = rows.len();
        match width {
            Some(w) if w != record.len() => {
                return Err(SddError::Structure(format!(
                    "ragged input: data row {row_idx} has {} fields, expected {w}",
                    record.len()
                )))
            }
            _ => width = Some(record.len()),
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(c, cell)| parse_cell(cell, row_idx, c))
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }

    let width = width.unwrap_or(0);
    if rows.is_empty() || width == 0 {
        return Err(SddError::Structure(format!(
            "{} contains no numeric data",
            path.display()
        )));
    }
    let file_matrix = DMatrix::from_fn(rows.len(), width, |r, c| rows[r][c]);
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match layout {
        Layout::RowsAreTime => {
            let panel = TimeSeriesPanel::new(file_matrix, label)?;
            match header {
                Some(names) => panel.with_channel_names(names),
                None => Ok(panel),
            }
        }
        Layout::RowsAreChannels => TimeSeriesPanel::new(file_matrix.transpose(), label),
    }
}

/// Writes a panel with time down the rows and a header of channel names.
/// Values use the shortest representation that parses back to the same `f64`.
pub fn write_panel(panel: &TimeSeriesPanel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| SddError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| SddError::io(path, e);
    writeln!(out, "{}", panel.channel_names.join(",")).map_err(io)?;
    for row in panel.data.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_rows_are_time() {
        let f = write_tmp("1,2\n3,4\n5,6\n");
        let panel = load_panel(f.path(), Layout::RowsAreTime).unwrap();
        assert_eq!((panel.n(), panel.p()), (3, 2));
        assert_eq!(panel.data()[(2, 1)], 6.0);
    }

    #[test]
    fn load_rows_are_channels_transposes() {
        let f = write_tmp("1,2\n3,4\n5,6\n");
        let panel = load_panel(f.path(), Layout::RowsAreChannels).unwrap();
        assert_eq!((panel.n(), panel.p()), (2, 3));
        assert_eq!(panel.data()[(1, 0)], 2.0);
        assert_eq!(panel.data()[(0, 2)], 5.0);
    }

    #[test]
    fn header_names_are_kept() {
        let f = write_tmp("fz,cz\n1,2\n3,4\n");
        let panel = load_panel(f.path(), Layout::RowsAreTime).unwrap();
        assert_eq!(panel.channel_names(), &["fz".to_string(), "cz".to_string()]);
        assert_eq!(panel.n(), 2);
    }

    #[test]
    fn non_numeric_row_reports_location() {
        let f = write_tmp("1,2\na,b\n");
        match load_panel(f.path(), Layout::RowsAreTime) {
            Err(SddError::Parse { row, column, .. }) => assert_eq!((row, column), (1, 0)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        let f = write_tmp("1,2\n3\n");
        assert!(matches!(
            load_panel(f.path(), Layout::RowsAreTime),
            Err(SddError::Structure(_))
        ));
    }

    #[test]
    fn missing_value_rejected() {
        let f = write_tmp("1,2\n3,\n4,5\n");
        assert!(matches!(
            load_panel(f.path(), Layout::RowsAreTime),
            Err(SddError::Parse { row: 1, column: 1, .. })
        ));
    }

    #[test]
    fn demean_examples() {
        let data = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 5.0, 5.0, 5.0]);
        let panel = demean(&TimeSeriesPanel::new(data, "c").unwrap());
        assert_eq!(panel.data().column(0).as_slice(), &[-1.0, 0.0, 1.0]);
        assert_eq!(panel.data().column(1).as_slice(), &[0.0, 0.0, 0.0]);
        let again = demean(&panel);
        for (a, b) in again.data().iter().zip(panel.data().iter()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn segment_bounds() {
        let data = DMatrix::from_fn(10, 2, |r, c| (r * 2 + c) as f64);
        let panel = TimeSeriesPanel::new(data, "c").unwrap();
        let first = segment(&panel, 0, 5).unwrap();
        assert_eq!(first.n(), 5);
        assert_eq!(first.data()[(4, 1)], 9.0);
        assert_eq!(segment(&panel, 0, 10).unwrap(), panel);
        assert!(matches!(segment(&panel, 5, 5), Err(SddError::Bounds { .. })));
        assert!(matches!(segment(&panel, 3, 11), Err(SddError::Bounds { .. })));
    }

    #[test]
    fn rejects_too_short() {
        let data = DMatrix::from_element(1, 3, 0.0);
        assert!(TimeSeriesPanel::new(data, "c").is_err());
    }
}
