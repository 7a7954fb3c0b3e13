//! Dense matrix carrier with column normalization, pruning of degenerate
//! columns, and CSV/JSON file IO.
//!
//! Columns are the samples throughout this crate, so storage is
//! column-major and a column is always available as a contiguous slice.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real matrix. Entries are guaranteed finite after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    inner: DMatrix<f64>,
}

impl Matrix {
    /// Build from a column-major nalgebra matrix, validating shape and finiteness.
    pub fn new(inner: DMatrix<f64>) -> Result<Self> {
        if inner.nrows() == 0 || inner.ncols() == 0 {
            return Err(Error::EmptyMatrix);
        }
        for col in 0..inner.ncols() {
            for row in 0..inner.nrows() {
                if !inner[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        Ok(Self { inner })
    }

    /// Build from a closure over (row, col).
    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        Self::new(DMatrix::from_fn(rows, cols, f))
    }

    /// Build from row-major data.
    pub fn from_rows_vec(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                data.len()
            )));
        }
        Self::from_fn(rows, cols, |r, c| data[r * cols + c])
    }

    /// Build from a list of equally sized columns.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        if cols.is_empty() || cols[0].is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let rows = cols[0].len();
        for (j, c) in cols.iter().enumerate() {
            if c.len() != rows {
                return Err(Error::DimensionMismatch(format!(
                    "column {} has {} rows, expected {}",
                    j,
                    c.len(),
                    rows
                )));
            }
        }
        Self::from_fn(rows, cols.len(), |r, c| cols[c][r])
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        Ok(Self {
            inner: DMatrix::zeros(rows, cols),
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        Ok(Self {
            inner: DMatrix::identity(n, n),
        })
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    /// Contiguous view of column `j`.
    pub fn col(&self, j: usize) -> &[f64] {
        let r = self.rows();
        &self.inner.as_slice()[j * r..(j + 1) * r]
    }

    pub fn col_norm(&self, j: usize) -> f64 {
        self.inner.column(j).norm()
    }

    /// New matrix made of the given columns, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        for &j in indices {
            if j >= self.cols() {
                return Err(Error::IndexOutOfRange {
                    what: "columns",
                    index: j,
                    len: self.cols(),
                });
            }
        }
        Self::from_fn(self.rows(), indices.len(), |r, c| self.get(r, indices[c]))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub(crate) fn dmat(&self) -> &DMatrix<f64> {
        &self.inner
    }

}

/// Unit-normalized data plus the bookkeeping needed to undo or trace it.
#[derive(Debug, Clone)]
pub struct NormalizedData {
    /// The matrix with unit l2 columns.
    pub x: Matrix,
    /// Original l2 norm of each retained column.
    pub norms: Vec<f64>,
    /// Indices into the raw input of the retained columns, in original order.
    pub kept: Vec<usize>,
}

/// Normalize every column of `x0` to unit l2 norm. No columns are pruned;
/// a zero column is an error.
pub fn normalize_columns(x0: &Matrix) -> Result<NormalizedData> {
    let norms: Vec<f64> = (0..x0.cols()).map(|j| x0.col_norm(j)).collect();
    if norms.iter().all(|&n| n == 0.0) {
        return Err(Error::NoNonzeroColumns);
    }
    if let Some(j) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroColumn(j));
    }
    let x = Matrix::from_fn(x0.rows(), x0.cols(), |r, c| x0.get(r, c) / norms[c])?;
    Ok(NormalizedData {
        x,
        norms,
        kept: (0..x0.cols()).collect(),
    })
}

/// Drop columns whose norm falls strictly below `rel_threshold` times the
/// largest column norm (zero columns are always dropped), then normalize
/// the survivors.
pub fn drop_small_columns(x0: &Matrix, rel_threshold: f64) -> Result<NormalizedData> {
    if !(0.0..1.0).contains(&rel_threshold) {
        return Err(Error::InvalidParameter(format!(
            "rel_threshold must lie in [0, 1), got {rel_threshold}"
        )));
    }
    let norms: Vec<f64> = (0..x0.cols()).map(|j| x0.col_norm(j)).collect();
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    let cutoff = rel_threshold * max_norm;
    let kept: Vec<usize> = (0..x0.cols())
        .filter(|&j| norms[j] > 0.0 && norms[j] >= cutoff)
        .collect();
    if kept.is_empty() {
        return Err(Error::NoNonzeroColumns);
    }
    let kept_norms: Vec<f64> = kept.iter().map(|&j| norms[j]).collect();
    let x = Matrix::from_fn(x0.rows(), kept.len(), |r, c| {
        x0.get(r, kept[c]) / kept_norms[c]
    })?;
    Ok(NormalizedData {
        x,
        norms: kept_norms,
        kept,
    })
}

/// On-disk matrix formats understood by [`read_matrix`] and [`write_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    /// One row per line, comma-separated decimal values.
    Csv,
    /// `{"rows": r, "cols": c, "data": [row-major values]}`.
    Json,
}

impl MatrixFormat {
    /// Infer the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::Json,
            _ => Self::Csv,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

pub fn read_matrix(path: &Path, format: MatrixFormat) -> Result<Matrix> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix(&text, format)
}

pub fn write_matrix(path: &Path, format: MatrixFormat, m: &Matrix) -> Result<()> {
    std::fs::write(path, format_matrix(m, format)?)?;
    Ok(())
}

/// Parse matrix text in the given format. Line numbers in errors are 1-based.
pub fn parse_matrix(text: &str, format: MatrixFormat) -> Result<Matrix> {
    match format {
        MatrixFormat::Csv => parse_csv(text),
        MatrixFormat::Json => {
            let parsed: MatrixJson = serde_json::from_str(text)?;
            Matrix::from_rows_vec(parsed.rows, parsed.cols, &parsed.data)
        }
    }
}

/// Render a matrix in the given format. CSV cells use the shortest
/// representation that round-trips the f64 value exactly.
pub fn format_matrix(m: &Matrix, format: MatrixFormat) -> Result<String> {
    match format {
        MatrixFormat::Csv => {
            let mut out = String::new();
            for r in 0..m.rows() {
                for c in 0..m.cols() {
                    if c > 0 {
                        out.push(',');
                    }
                    write!(out, "{}", m.get(r, c)).expect("write to string");
                }
                out.push('\n');
            }
            Ok(out)
        }
        MatrixFormat::Json => {
            let data: Vec<f64> = (0..m.rows())
                .flat_map(|r| (0..m.cols()).map(move |c| m.get(r, c)))
                .collect();
            Ok(serde_json::to_string(&MatrixJson {
                rows: m.rows(),
                cols: m.cols(),
                data,
            })?)
        }
    }
}

fn parse_csv(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for token in line.split(',') {
            let token = token.trim();
            let value: f64 = token.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("non-numeric token '{token}'"),
            })?;
            row.push(value);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {} values, found {}", w, row.len()),
                });
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let cols = rows[0].len();
    Matrix::from_fn(rows.len(), cols, |r, c| rows[r][c])
}
