use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Error::check_len(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            Error::check_len(cols, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_len(self.cols, x.len())?;
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        Ok(out)
    }

    /// `out = A x`. Panics on length mismatch.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *o = dot(row, x);
        }
    }

    pub fn matvec_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        Error::check_len(self.rows, y.len())?;
        let mut out = vec![0.0; self.cols];
        self.matvec_transpose_into(y, &mut out);
        Ok(out)
    }

    /// `out = Aᵀ y`, accumulated row by row in a fixed order.
    pub fn matvec_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.rows);
        assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        self.add_transpose_scaled(y, 1.0, out);
    }

    /// `out += scale · Aᵀ y`.
    pub fn add_transpose_scaled(&self, y: &[f64], scale: f64, out: &mut [f64]) {
        for (row, &yi) in self.data.chunks_exact(self.cols.max(1)).zip(y) {
            let c = scale * yi;
            if c != 0.0 {
                for (o, &a) in out.iter_mut().zip(row) {
                    *o += c * a;
                }
            }
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Row-major CSV, one matrix row per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut line = String::new();
        for i in 0..self.rows {
            line.clear();
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                write!(line, "{v:?}").expect("writing to a String");
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    /// Parses a CSV matrix; blank lines are skipped and all rows must have equal length.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Matrix> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line =
                line.map_err(|e| Error::InvalidInput(format!("line {}: {e}", lineno + 1)))?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let row = trimmed
                .split(',')
                .map(|f| {
                    let f = f.trim();
                    f.parse::<f64>().map_err(|_| {
                        Error::InvalidInput(format!(
                            "line {}: cannot parse '{f}' as a number",
                            lineno + 1
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::InvalidInput(format!(
                        "line {}: expected {} columns, found {}",
                        lineno + 1,
                        first.len(),
                        row.len()
                    )));
                }
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "line {}: non-finite entry",
                    lineno + 1
                )));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::InvalidInput("empty matrix".into()));
        }
        Matrix::from_rows(&rows)
    }
}

/// Compressed-row copy of a matrix with few nonzeros.
#[derive(Debug, Clone)]
pub(crate) struct SparseRows {
    cols: usize,
    row_start: Vec<usize>,
    col_index: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRows {
    /// `None` when more than `max_density` of the entries are nonzero.
    pub(crate) fn compress(a: &Matrix, max_density: f64) -> Option<Self> {
        let nnz = a.data.iter().filter(|v| **v != 0.0).count();
        if a.data.is_empty() || nnz as f64 > max_density * a.data.len() as f64 {
            return None;
        }
        let mut row_start = Vec::with_capacity(a.rows + 1);
        let mut col_index = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_start.push(0);
        for i in 0..a.rows {
            for (j, &v) in a.row(i).iter().enumerate() {
                if v != 0.0 {
                    col_index.push(j);
                    values.push(v);
                }
            }
            row_start.push(values.len());
        }
        Some(Self {
            cols: a.cols,
            row_start,
            col_index,
            values,
        })
    }

    pub(crate) fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(out.len() + 1, self.row_start.len());
        for (o, w) in out.iter_mut().zip(self.row_start.windows(2)) {
            *o = self.col_index[w[0]..w[1]]
                .iter()
                .zip(&self.values[w[0]..w[1]])
                .map(|(&j, &a)| a * x[j])
                .sum();
        }
    }

    pub(crate) fn add_transpose_scaled(&self, y: &[f64], scale: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.cols);
        for (&yi, w) in y.iter().zip(self.row_start.windows(2)) {
            let c = scale * yi;
            if c != 0.0 {
                for (&j, &a) in self.col_index[w[0]..w[1]]
                    .iter()
                    .zip(&self.values[w[0]..w[1]])
                {
                    out[j] += c * a;
                }
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators; the reduction order is fixed.
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Writes a vector as a single CSV column.
pub fn write_vector_csv<W: Write>(x: &[f64], mut w: W) -> std::io::Result<()> {
    let mut s = String::with_capacity(x.len() * 20);
    for v in x {
        writeln!(s, "{v:?}").expect("writing to a String");
    }
    w.write_all(s.as_bytes())
}
