//! Dense row-major matrices and their exchange formats.
//!
//! Binary layout: a 16-byte header — magic `BVI1`, u32 row count, u32 column
//! count, u32 reserved (zero), all little-endian — followed by the row-major
//! f64 payload, little-endian. Small instances can also be read from plain
//! CSV (one row per line, '.' decimal).

use super::ProblemError;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"BVI1";

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must be rows * cols");
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
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

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// y = A^T x.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            if xi != 0.0 {
                for (yj, &a) in y.iter_mut().zip(self.row(i)) {
                    *yj += a * xi;
                }
            }
        }
        y
    }

    pub fn col_dot(&self, j: usize, x: &[f64]) -> f64 {
        (0..self.rows).map(|i| self.get(i, j) * x[i]).sum()
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.row(i).iter().map(|v| v * v).sum()
    }

    pub fn col_norm_sq(&self, j: usize) -> f64 {
        (0..self.rows).map(|i| self.get(i, j) * self.get(i, j)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn write_binary(&self, path: &Path) -> Result<(), ProblemError> {
        let io_err = |source| ProblemError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut buf = Vec::with_capacity(16 + 8 * self.data.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.rows as u32).to_le_bytes());
        buf.extend_from_slice(&(self.cols as u32).to_le_bytes());
        buf.extend_from_slice(&0u32.to_le_bytes());
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut file = std::fs::File::create(path).map_err(io_err)?;
        file.write_all(&buf).map_err(io_err)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Matrix, ProblemError> {
        let io_err = |source| ProblemError::Io {
            path: path.display().to_string(),
            source,
        };
        let fmt_err = |reason: &str| ProblemError::Format {
            path: path.display().to_string(),
            reason: reason.into(),
        };
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(io_err)?
            .read_to_end(&mut bytes)
            .map_err(io_err)?;
        if bytes.len() < 16 {
            return Err(fmt_err("shorter than the 16-byte header"));
        }
        if &bytes[0..4] != MAGIC {
            return Err(fmt_err("bad magic, expected BVI1"));
        }
        let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let expected = 16 + 8 * rows * cols;
        if bytes.len() != expected {
            return Err(fmt_err(&format!(
                "payload size mismatch: expected {expected} bytes, found {}",
                bytes.len()
            )));
        }
        let data: Vec<f64> = bytes[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Matrix { rows, cols, data })
    }

    /// Read a dense matrix from CSV text: one row per line, comma-separated.
    pub fn read_csv(path: &Path) -> Result<Matrix, ProblemError> {
        let io_err = |source| ProblemError::Io {
            path: path.display().to_string(),
            source,
        };
        let text = std::fs::read_to_string(path).map_err(io_err)?;
        let mut rows = Vec::new();
        let mut width = None;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Result<Vec<f64>, _> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect();
            let row = row.map_err(|e| ProblemError::Format {
                path: path.display().to_string(),
                reason: format!("line {}: {e}", lineno + 1),
            })?;
            if let Some(w) = width {
                if row.len() != w {
                    return Err(ProblemError::Format {
                        path: path.display().to_string(),
                        reason: format!("line {}: ragged row", lineno + 1),
                    });
                }
            } else {
                width = Some(row.len());
            }
            rows.push(row);
        }
        let cols = width.ok_or_else(|| ProblemError::Format {
            path: path.display().to_string(),
            reason: "empty matrix".into(),
        })?;
        let nrows = rows.len();
        Ok(Matrix::new(nrows, cols, rows.into_iter().flatten().collect()))
    }
}
