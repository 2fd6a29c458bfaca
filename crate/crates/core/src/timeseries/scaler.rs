use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Per-column min-max bounds. A column whose minimum equals its maximum is
/// degenerate: it transforms to 0 and inverts back to the minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Fits column-wise bounds on a non-empty matrix.
pub fn fit_scaler(matrix: &Matrix) -> Result<ScalerParams> {
    if matrix.rows() == 0 || matrix.cols() == 0 {
        return Err(Error::EmptyInput("scaler fit matrix"));
    }
    let mut min = vec![f64::INFINITY; matrix.cols()];
    let mut max = vec![f64::NEG_INFINITY; matrix.cols()];
    for row in matrix.iter_rows() {
        for (c, &x) in row.iter().enumerate() {
            min[c] = min[c].min(x);
            max[c] = max[c].max(x);
        }
    }
    Ok(ScalerParams { min, max })
}

impl ScalerParams {
    pub fn fit_values(values: &[f64]) -> Result<Self> {
        fit_scaler(&Matrix::column_vector(values))
    }

    pub fn columns(&self) -> usize {
        self.min.len()
    }

    pub fn is_degenerate(&self, col: usize) -> bool {
        self.max[col] <= self.min[col]
    }

    /// One message per degenerate column.
    pub fn warnings(&self) -> Vec<String> {
        (0..self.columns())
            .filter(|&c| self.is_degenerate(c))
            .map(|c| format!("column {c} is constant ({}); scaled to 0", self.min[c]))
            .collect()
    }

    pub fn scale(&self, col: usize, x: f64) -> f64 {
        if self.is_degenerate(col) {
            0.0
        } else {
            (x - self.min[col]) / (self.max[col] - self.min[col])
        }
    }

    pub fn unscale(&self, col: usize, x: f64) -> f64 {
        if self.is_degenerate(col) {
            self.min[col]
        } else {
            x * (self.max[col] - self.min[col]) + self.min[col]
        }
    }

    pub fn transform(&self, matrix: &Matrix) -> Result<Matrix> {
        self.map(matrix, Self::scale)
    }

    pub fn inverse_transform(&self, matrix: &Matrix) -> Result<Matrix> {
        self.map(matrix, Self::unscale)
    }

    pub fn transform_row_in_place(&self, row: &mut [f64]) {
        for (c, x) in row.iter_mut().enumerate() {
            *x = self.scale(c, *x);
        }
    }

    fn map(&self, matrix: &Matrix, f: fn(&Self, usize, f64) -> f64) -> Result<Matrix> {
        if matrix.cols() != self.columns() {
            return Err(Error::Dimension {
                expected: self.columns(),
                actual: matrix.cols(),
            });
        }
        let mut out = matrix.clone();
        for r in 0..out.rows() {
            for (c, x) in out.row_mut(r).iter_mut().enumerate() {
                *x = f(self, c, *x);
            }
        }
        Ok(out)
    }
}
