//! Log-linear STIRPAT regression,
//! `log C = log a + b log P + c log A + d log I + f log E [+ city effects]`,
//! fitted by least squares through a Householder QR factorization.
//!
//! Predictions are `exp` of the fitted log value. No smearing correction is
//! applied, so with noisy data the back-transformed prediction estimates the
//! conditional median of C rather than its mean.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{DesignMatrix, INTERCEPT};
use crate::linalg::{self, QrFailure};
use crate::math;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsModel {
    pub column_names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Training residuals on the log scale.
    pub residuals: Vec<f64>,
    pub r_squared: f64,
}

impl OlsModel {
    /// A model with given coefficients and no training history.
    pub fn from_coefficients(column_names: Vec<String>, coefficients: Vec<f64>) -> Result<Self> {
        if column_names.len() != coefficients.len() {
            return Err(Error::LengthMismatch {
                left: column_names.len(),
                right: coefficients.len(),
            });
        }
        Ok(OlsModel {
            column_names,
            coefficients,
            residuals: Vec::new(),
            r_squared: f64::NAN,
        })
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.column_names
            .iter()
            .position(|c| c == name)
            .map(|k| self.coefficients[k])
    }

    /// Fitted values on the log scale.
    pub fn predict_log(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.linear(r)).collect()
    }

    fn linear(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.coefficients.len() {
            return Err(Error::Layout {
                expected: self.coefficients.len(),
                found: row.len(),
            });
        }
        Ok(row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum())
    }
}

/// Least-squares fit of a log-transformed design with an intercept column.
pub fn fit_ols(design: &DesignMatrix) -> Result<OlsModel> {
    if design.column_names().first().map(String::as_str) != Some(INTERCEPT) {
        return Err(Error::InvalidInput(
            "linear regression needs a leading intercept column".into(),
        ));
    }
    let (rows, y) = (design.rows(), design.targets());
    let coefficients = linalg::least_squares(rows, y).map_err(|e| match e {
        QrFailure::Underdetermined => Error::Underdetermined {
            rows: design.nrows(),
            columns: design.ncols(),
        },
        QrFailure::Dependent(k) => Error::Singular {
            column: design.column_names()[k].clone(),
        },
    })?;

    let mut model = OlsModel::from_coefficients(design.column_names().to_vec(), coefficients)?;
    let fitted = model.predict_log(rows)?;
    model.residuals = y.iter().zip(&fitted).map(|(y, f)| y - f).collect();

    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sse: f64 = model.residuals.iter().map(|r| r * r).sum();
    model.r_squared = if sst > 0.0 {
        (1.0 - sse / sst).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(model)
}

/// Emissions in tons: `exp` of the linear predictor.
pub fn predict_ols(model: &OlsModel, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    Ok(model.predict_log(rows)?.into_iter().map(math::exp).collect())
}
