//! Error metrics on the original (tons) scale.
//!
//! "Bias" is the mean absolute error. With `r = pred - actual`,
//! `bias^2 = (mean |r|)^2 <= mean r^2 = mse` always holds.

use crate::error::{Error, Result};

fn check(pred: &[f64], actual: &[f64]) -> Result<()> {
    if pred.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: actual.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("metrics need at least one pair"));
    }
    Ok(())
}

/// Mean squared error, tons².
pub fn mse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check(pred, actual)?;
    let total: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok(total / pred.len() as f64)
}

/// Mean absolute error, tons.
pub fn bias(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check(pred, actual)?;
    let total: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum();
    Ok(total / pred.len() as f64)
}
