//! Nadaraya-Watson regression with a Gaussian product kernel.
//!
//! The prediction at `x` is `sum_i K_H(x - x_i) y_i / sum_i K_H(x - x_i)`
//! with `K_H(u) ∝ exp(-u' H^{-1} u / 2)`. `H` is diagonal and parameterised
//! by per-dimension scales: `H = diag(h_1^2, ..., h_d^2)`. The normalising
//! constant `(2π)^{-d/2} |H|^{-1/2}` cancels in the ratio and is dropped.
//!
//! Exponents are shifted by their maximum before exponentiating, so a query
//! far from every training point still gets a well-defined average.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::DesignMatrix;
use crate::math;

/// Candidate multipliers for leave-one-out bandwidth selection, applied to a
/// unit scale in every (normalized) dimension.
pub const LOOCV_GRID: [f64; 9] = [0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum BandwidthPolicy {
    /// Per-dimension scales, used verbatim.
    Fixed(Vec<f64>),
    /// The same scale in every dimension.
    Uniform(f64),
    /// Scalar multiplier chosen from [`LOOCV_GRID`] by leave-one-out error.
    LoocvGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Gaussian,
}

/// Leave-one-out mean squared error of one grid multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoocvScore {
    pub multiplier: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<f64>,
    /// Per-dimension scales `h_k`; `H = diag(h_k^2)`.
    pub bandwidth: Vec<f64>,
    pub kernel: KernelKind,
    /// Grid scores when the bandwidth came from leave-one-out selection.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loocv: Vec<LoocvScore>,
}

impl KernelModel {
    pub fn fit(x: &[Vec<f64>], y: &[f64], policy: &BandwidthPolicy) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::Empty("kernel regression needs training rows"));
        }
        let dim = x[0].len();
        if let Some(bad) = x.iter().find(|r| r.len() != dim) {
            return Err(Error::Layout {
                expected: dim,
                found: bad.len(),
            });
        }

        let (bandwidth, loocv) = match policy {
            BandwidthPolicy::Fixed(h) => {
                if h.len() != dim {
                    return Err(Error::Layout {
                        expected: dim,
                        found: h.len(),
                    });
                }
                if !h.iter().all(|v| *v > 0.0 && v.is_finite()) {
                    return Err(Error::Hyperparameter("bandwidth entries must be positive".into()));
                }
                (h.clone(), Vec::new())
            }
            BandwidthPolicy::Uniform(h) => {
                if !(*h > 0.0 && h.is_finite()) {
                    return Err(Error::Hyperparameter("bandwidth must be positive".into()));
                }
                (vec![*h; dim], Vec::new())
            }
            BandwidthPolicy::LoocvGrid => {
                if x.len() < 2 {
                    return Err(Error::Hyperparameter(
                        "leave-one-out selection needs at least two rows".into(),
                    ));
                }
                if x.iter().all(|r| r == &x[0]) {
                    return Err(Error::Degenerate(
                        "all training rows are identical; leave-one-out error does not depend on the bandwidth",
                    ));
                }
                let scores: Vec<LoocvScore> = LOOCV_GRID
                    .iter()
                    .map(|&h| LoocvScore {
                        multiplier: h,
                        mse: loo_mse(x, y, &vec![h; dim]),
                    })
                    .collect();
                // grid is ascending, so strict `<` keeps the smaller h on ties
                let mut best = scores[0];
                for s in &scores[1..] {
                    if s.mse < best.mse {
                        best = *s;
                    }
                }
                (vec![best.multiplier; dim], scores)
            }
        };

        Ok(KernelModel {
            train_x: x.to_vec(),
            train_y: y.to_vec(),
            bandwidth,
            kernel: KernelKind::Gaussian,
            loocv,
        })
    }

    pub fn dim(&self) -> usize {
        self.bandwidth.len()
    }

    /// Normalized kernel weights of every training row at `query`.
    pub fn weights(&self, query: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(query)?;
        let mut w: Vec<f64> = self
            .train_x
            .iter()
            .map(|xi| log_kernel(query, xi, &self.bandwidth))
            .collect();
        normalize_log_weights(&mut w);
        Ok(w)
    }

    pub fn predict_one(&self, query: &[f64]) -> Result<f64> {
        let w = self.weights(query)?;
        let raw: f64 = w.iter().zip(&self.train_y).map(|(w, y)| w * y).sum();
        Ok(clamp_to_range(raw, &self.train_y))
    }

    fn check_dim(&self, query: &[f64]) -> Result<()> {
        if query.len() != self.dim() {
            return Err(Error::Layout {
                expected: self.dim(),
                found: query.len(),
            });
        }
        Ok(())
    }
}

/// Fits on a normalized design.
pub fn fit_kernel(design: &DesignMatrix, policy: &BandwidthPolicy) -> Result<KernelModel> {
    KernelModel::fit(design.rows(), design.targets(), policy)
}

pub fn predict_kernel(model: &KernelModel, queries: &[Vec<f64>]) -> Result<Vec<f64>> {
    queries.iter().map(|q| model.predict_one(q)).collect()
}

/// Mean squared leave-one-out error for the given per-dimension scales.
pub fn loo_mse(x: &[Vec<f64>], y: &[f64], bandwidth: &[f64]) -> f64 {
    let n = x.len();
    let mut logw = vec![0.0; n];
    let mut total = 0.0;
    for j in 0..n {
        for (i, xi) in x.iter().enumerate() {
            logw[i] = if i == j {
                f64::NEG_INFINITY
            } else {
                log_kernel(&x[j], xi, bandwidth)
            };
        }
        normalize_log_weights(&mut logw);
        let pred: f64 = logw.iter().zip(y).map(|(w, y)| w * y).sum();
        total += (pred - y[j]) * (pred - y[j]);
    }
    total / n as f64
}

#[inline]
fn log_kernel(a: &[f64], b: &[f64], h: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((a, b), h) in a.iter().zip(b).zip(h) {
        let u = (a - b) / h;
        s += u * u;
    }
    -0.5 * s
}

/// In place: log weights to weights summing to one.
fn normalize_log_weights(w: &mut [f64]) {
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in w.iter_mut() {
        *v = math::exp(*v - max);
        sum += *v;
    }
    for v in w.iter_mut() {
        *v /= sum;
    }
}

// The weighted average is a convex combination; only rounding can push it
// past the extremes.
fn clamp_to_range(v: f64, y: &[f64]) -> f64 {
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.clamp(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_predicts_its_value_everywhere() {
        let m = KernelModel::fit(&[vec![0.3, -1.0]], &[5.0], &BandwidthPolicy::Fixed(vec![1.0, 1.0])).unwrap();
        for q in [[0.0, 0.0], [100.0, -40.0], [0.3, -1.0]] {
            assert_eq!(m.predict_one(&q).unwrap(), 5.0);
        }
    }

    #[test]
    fn fixed_bandwidth_is_stored_verbatim() {
        let x = vec![vec![0.0; 4], vec![1.0; 4]];
        let m = KernelModel::fit(&x, &[1.0, 2.0], &BandwidthPolicy::Fixed(vec![1.0; 4])).unwrap();
        assert_eq!(m.bandwidth, vec![1.0; 4]);
        assert!(m.loocv.is_empty());
    }

    #[test]
    fn constant_response_is_reproduced() {
        let x: Vec<Vec<f64>> = (0..7).map(|k| vec![f64::from(k), f64::from(k * k)]).collect();
        let m = KernelModel::fit(&x, &[2.5; 7], &BandwidthPolicy::Fixed(vec![0.7, 3.0])).unwrap();
        assert_eq!(m.predict_one(&[1.5, 9.0]).unwrap(), 2.5);
    }

    #[test]
    fn two_point_hand_example() {
        let m = KernelModel::fit(&[vec![0.0], vec![1.0]], &[0.0, 1.0], &BandwidthPolicy::Fixed(vec![1.0])).unwrap();
        let w = m.weights(&[0.0]).unwrap();
        let e = math::exp(-0.5);
        assert!((w[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
        let p = m.predict_one(&[0.0]).unwrap();
        assert!((p - 0.37754).abs() < 1e-5, "{p}");
    }

    #[test]
    fn far_query_does_not_produce_nan() {
        let m = KernelModel::fit(&[vec![0.0], vec![1.0]], &[0.0, 1.0], &BandwidthPolicy::Fixed(vec![0.01])).unwrap();
        let p = m.predict_one(&[1.0e6]).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn identical_rows_are_degenerate_under_loocv() {
        let x = vec![vec![1.0, 2.0]; 5];
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(matches!(
            KernelModel::fit(&x, &y, &BandwidthPolicy::LoocvGrid),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn bad_bandwidths_are_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            KernelModel::fit(&x, &[0.0, 1.0], &BandwidthPolicy::Fixed(vec![0.0])),
            Err(Error::Hyperparameter(_))
        ));
        assert!(matches!(
            KernelModel::fit(&x, &[0.0, 1.0], &BandwidthPolicy::Fixed(vec![1.0, 1.0])),
            Err(Error::Layout { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_on_query() {
        let m = KernelModel::fit(&[vec![0.0, 0.0]], &[1.0], &BandwidthPolicy::Fixed(vec![1.0, 1.0])).unwrap();
        assert_eq!(
            m.predict_one(&[0.0]).unwrap_err(),
            Error::Layout { expected: 2, found: 1 }
        );
    }
}
