//! Householder QR least squares.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Relative size of a diagonal entry of R below which a column counts as
/// linearly dependent.
pub(crate) const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug)]
pub(crate) enum QrFailure {
    Underdetermined,
    /// Index of the first column whose R diagonal fell under the tolerance.
    Dependent(usize),
}

/// Solves `min ||X b - y||` for full-column-rank `X` given as rows.
pub(crate) fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>, QrFailure> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if m < n || n == 0 {
        return Err(QrFailure::Underdetermined);
    }

    // column-major working copy
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut qty = y.to_vec();
    let mut diag = vec![0.0; n];
    let mut v = vec![0.0; m];

    for k in 0..n {
        let norm = math::sqrt(a[k][k..].iter().map(|x| x * x).sum::<f64>());
        if norm == 0.0 {
            diag[k] = 0.0;
            continue;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        v[k..].copy_from_slice(&a[k][k..]);
        v[k] -= alpha;
        let vnorm2: f64 = v[k..].iter().map(|x| x * x).sum();
        diag[k] = alpha;
        a[k][k] = alpha;
        for x in &mut a[k][k + 1..] {
            *x = 0.0;
        }
        if vnorm2 == 0.0 {
            continue;
        }
        for col in a.iter_mut().skip(k + 1) {
            reflect(&v[k..], vnorm2, &mut col[k..]);
        }
        reflect(&v[k..], vnorm2, &mut qty[k..]);
    }

    let largest = diag.iter().fold(0.0_f64, |acc, d| acc.max(d.abs()));
    if let Some(j) = diag.iter().position(|d| !(d.abs() > RANK_TOLERANCE * largest)) {
        return Err(QrFailure::Dependent(j));
    }

    // back substitution on R b = (Q^T y)[..n]
    let mut b = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = qty[i];
        for j in i + 1..n {
            s -= a[j][i] * b[j];
        }
        b[i] = s / a[i][i];
    }
    Ok(b)
}

#[inline]
fn reflect(v: &[f64], vnorm2: f64, x: &mut [f64]) {
    let s: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let f = 2.0 * s / vnorm2;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= f * vi;
    }
}
