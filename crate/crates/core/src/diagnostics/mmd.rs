//! Squared maximum mean discrepancy with a Gaussian RBF kernel.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sum::pairwise_sum;

/// Points used for the median heuristic; larger inputs are thinned evenly.
const MEDIAN_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MmdEstimate {
    pub estimate: f64,
    /// Delete-one jackknife standard error.
    pub std_error: f64,
    pub bandwidth: f64,
}

fn sorted_rows(x: ArrayView2<f64>) -> Array2<f64> {
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.sort_by(|&i, &j| {
        x.row(i)
            .iter()
            .zip(x.row(j).iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    x.select(Axis(0), &order)
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Median pairwise Euclidean distance of the pooled sample.
pub fn median_bandwidth(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<f64> {
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            what: "sample dimension",
            expected: x.ncols(),
            got: y.ncols(),
        });
    }
    let pooled = ndarray::concatenate(Axis(0), &[sorted_rows(x).view(), sorted_rows(y).view()])
        .map_err(|e| Error::invalid(e.to_string()))?;
    let pooled = sorted_rows(pooled.view());
    let n = pooled.nrows();
    let keep: Vec<usize> = if n > MEDIAN_POINTS {
        (0..MEDIAN_POINTS).map(|i| i * n / MEDIAN_POINTS).collect()
    } else {
        (0..n).collect()
    };
    let pts = pooled.select(Axis(0), &keep);
    let rows: Vec<&[f64]> = pts
        .rows()
        .into_iter()
        .map(|r| r.to_slice().expect("contiguous"))
        .collect();
    let mut d: Vec<f64> = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            d.push(sq_dist(rows[i], rows[j]).sqrt());
        }
    }
    if d.is_empty() {
        return Err(Error::invalid("median bandwidth needs at least two points"));
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    let sigma = *m;
    if !(sigma > 0.0) {
        return Err(Error::invalid("degenerate sample: median pairwise distance is zero"));
    }
    Ok(sigma)
}

/// Row sums `sum_j k(a_i, b_j)`, skipping `j == i` when `same` is set.
fn kernel_row_sums(a: &[&[f64]], b: &[&[f64]], same: bool, inv2s2: f64) -> Vec<f64> {
    a.par_iter()
        .enumerate()
        .map(|(i, ai)| {
            let mut acc = 0.0;
            for (j, bj) in b.iter().enumerate() {
                if same && i == j {
                    continue;
                }
                acc += (-sq_dist(ai, bj) * inv2s2).exp();
            }
            acc
        })
        .collect()
}

/// Unbiased squared MMD between the laws of `x` and `y` under
/// `k(u, v) = exp(-|u - v|^2 / (2 sigma^2))`; `sigma` defaults to the median
/// heuristic. Rows are put into a canonical order first, so the result does
/// not depend on how either sample is ordered.
pub fn mmd2(x: ArrayView2<f64>, y: ArrayView2<f64>, bandwidth: Option<f64>) -> Result<MmdEstimate> {
    let (m, n) = (x.nrows(), y.nrows());
    if m < 2 || n < 2 {
        return Err(Error::invalid("mmd2 needs at least two points per sample"));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            what: "sample dimension",
            expected: x.ncols(),
            got: y.ncols(),
        });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mmd samples"));
    }
    let sigma = match bandwidth {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Error::invalid(format!("bandwidth must be positive, got {s}"))),
        None => median_bandwidth(x, y)?,
    };
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    let xs = sorted_rows(x);
    let ys = sorted_rows(y);
    let xr: Vec<&[f64]> = xs
        .rows()
        .into_iter()
        .map(|r| r.to_slice().expect("contiguous"))
        .collect();
    let yr: Vec<&[f64]> = ys
        .rows()
        .into_iter()
        .map(|r| r.to_slice().expect("contiguous"))
        .collect();

    let rxx = kernel_row_sums(&xr, &xr, true, inv2s2);
    let ryy = kernel_row_sums(&yr, &yr, true, inv2s2);
    let rxy = kernel_row_sums(&xr, &yr, false, inv2s2);
    let ryx = kernel_row_sums(&yr, &xr, false, inv2s2);
    let (sxx, syy, sxy) = (pairwise_sum(&rxx), pairwise_sum(&ryy), pairwise_sum(&rxy));

    let stat = |sxx: f64, syy: f64, sxy: f64, m: f64, n: f64| {
        sxx / (m * (m - 1.0)) + syy / (n * (n - 1.0)) - 2.0 * sxy / (m * n)
    };
    let (mf, nf) = (m as f64, n as f64);
    let estimate = stat(sxx, syy, sxy, mf, nf);

    // Delete-one jackknife over each sample; a sample of two points cannot
    // lose one and still define its within-sample term, so it contributes 0.
    let mut var = 0.0;
    if m > 2 {
        let loo: Vec<f64> = (0..m)
            .map(|i| stat(sxx - 2.0 * rxx[i], syy, sxy - rxy[i], mf - 1.0, nf))
            .collect();
        var += jackknife_spread(&loo);
    }
    if n > 2 {
        let loo: Vec<f64> = (0..n)
            .map(|j| stat(sxx, syy - 2.0 * ryy[j], sxy - ryx[j], mf, nf - 1.0))
            .collect();
        var += jackknife_spread(&loo);
    }
    if !estimate.is_finite() || !var.is_finite() {
        return Err(Error::NonFinite("mmd estimate"));
    }
    Ok(MmdEstimate {
        estimate,
        std_error: var.sqrt(),
        bandwidth: sigma,
    })
}

/// `(n - 1) / n * sum (theta_i - mean)^2`.
fn jackknife_spread(loo: &[f64]) -> f64 {
    let n = loo.len() as f64;
    let mean = pairwise_sum(loo) / n;
    let dev: Vec<f64> = loo.iter().map(|v| (v - mean) * (v - mean)).collect();
    (n - 1.0) / n * pairwise_sum(&dev)
}

/// `E exp(-|w|^2 / (2 sigma^2))` for `w ~ N(mu, S)`.
fn expected_kernel(mu: &DVector<f64>, s: &DMatrix<f64>, sigma: f64) -> Result<f64> {
    let d = mu.len();
    let s2 = sigma * sigma;
    let det = (DMatrix::identity(d, d) + s / s2).determinant();
    let chol = (DMatrix::identity(d, d) * s2 + s)
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?;
    let quad = mu.dot(&chol.solve(mu));
    Ok(det.powf(-0.5) * (-0.5 * quad).exp())
}

/// Population squared MMD between `N(m1, c1)` and `N(m2, c2)` under the RBF
/// kernel of bandwidth `sigma`.
pub fn mmd2_gaussian_closed_form(
    m1: &DVector<f64>,
    c1: &DMatrix<f64>,
    m2: &DVector<f64>,
    c2: &DMatrix<f64>,
    sigma: f64,
) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("bandwidth must be positive"));
    }
    let zero = DVector::zeros(m1.len());
    let kxx = expected_kernel(&zero, &(c1 * 2.0), sigma)?;
    let kyy = expected_kernel(&zero, &(c2 * 2.0), sigma)?;
    let kxy = expected_kernel(&(m1 - m2), &(c1 + c2), sigma)?;
    Ok(kxx + kyy - 2.0 * kxy)
}
