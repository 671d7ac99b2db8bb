//! One-dimensional Haar scattering moments.
//!
//! For a length-`T` signal and `J` dyadic levels the map collects, in order:
//!
//! 1. `mean_k |W_j x|[k]` for `j = 1..=J` (first-order scattering),
//! 2. `mean_k (W_j x)[k]^2` for `j = 1..=J`,
//! 3. the global mean and second moment of `x`,
//! 4. `mean_k |W_j x|[k] * |W_j' x|[k >> (j'-j)]` for `j < j'`.
//!
//! `W_j` is the orthonormal Haar detail transform at level `j`. The modulus
//! is smoothed to `sqrt(u^2 + eps^2)` so the Jacobian exists everywhere.

use serde_json::{json, Value};

use super::FeatureMap;
use crate::error::{Error, Result};

pub const HAAR_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct HaarScattering {
    len: usize,
    levels: usize,
    cross: Vec<(usize, usize)>,
}

/// Orthonormal Haar detail coefficients for levels `1..=levels`; entry
/// `j - 1` has length `len / 2^j`.
pub fn haar_details(x: &[f64], levels: usize) -> Vec<Vec<f64>> {
    let mut approx = x.to_vec();
    let mut out = Vec::with_capacity(levels);
    for _ in 0..levels {
        let half = approx.len() / 2;
        let mut detail = Vec::with_capacity(half);
        let mut next = Vec::with_capacity(half);
        for k in 0..half {
            let (a, b) = (approx[2 * k], approx[2 * k + 1]);
            detail.push((a - b) * std::f64::consts::FRAC_1_SQRT_2);
            next.push((a + b) * std::f64::consts::FRAC_1_SQRT_2);
        }
        out.push(detail);
        approx = next;
    }
    out
}

/// Adds `sum_k coeffs[k] * h_{level,k}` into `out`, where `h_{level,k}` is the
/// Haar detail atom (the adjoint of `haar_details` at one level).
fn add_detail_adjoint(level: usize, coeffs: &[f64], out: &mut [f64]) {
    let width = 1usize << level;
    let half = width / 2;
    let amp = (width as f64).sqrt().recip();
    for (k, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let v = c * amp;
        let start = k * width;
        for o in &mut out[start..start + half] {
            *o += v;
        }
        for o in &mut out[start + half..start + width] {
            *o -= v;
        }
    }
}

fn smooth_abs(u: f64) -> f64 {
    (u * u + HAAR_EPSILON * HAAR_EPSILON).sqrt()
}

fn smooth_abs_slope(u: f64) -> f64 {
    u / smooth_abs(u)
}

impl HaarScattering {
    pub fn new(len: usize, levels: usize) -> Result<Self> {
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::invalid(format!("signal length {len} is not a power of two")));
        }
        let max = len.trailing_zeros() as usize;
        if levels == 0 || levels > max {
            return Err(Error::invalid(format!(
                "level count {levels} outside 1..={max} for length {len}"
            )));
        }
        let cross = (0..levels).flat_map(|a| (a + 1..levels).map(move |b| (a, b))).collect();
        Ok(Self { len, levels, cross })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Accumulates `sum_i w_i grad phi_i(x)` as per-level detail coefficients
    /// plus the two global terms, then maps them back to signal space.
    fn weighted_gradient(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        let n = self.len as f64;
        let det = haar_details(x, self.levels);
        let mags: Vec<Vec<f64>> = det.iter().map(|d| d.iter().map(|&u| smooth_abs(u)).collect()).collect();
        let mut coef: Vec<Vec<f64>> = det.iter().map(|d| vec![0.0; d.len()]).collect();
        let jl = self.levels;

        for j in 0..jl {
            let nj = det[j].len() as f64;
            let (wm, ws) = (w[j], w[jl + j]);
            if wm == 0.0 && ws == 0.0 {
                continue;
            }
            for (c, &u) in coef[j].iter_mut().zip(&det[j]) {
                *c += (wm * smooth_abs_slope(u) + ws * 2.0 * u) / nj;
            }
        }
        for (idx, &(a, b)) in self.cross.iter().enumerate() {
            let wc = w[2 * jl + 2 + idx];
            if wc == 0.0 {
                continue;
            }
            let shift = b - a;
            let na = det[a].len() as f64;
            for k in 0..det[a].len() {
                let q = k >> shift;
                let scale = wc / na;
                coef[a][k] += scale * smooth_abs_slope(det[a][k]) * mags[b][q];
                coef[b][q] += scale * mags[a][k] * smooth_abs_slope(det[b][q]);
            }
        }

        let (wmean, wsq) = (w[2 * jl], w[2 * jl + 1]);
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = wmean / n + wsq * 2.0 * xi / n;
        }
        for (j, c) in coef.iter().enumerate() {
            add_detail_adjoint(j + 1, c, out);
        }
    }
}

impl FeatureMap for HaarScattering {
    fn dim_in(&self) -> usize {
        self.len
    }

    fn dim_out(&self) -> usize {
        2 * self.levels + 2 + self.cross.len()
    }

    fn jacobian_into(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        let n = self.len as f64;
        let det = haar_details(x, self.levels);
        let mags: Vec<Vec<f64>> = det.iter().map(|d| d.iter().map(|&u| smooth_abs(u)).collect()).collect();
        let jl = self.levels;
        let mut rows = out.chunks_exact_mut(self.len);
        let mut buf = Vec::new();

        for j in 0..jl {
            let row = rows.next().expect("row");
            row.fill(0.0);
            let nj = det[j].len() as f64;
            buf.clear();
            buf.extend(det[j].iter().map(|&u| smooth_abs_slope(u) / nj));
            add_detail_adjoint(j + 1, &buf, row);
        }
        for j in 0..jl {
            let row = rows.next().expect("row");
            row.fill(0.0);
            let nj = det[j].len() as f64;
            buf.clear();
            buf.extend(det[j].iter().map(|&u| 2.0 * u / nj));
            add_detail_adjoint(j + 1, &buf, row);
        }
        rows.next().expect("row").fill(1.0 / n);
        for (g, &xi) in rows.next().expect("row").iter_mut().zip(x) {
            *g = 2.0 * xi / n;
        }
        for &(a, b) in &self.cross {
            let row = rows.next().expect("row");
            row.fill(0.0);
            let shift = b - a;
            let na = det[a].len() as f64;
            let mut ca = vec![0.0; det[a].len()];
            let mut cb = vec![0.0; det[b].len()];
            for k in 0..det[a].len() {
                let q = k >> shift;
                ca[k] = smooth_abs_slope(det[a][k]) * mags[b][q] / na;
                cb[q] += mags[a][k] * smooth_abs_slope(det[b][q]) / na;
            }
            add_detail_adjoint(a + 1, &ca, row);
            add_detail_adjoint(b + 1, &cb, row);
        }
    }

    fn values(&self, x: &[f64], _t: f64) -> Option<Vec<f64>> {
        let n = self.len as f64;
        let det = haar_details(x, self.levels);
        let mags: Vec<Vec<f64>> = det.iter().map(|d| d.iter().map(|&u| smooth_abs(u)).collect()).collect();
        let mut v = Vec::with_capacity(self.dim_out());
        v.extend(mags.iter().map(|m| m.iter().sum::<f64>() / m.len() as f64));
        v.extend(
            det.iter()
                .map(|d| d.iter().map(|u| u * u).sum::<f64>() / d.len() as f64),
        );
        v.push(x.iter().sum::<f64>() / n);
        v.push(x.iter().map(|u| u * u).sum::<f64>() / n);
        for &(a, b) in &self.cross {
            let shift = b - a;
            let s: f64 = (0..mags[a].len()).map(|k| mags[a][k] * mags[b][k >> shift]).sum();
            v.push(s / mags[a].len() as f64);
        }
        Some(v)
    }

    fn descriptor(&self) -> Value {
        json!({ "type": "haar_scatter", "levels": self.levels })
    }

    fn drift_into(&self, x: &[f64], _t: f64, eta: &[f64], _s: &mut Vec<f64>, out: &mut [f64]) {
        self.weighted_gradient(x, eta, out);
    }
}
