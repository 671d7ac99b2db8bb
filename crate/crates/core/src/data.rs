//! Synthetic targets and series utilities.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Isotropic Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Per-component standard deviation.
    pub stds: Vec<f64>,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<usize> {
        let k = self.weights.len();
        if k == 0 || self.means.len() != k || self.stds.len() != k {
            return Err(Error::invalid(
                "mixture needs matching, nonempty weights, means and stds",
            ));
        }
        let d = self.means[0].len();
        if d == 0 || self.means.iter().any(|m| m.len() != d) {
            return Err(Error::invalid("mixture means must share a positive dimension"));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || self.weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid(
                "mixture weights must be non-negative with a positive sum",
            ));
        }
        if self.stds.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("mixture stds must be positive"));
        }
        Ok(d)
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Array2<f64>> {
        let d = self.validate()?;
        let total: f64 = self.weights.iter().sum();
        let mut cum = Vec::with_capacity(self.weights.len());
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w / total;
            cum.push(acc);
        }
        let mut out = Array2::zeros((n, d));
        for mut row in out.rows_mut() {
            let u: f64 = rng.random();
            let k = cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1);
            for (i, v) in row.iter_mut().enumerate() {
                let e: f64 = rng.sample(StandardNormal);
                *v = self.means[k][i] + self.stds[k] * e;
            }
        }
        Ok(out)
    }
}

/// Stationary AR(1) paths `x_t = phi x_{t-1} + sigma e_t`, one path per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ar1Spec {
    pub length: usize,
    pub phi: f64,
    pub sigma: f64,
}

impl Ar1Spec {
    pub fn validate(&self) -> Result<usize> {
        if self.length == 0 {
            return Err(Error::invalid("ar1 length must be positive"));
        }
        if !(self.phi.abs() < 1.0) {
            return Err(Error::invalid("ar1 needs |phi| < 1 for a stationary start"));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("ar1 sigma must be positive"));
        }
        Ok(self.length)
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Array2<f64>> {
        let len = self.validate()?;
        let sd0 = self.sigma / (1.0 - self.phi * self.phi).sqrt();
        let mut out = Array2::zeros((n, len));
        for mut row in out.rows_mut() {
            let mut x = sd0 * rng.sample::<f64, _>(StandardNormal);
            row[0] = x;
            for t in 1..len {
                x = self.phi * x + self.sigma * rng.sample::<f64, _>(StandardNormal);
                row[t] = x;
            }
        }
        Ok(out)
    }
}

fn default_cascade_levels() -> usize {
    6
}
fn default_intermittency() -> f64 {
    0.35
}
fn default_leverage() -> f64 {
    0.3
}
fn default_memory() -> f64 {
    0.5
}

/// Return series with multiscale stochastic volatility and planted leverage.
///
/// Log-volatility is a sum of independent Gaussian levels held constant on
/// dyadic blocks of length `2, 4, ..., 2^levels`, scaled so the total
/// variance is `intermittency^2`. A leverage term driven by past shocks,
/// `h_t = memory h_{t-1} + e_{t-1}`, enters as `-leverage * h_t`, so negative
/// returns raise the following volatility. Returns are normalized to unit
/// variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeSpec {
    pub length: usize,
    #[serde(default = "default_cascade_levels")]
    pub levels: usize,
    #[serde(default = "default_intermittency")]
    pub intermittency: f64,
    #[serde(default = "default_leverage")]
    pub leverage: f64,
    #[serde(default = "default_memory")]
    pub memory: f64,
}

impl CascadeSpec {
    pub fn new(length: usize) -> Self {
        Self {
            length,
            levels: default_cascade_levels(),
            intermittency: default_intermittency(),
            leverage: default_leverage(),
            memory: default_memory(),
        }
    }

    pub fn validate(&self) -> Result<usize> {
        if self.length < 4 || !self.length.is_power_of_two() {
            return Err(Error::invalid(format!(
                "cascade length must be a power of two >= 4, got {}",
                self.length
            )));
        }
        if self.levels == 0 || (1usize << self.levels) > self.length {
            return Err(Error::invalid(
                "cascade levels must satisfy 1 <= levels <= log2(length)",
            ));
        }
        if !(self.intermittency >= 0.0) || !(self.leverage >= 0.0) || !(self.memory.abs() < 1.0) {
            return Err(Error::invalid(
                "cascade needs intermittency >= 0, leverage >= 0, |memory| < 1",
            ));
        }
        Ok(self.length)
    }

    pub fn realization<R: Rng>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let n = self.validate()?;
        let level_sd = self.intermittency / (self.levels as f64).sqrt();
        let mut logvol = vec![0.0; n];
        for j in 1..=self.levels {
            let block = 1usize << j;
            for start in (0..n).step_by(block) {
                let v = level_sd * rng.sample::<f64, _>(StandardNormal);
                for lv in &mut logvol[start..start + block] {
                    *lv += v;
                }
            }
        }
        let mut r = vec![0.0; n];
        let mut h = 0.0;
        let mut prev = 0.0;
        for t in 0..n {
            h = self.memory * h + prev;
            let e: f64 = rng.sample(StandardNormal);
            r[t] = (logvol[t] - self.leverage * h).exp() * e;
            prev = e;
        }
        let mean = r.iter().sum::<f64>() / n as f64;
        let sd = (r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::NonFinite("cascade series"));
        }
        Ok(r.iter().map(|v| (v - mean) / sd).collect())
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Array2<f64>> {
        let len = self.validate()?;
        let mut out = Array2::zeros((n, len));
        for mut row in out.rows_mut() {
            let r = self.realization(rng)?;
            row.assign(&ndarray::ArrayView1::from(&r));
        }
        Ok(out)
    }
}

/// `n` circular shifts of one realization, offsets drawn uniformly from the
/// `(seed, Shifts)` stream.
pub fn circular_shifts(series: &[f64], n: usize, seed: u64) -> Result<Array2<f64>> {
    let len = series.len();
    if len == 0 {
        return Err(Error::invalid("cannot shift an empty series"));
    }
    let mut rng = rng::stream(seed, Domain::Shifts, 0);
    let mut out = Array2::zeros((n, len));
    for mut row in out.rows_mut() {
        let s = rng.random_range(0..len);
        for (t, v) in row.iter_mut().enumerate() {
            *v = series[(t + s) % len];
        }
    }
    Ok(out)
}
