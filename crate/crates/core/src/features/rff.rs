use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};

use super::FeatureMap;
use crate::error::{Error, Result};

/// Random Fourier features `cos(w_i . x / sigma)` (rows `0..M`) followed by
/// `sin(w_i . x / sigma)` (rows `M..2M`), with `w_i ~ N(0, I)` drawn from
/// `seed` at construction.
#[derive(Debug, Clone)]
pub struct RandomFourier {
    dim: usize,
    bandwidth: f64,
    seed: u64,
    /// `M x d`, row-major, already divided by the bandwidth.
    freqs: Vec<f64>,
}

impl RandomFourier {
    pub fn new(dim: usize, num_frequencies: usize, bandwidth: f64, seed: u64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if num_frequencies == 0 || dim == 0 {
            return Err(Error::invalid("random Fourier map needs M >= 1 and d >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let freqs = (0..num_frequencies * dim)
            .map(|_| {
                let w: f64 = StandardNormal.sample(&mut rng);
                w / bandwidth
            })
            .collect();
        Ok(Self {
            dim,
            bandwidth,
            seed,
            freqs,
        })
    }

    pub fn num_frequencies(&self) -> usize {
        self.freqs.len() / self.dim
    }

    /// Frequency `i` scaled by `1 / sigma`.
    pub fn scaled_frequency(&self, i: usize) -> &[f64] {
        &self.freqs[i * self.dim..(i + 1) * self.dim]
    }

    fn phase(&self, i: usize, x: &[f64]) -> f64 {
        self.scaled_frequency(i).iter().zip(x).map(|(w, v)| w * v).sum()
    }
}

impl FeatureMap for RandomFourier {
    fn dim_in(&self) -> usize {
        self.dim
    }

    fn dim_out(&self) -> usize {
        2 * self.num_frequencies()
    }

    fn jacobian_into(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        let (m, d) = (self.num_frequencies(), self.dim);
        for i in 0..m {
            let w = self.scaled_frequency(i);
            let (s, c) = self.phase(i, x).sin_cos();
            for k in 0..d {
                out[i * d + k] = -s * w[k];
                out[(m + i) * d + k] = c * w[k];
            }
        }
    }

    fn values(&self, x: &[f64], _t: f64) -> Option<Vec<f64>> {
        let m = self.num_frequencies();
        let phases: Vec<f64> = (0..m).map(|i| self.phase(i, x)).collect();
        Some(
            phases
                .iter()
                .map(|p| p.cos())
                .chain(phases.iter().map(|p| p.sin()))
                .collect(),
        )
    }

    fn descriptor(&self) -> Value {
        json!({
            "type": "rff",
            "frequencies": self.num_frequencies(),
            "bandwidth": self.bandwidth,
            "seed": self.seed,
        })
    }
}
