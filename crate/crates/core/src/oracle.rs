//! Closed-form ground truth for Gaussian targets `N(m, C)`.
//!
//! With `I_t = alpha z + beta a`, the marginal is
//! `N(beta m, alpha^2 I + beta^2 C)` and conditioning gives the exact drift
//! and score. Both are diagonal in the eigenbasis of `C`, which is computed
//! once per target; every time `t` then costs two `d x d` products.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::sampler::{Diffusion, DriftSource};
use crate::schedule::Schedule;
use crate::sum::pairwise_sum;

/// Config form of a Gaussian target: a mean plus exactly one of a dense
/// covariance or an isotropic variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isotropic: Option<f64>,
}

impl GaussianSpec {
    pub fn build(&self) -> Result<GaussianTarget> {
        match (&self.covariance, self.isotropic) {
            (Some(c), None) => {
                let d = self.mean.len();
                if c.len() != d || c.iter().any(|r| r.len() != d) {
                    return Err(Error::invalid(format!("covariance must be {d}x{d}")));
                }
                GaussianTarget::new(self.mean.clone(), DMatrix::from_row_iterator(d, d, c.concat()))
            }
            (None, Some(v)) => GaussianTarget::isotropic(self.mean.clone(), v),
            _ => Err(Error::invalid(
                "gaussian target needs exactly one of `covariance` or `isotropic`",
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaussianTarget {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl GaussianTarget {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                what: "covariance size",
                expected: d,
                got: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gaussian target"));
        }
        let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        if (&cov - cov.transpose()).iter().any(|v| v.abs() > 1e-12 * scale) {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = cov.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.l();
        Ok(Self {
            mean: DVector::from_vec(mean),
            cov,
            chol,
        })
    }

    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let d = mean.len();
        Self::new(mean, DMatrix::identity(d, d) * variance)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn descriptor(&self) -> GaussianSpec {
        let d = self.dim();
        GaussianSpec {
            mean: self.mean.iter().copied().collect(),
            covariance: Some((0..d).map(|i| (0..d).map(|j| self.cov[(i, j)]).collect()).collect()),
            isotropic: None,
        }
    }

    /// Draws `n` rows from the target.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        let d = self.dim();
        let mut out = Array2::zeros((n, d));
        let mut g = vec![0.0; d];
        for mut row in out.rows_mut() {
            for v in g.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            for i in 0..d {
                let mut acc = self.mean[i];
                for j in 0..=i {
                    acc += self.chol[(i, j)] * g[j];
                }
                row[i] = acc;
            }
        }
        out
    }
}

/// Marginal law of `I_t`: `(beta m, alpha^2 I + beta^2 C)`.
pub fn marginal(g: &GaussianTarget, s: &Schedule, t: f64) -> (DVector<f64>, DMatrix<f64>) {
    let (a, b) = (s.alpha(t), s.beta(t));
    let d = g.dim();
    (g.mean() * b, DMatrix::identity(d, d) * (a * a) + g.cov() * (b * b))
}

/// Exact drift and score for one `(target, schedule)` pair.
#[derive(Debug, Clone)]
pub struct GaussianOracle {
    target: Arc<GaussianTarget>,
    schedule: Schedule,
    eigvals: Vec<f64>,
    eigvecs: DMatrix<f64>,
}

impl GaussianOracle {
    pub fn new(target: GaussianTarget, schedule: Schedule) -> Self {
        let eig = SymmetricEigen::new(target.cov.clone());
        Self {
            eigvals: eig.eigenvalues.iter().copied().collect(),
            eigvecs: eig.eigenvectors,
            target: Arc::new(target),
            schedule,
        }
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn target(&self) -> &GaussianTarget {
        &self.target
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn marginal(&self, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        marginal(&self.target, &self.schedule, t)
    }

    /// `out = offset + V diag(scale(lambda)) V^T (x - beta m)`.
    fn spectral_apply(&self, x: &[f64], beta: f64, scale: impl Fn(f64) -> f64, offset: f64, out: &mut [f64]) {
        let d = self.dim();
        let v = &self.eigvecs;
        let mut y = vec![0.0; d];
        for k in 0..d {
            let mut acc = 0.0;
            for i in 0..d {
                acc += v[(i, k)] * (x[i] - beta * self.target.mean[i]);
            }
            y[k] = acc * scale(self.eigvals[k]);
        }
        for i in 0..d {
            let mut acc = offset * self.target.mean[i];
            for k in 0..d {
                acc += v[(i, k)] * y[k];
            }
            out[i] = acc;
        }
    }

    /// `b_t(x) = dbeta m + (dalpha alpha I + dbeta beta C)(alpha^2 I + beta^2 C)^{-1}(x - beta m)`.
    pub fn exact_drift_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let s = &self.schedule;
        let (a, b, da, db) = (s.alpha(t), s.beta(t), s.dalpha(t), s.dbeta(t));
        self.spectral_apply(x, b, |l| (da * a + db * b * l) / (a * a + b * b * l), db, out);
    }

    pub fn exact_drift(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.exact_drift_into(t, x, &mut out);
        out
    }

    /// `s_t(x) = -(alpha^2 I + beta^2 C)^{-1} (x - beta m)`.
    pub fn exact_score(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let (a, b) = (self.schedule.alpha(t), self.schedule.beta(t));
        let mut out = vec![0.0; self.dim()];
        self.spectral_apply(x, b, |l| -1.0 / (a * a + b * b * l), 0.0, &mut out);
        out
    }

    /// Draws `n` interpolant states `alpha z + beta a` at time `t`.
    pub fn sample_interpolant<R: Rng>(&self, t: f64, n: usize, rng: &mut R) -> Array2<f64> {
        let (a, b) = (self.schedule.alpha(t), self.schedule.beta(t));
        let data = self.target.sample(n, rng);
        let mut out = data * b;
        for v in out.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += a * z;
        }
        out
    }
}

impl DriftSource for GaussianOracle {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn drift_into(&self, x: &[f64], t: f64, _scratch: &mut Vec<f64>, out: &mut [f64]) {
        self.exact_drift_into(t, x, out);
    }
}

/// Monte Carlo draws per quadrature node in [`path_kl_estimate`].
pub const PATH_KL_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathKlNode {
    pub t: f64,
    /// Path-KL weight multiplying the drift error at this node.
    pub weight: f64,
    /// Monte Carlo estimate of `E |b_t(I_t) - bhat_t(I_t)|^2`.
    pub drift_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathKl {
    pub total: f64,
    pub nodes: Vec<PathKlNode>,
}

/// Midpoint-rule estimate of the path KL between the exact dynamics and the
/// dynamics driven by `drift` under diffusion `mode`.
///
/// Nodes sit at `(i + 1/2) / nodes`, so the integral is effectively
/// truncated to `(delta, 1 - delta)` with `delta = 1 / (2 nodes)`. Drift
/// errors use fresh interpolant draws from `(seed, node)` streams, so two
/// calls with the same seed see identical draws regardless of `mode`.
pub fn path_kl_estimate(
    drift: &dyn DriftSource,
    oracle: &GaussianOracle,
    mode: Diffusion,
    nodes: usize,
    draws: usize,
    seed: u64,
) -> Result<PathKl> {
    if nodes == 0 || draws == 0 {
        return Err(Error::invalid("path KL needs at least one node and one draw"));
    }
    if drift.dim() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            what: "drift dimension",
            expected: oracle.dim(),
            got: drift.dim(),
        });
    }
    if let Diffusion::Constant(d) = mode {
        if !(d > 0.0) {
            return Err(Error::invalid("path KL needs D > 0"));
        }
    }
    if mode == Diffusion::Zero {
        return Err(Error::invalid("path KL is undefined for zero diffusion"));
    }
    let s = oracle.schedule();
    let dim = oracle.dim();
    let h = 1.0 / nodes as f64;
    let mut out = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let t = (i as f64 + 0.5) * h;
        let weight = match mode {
            Diffusion::Optimal => s.optimal_kl_weight(t),
            Diffusion::Constant(d) => s.kl_weight(t, d)?,
            Diffusion::Zero => unreachable!(),
        };
        let mut rng = rng::stream(seed, Domain::PathKl, i as u64);
        let states = oracle.sample_interpolant(t, draws, &mut rng);
        let mut exact = vec![0.0; dim];
        let mut approx = vec![0.0; dim];
        let mut scratch = Vec::new();
        let errs: Vec<f64> = states
            .rows()
            .into_iter()
            .map(|row| {
                let x = row.as_slice().expect("contiguous");
                oracle.exact_drift_into(t, x, &mut exact);
                drift.drift_into(x, t, &mut scratch, &mut approx);
                exact.iter().zip(&approx).map(|(a, b)| (a - b) * (a - b)).sum()
            })
            .collect();
        let drift_error = pairwise_sum(&errs) / draws as f64;
        out.push(PathKlNode { t, weight, drift_error });
    }
    let contributions: Vec<f64> = out.iter().map(|n| n.weight * n.drift_error * h).collect();
    Ok(PathKl {
        total: pairwise_sum(&contributions),
        nodes: out,
    })
}
