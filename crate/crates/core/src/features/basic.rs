use std::sync::Arc;

use serde_json::{json, Value};

use super::FeatureMap;
use crate::error::{Error, Result};

/// `phi_i(x) = x_i`; the Jacobian is the identity.
#[derive(Debug, Clone)]
pub struct LinearCoordinates {
    dim: usize,
}

impl LinearCoordinates {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self { dim }
    }
}

impl FeatureMap for LinearCoordinates {
    fn dim_in(&self) -> usize {
        self.dim
    }

    fn dim_out(&self) -> usize {
        self.dim
    }

    fn jacobian_into(&self, _x: &[f64], _t: f64, out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.dim {
            out[i * self.dim + i] = 1.0;
        }
    }

    fn values(&self, x: &[f64], _t: f64) -> Option<Vec<f64>> {
        Some(x.to_vec())
    }

    fn descriptor(&self) -> Value {
        json!({ "type": "linear" })
    }

    fn drift_into(&self, _x: &[f64], _t: f64, eta: &[f64], _s: &mut Vec<f64>, out: &mut [f64]) {
        out.copy_from_slice(eta);
    }
}

/// Single feature `|x|^2 / 2`, whose gradient is `x`.
#[derive(Debug, Clone)]
pub struct RadialQuadratic {
    dim: usize,
}

impl RadialQuadratic {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self { dim }
    }
}

impl FeatureMap for RadialQuadratic {
    fn dim_in(&self) -> usize {
        self.dim
    }

    fn dim_out(&self) -> usize {
        1
    }

    fn jacobian_into(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        out.copy_from_slice(x);
    }

    fn values(&self, x: &[f64], _t: f64) -> Option<Vec<f64>> {
        Some(vec![0.5 * x.iter().map(|v| v * v).sum::<f64>()])
    }

    fn descriptor(&self) -> Value {
        json!({ "type": "radial_quadratic" })
    }
}

/// All degree-two monomials `x_i x_j` with `i <= j`, in row-major upper
/// triangular order. `P = d (d + 1) / 2`.
#[derive(Debug, Clone)]
pub struct QuadraticMonomials {
    dim: usize,
}

impl QuadraticMonomials {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self { dim }
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.dim).flat_map(move |i| (i..self.dim).map(move |j| (i, j)))
    }
}

impl FeatureMap for QuadraticMonomials {
    fn dim_in(&self) -> usize {
        self.dim
    }

    fn dim_out(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    fn jacobian_into(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        out.fill(0.0);
        let d = self.dim;
        for (row, (i, j)) in self.pairs().enumerate() {
            let r = &mut out[row * d..(row + 1) * d];
            if i == j {
                r[i] = 2.0 * x[i];
            } else {
                r[i] = x[j];
                r[j] = x[i];
            }
        }
    }

    fn values(&self, x: &[f64], _t: f64) -> Option<Vec<f64>> {
        Some(self.pairs().map(|(i, j)| x[i] * x[j]).collect())
    }

    fn descriptor(&self) -> Value {
        json!({ "type": "monomials" })
    }
}

/// Sign-sensitive lagged cross moments of a periodic series,
/// `phi_l(x) = mean_t x_t * x_{t+l}^2` for `l = 1..=lags`.
///
/// These are odd in `x`, so they can express the return/volatility asymmetry
/// that the even scattering moments cannot.
#[derive(Debug, Clone)]
pub struct LagCrossMoments {
    len: usize,
    lags: usize,
}

impl LagCrossMoments {
    pub fn new(len: usize, lags: usize) -> Result<Self> {
        if lags == 0 || lags >= len {
            return Err(Error::invalid(format!("lag count must lie in 1..{len}, got {lags}")));
        }
        Ok(Self { len, lags })
    }
}

impl FeatureMap for LagCrossMoments {
    fn dim_in(&self) -> usize {
        self.len
    }

    fn dim_out(&self) -> usize {
        self.lags
    }

    fn jacobian_into(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        let n = self.len;
        let inv = 1.0 / n as f64;
        for l in 1..=self.lags {
            let row = &mut out[(l - 1) * n..l * n];
            for (s, g) in row.iter_mut().enumerate() {
                let fwd = x[(s + l) % n];
                let back = x[(s + n - l) % n];
                *g = inv * (fwd * fwd + 2.0 * back * x[s]);
            }
        }
    }

    fn values(&self, x: &[f64], _t: f64) -> Option<Vec<f64>> {
        let n = self.len;
        Some(
            (1..=self.lags)
                .map(|l| (0..n).map(|s| x[s] * x[(s + l) % n].powi(2)).sum::<f64>() / n as f64)
                .collect(),
        )
    }

    fn descriptor(&self) -> Value {
        json!({ "type": "lag_cross", "lags": self.lags })
    }
}

/// Row-block concatenation of feature maps sharing a state dimension.
#[derive(Clone)]
pub struct Concat {
    maps: Vec<Arc<dyn FeatureMap>>,
    dim: usize,
    out: usize,
}

impl Concat {
    pub fn new(maps: Vec<Arc<dyn FeatureMap>>) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::invalid("concat needs at least one feature map"))?;
        let dim = first.dim_in();
        for m in &maps {
            if m.dim_in() != dim {
                return Err(Error::DimensionMismatch {
                    what: "concat member input dimension",
                    expected: dim,
                    got: m.dim_in(),
                });
            }
        }
        let out = maps.iter().map(|m| m.dim_out()).sum();
        Ok(Self { maps, dim, out })
    }

    pub fn maps(&self) -> &[Arc<dyn FeatureMap>] {
        &self.maps
    }
}

impl FeatureMap for Concat {
    fn dim_in(&self) -> usize {
        self.dim
    }

    fn dim_out(&self) -> usize {
        self.out
    }

    fn time_dependent(&self) -> bool {
        self.maps.iter().any(|m| m.time_dependent())
    }

    fn jacobian_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let mut offset = 0;
        for m in &self.maps {
            let len = m.dim_out() * self.dim;
            m.jacobian_into(x, t, &mut out[offset..offset + len]);
            offset += len;
        }
    }

    fn values(&self, x: &[f64], t: f64) -> Option<Vec<f64>> {
        let mut v = Vec::with_capacity(self.out);
        for m in &self.maps {
            v.extend(m.values(x, t)?);
        }
        Some(v)
    }

    fn descriptor(&self) -> Value {
        let parts: Vec<Value> = self.maps.iter().map(|m| m.descriptor()).collect();
        if parts.iter().any(Value::is_null) {
            return Value::Null;
        }
        json!({ "type": "concat", "maps": parts })
    }

    fn drift_into(&self, x: &[f64], t: f64, eta: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) {
        out.fill(0.0);
        let mut part = vec![0.0; self.dim];
        let mut offset = 0;
        for m in &self.maps {
            let p = m.dim_out();
            let block = &eta[offset..offset + p];
            offset += p;
            if block.iter().all(|&e| e == 0.0) {
                continue;
            }
            m.drift_into(x, t, block, scratch, &mut part);
            for (o, v) in out.iter_mut().zip(&part) {
                *o += v;
            }
        }
    }
}
