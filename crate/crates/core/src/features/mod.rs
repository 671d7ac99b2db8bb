//! Feature maps `phi: R^d -> R^P`, accessed through their Jacobians.
//!
//! The drift ansatz is `b(x) = jacobian(x, t)^T eta`. Only the Jacobian is
//! ever required; `values` is optional and exists so differentiable maps can
//! be checked against finite differences.
//!
//! Jacobians are materialized row-major as `P x d` buffers: row `i` is the
//! gradient of feature `i`.

mod basic;
mod ensemble;
mod haar;
mod rff;
mod spec;

use ndarray::Array2;
use serde_json::Value;

use crate::error::{Error, Result};

pub use basic::{Concat, LagCrossMoments, LinearCoordinates, QuadraticMonomials, RadialQuadratic};
pub use ensemble::{AffineField, EnsembleVelocity, FnField, OracleField, VelocityField};
pub use haar::{haar_details, HaarScattering, HAAR_EPSILON};
pub use rff::RandomFourier;
pub use spec::{AffineSpec, FeatureSpec, FieldSpec};

pub trait FeatureMap: Send + Sync {
    /// State dimension `d`.
    fn dim_in(&self) -> usize;

    /// Feature count `P`.
    fn dim_out(&self) -> usize;

    fn time_dependent(&self) -> bool {
        false
    }

    /// Writes the `P x d` Jacobian at `(x, t)` row-major into `out`.
    ///
    /// Callers guarantee `x.len() == dim_in()` and
    /// `out.len() == dim_in() * dim_out()`.
    fn jacobian_into(&self, x: &[f64], t: f64, out: &mut [f64]);

    /// Feature values, if the map defines them.
    fn values(&self, _x: &[f64], _t: f64) -> Option<Vec<f64>> {
        None
    }

    /// JSON description sufficient to rebuild the map, or `Null` when the
    /// map wraps opaque code.
    fn descriptor(&self) -> Value {
        Value::Null
    }

    /// Writes `jacobian(x, t)^T eta` into `out`, using `scratch` for the
    /// Jacobian buffer.
    fn drift_into(&self, x: &[f64], t: f64, eta: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) {
        let (d, p) = (self.dim_in(), self.dim_out());
        scratch.resize(p * d, 0.0);
        self.jacobian_into(x, t, scratch);
        out.fill(0.0);
        for (row, &e) in scratch.chunks_exact(d).zip(eta) {
            if e != 0.0 {
                for (o, &j) in out.iter_mut().zip(row) {
                    *o += e * j;
                }
            }
        }
    }
}

fn check_input(f: &dyn FeatureMap, x: &[f64]) -> Result<()> {
    if x.len() != f.dim_in() {
        return Err(Error::DimensionMismatch {
            what: "state length",
            expected: f.dim_in(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature map input"));
    }
    Ok(())
}

/// Checked Jacobian evaluation, returned as a `P x d` array.
pub fn jacobian(f: &dyn FeatureMap, x: &[f64], t: f64) -> Result<Array2<f64>> {
    check_input(f, x)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("time {t} outside [0, 1]")));
    }
    let mut buf = vec![0.0; f.dim_out() * f.dim_in()];
    f.jacobian_into(x, t, &mut buf);
    Ok(Array2::from_shape_vec((f.dim_out(), f.dim_in()), buf).expect("shape"))
}

/// Checked evaluation of the drift ansatz `jacobian(x, t)^T eta`.
pub fn drift_apply(f: &dyn FeatureMap, x: &[f64], t: f64, eta: &[f64]) -> Result<Vec<f64>> {
    check_input(f, x)?;
    if eta.len() != f.dim_out() {
        return Err(Error::DimensionMismatch {
            what: "coefficient length",
            expected: f.dim_out(),
            got: eta.len(),
        });
    }
    let mut out = vec![0.0; f.dim_in()];
    let mut scratch = Vec::new();
    f.drift_into(x, t, eta, &mut scratch, &mut out);
    Ok(out)
}
