//! Velocity fields used directly as feature gradients.
//!
//! Given fields `b^1..b^P`, row `i` of the Jacobian at `(x, t)` is `b^i_t(x)`,
//! so the combined drift is `sum_i eta_i b^i_t(x)`. No potential `phi` is
//! ever constructed.

use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};

use super::FeatureMap;
use crate::error::{Error, Result};
use crate::oracle::GaussianOracle;

pub trait VelocityField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]);

    fn descriptor(&self) -> Value {
        Value::Null
    }
}

/// `x -> A x + c`, time-independent.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineField {
    dim: usize,
    matrix: Vec<f64>,
    offset: Vec<f64>,
}

impl AffineField {
    /// `matrix` is `d x d` row-major.
    pub fn new(matrix: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        let dim = offset.len();
        if dim == 0 || matrix.len() != dim * dim {
            return Err(Error::invalid(format!(
                "affine field needs a {dim}x{dim} matrix, got {} entries",
                matrix.len()
            )));
        }
        if matrix.iter().chain(&offset).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("affine field coefficients"));
        }
        Ok(Self { dim, matrix, offset })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            matrix: vec![0.0; dim * dim],
            offset: vec![0.0; dim],
        }
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub(crate) fn add_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.matrix[i * self.dim..(i + 1) * self.dim];
            *o += self.offset[i] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        }
    }
}

impl VelocityField for AffineField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        out.fill(0.0);
        self.add_into(x, out);
    }

    fn descriptor(&self) -> Value {
        json!({ "kind": "affine", "matrix": self.rows(), "offset": self.offset })
    }
}

/// Exact Gaussian-target drift plus an affine perturbation, a stand-in for
/// an imperfectly trained velocity model.
#[derive(Clone)]
pub struct OracleField {
    oracle: GaussianOracle,
    perturbation: AffineField,
}

impl OracleField {
    pub fn new(oracle: GaussianOracle, perturbation: AffineField) -> Result<Self> {
        if perturbation.dim() != oracle.dim() {
            return Err(Error::DimensionMismatch {
                what: "perturbation dimension",
                expected: oracle.dim(),
                got: perturbation.dim(),
            });
        }
        Ok(Self { oracle, perturbation })
    }
}

impl VelocityField for OracleField {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }

    fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        self.oracle.exact_drift_into(t, x, out);
        self.perturbation.add_into(x, out);
    }

    fn descriptor(&self) -> Value {
        json!({
            "kind": "oracle_perturbed",
            "target": self.oracle.target().descriptor(),
            "schedule": self.oracle.schedule().id(),
            "matrix": self.perturbation.rows(),
            "offset": self.perturbation.offset,
        })
    }
}

/// Wraps a closure `(x, t, out)`.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], f64, &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> VelocityField for FnField<F>
where
    F: Fn(&[f64], f64, &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        (self.f)(x, t, out)
    }
}

#[derive(Clone)]
pub struct EnsembleVelocity {
    fields: Vec<Arc<dyn VelocityField>>,
    dim: usize,
}

impl fmt::Debug for EnsembleVelocity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EnsembleVelocity")
            .field("fields", &self.fields.len())
            .field("dim", &self.dim)
            .finish()
    }
}

impl EnsembleVelocity {
    pub fn new(fields: Vec<Arc<dyn VelocityField>>) -> Result<Self> {
        let dim = fields
            .first()
            .ok_or_else(|| Error::invalid("ensemble needs at least one velocity field"))?
            .dim();
        if let Some(bad) = fields.iter().find(|f| f.dim() != dim) {
            return Err(Error::DimensionMismatch {
                what: "ensemble field dimension",
                expected: dim,
                got: bad.dim(),
            });
        }
        Ok(Self { fields, dim })
    }

    pub fn fields(&self) -> &[Arc<dyn VelocityField>] {
        &self.fields
    }
}

impl FeatureMap for EnsembleVelocity {
    fn dim_in(&self) -> usize {
        self.dim
    }

    fn dim_out(&self) -> usize {
        self.fields.len()
    }

    fn time_dependent(&self) -> bool {
        true
    }

    fn jacobian_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        for (f, row) in self.fields.iter().zip(out.chunks_exact_mut(self.dim)) {
            f.eval_into(x, t, row);
        }
    }

    fn descriptor(&self) -> Value {
        let fields: Vec<Value> = self.fields.iter().map(|f| f.descriptor()).collect();
        if fields.iter().any(Value::is_null) {
            return Value::Null;
        }
        json!({ "type": "ensemble", "fields": fields })
    }
}
