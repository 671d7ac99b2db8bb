use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    AffineField, Concat, EnsembleVelocity, FeatureMap, HaarScattering, LagCrossMoments, LinearCoordinates, OracleField,
    QuadraticMonomials, RadialQuadratic, RandomFourier, VelocityField,
};
use crate::error::{Error, Result};
use crate::oracle::{GaussianOracle, GaussianSpec};
use crate::schedule::{Schedule, ScheduleId};

/// Serializable description of a feature map. This is both the config
/// grammar and the descriptor stored in drift tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureSpec {
    Linear,
    RadialQuadratic,
    Monomials,
    HaarScatter {
        levels: usize,
    },
    Rff {
        frequencies: usize,
        bandwidth: f64,
        #[serde(default)]
        seed: u64,
    },
    LagCross {
        lags: usize,
    },
    Ensemble {
        fields: Vec<FieldSpec>,
    },
    Concat {
        maps: Vec<FeatureSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSpec {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

impl AffineSpec {
    pub fn build(&self) -> Result<AffineField> {
        let d = self.offset.len();
        if self.matrix.len() != d || self.matrix.iter().any(|r| r.len() != d) {
            return Err(Error::invalid(format!("affine matrix must be {d}x{d}")));
        }
        AffineField::new(self.matrix.concat(), self.offset.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Affine {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    /// Exact drift of a Gaussian target plus an affine perturbation.
    OraclePerturbed {
        target: GaussianSpec,
        schedule: ScheduleId,
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
}

impl FieldSpec {
    pub fn build(&self) -> Result<Arc<dyn VelocityField>> {
        match self {
            FieldSpec::Affine { matrix, offset } => Ok(Arc::new(
                AffineSpec {
                    matrix: matrix.clone(),
                    offset: offset.clone(),
                }
                .build()?,
            )),
            FieldSpec::OraclePerturbed {
                target,
                schedule,
                matrix,
                offset,
            } => {
                let oracle = GaussianOracle::new(target.build()?, Schedule::from_id(*schedule)?);
                let p = AffineSpec {
                    matrix: matrix.clone(),
                    offset: offset.clone(),
                }
                .build()?;
                Ok(Arc::new(OracleField::new(oracle, p)?))
            }
        }
    }
}

impl FeatureSpec {
    /// Instantiates the map for state dimension `dim`.
    pub fn build(&self, dim: usize) -> Result<Arc<dyn FeatureMap>> {
        if dim == 0 {
            return Err(Error::invalid("state dimension must be positive"));
        }
        Ok(match self {
            FeatureSpec::Linear => Arc::new(LinearCoordinates::new(dim)),
            FeatureSpec::RadialQuadratic => Arc::new(RadialQuadratic::new(dim)),
            FeatureSpec::Monomials => Arc::new(QuadraticMonomials::new(dim)),
            FeatureSpec::HaarScatter { levels } => Arc::new(HaarScattering::new(dim, *levels)?),
            FeatureSpec::Rff {
                frequencies,
                bandwidth,
                seed,
            } => Arc::new(RandomFourier::new(dim, *frequencies, *bandwidth, *seed)?),
            FeatureSpec::LagCross { lags } => Arc::new(LagCrossMoments::new(dim, *lags)?),
            FeatureSpec::Ensemble { fields } => {
                let fields = fields.iter().map(FieldSpec::build).collect::<Result<Vec<_>>>()?;
                let e = EnsembleVelocity::new(fields)?;
                if e.dim_in() != dim {
                    return Err(Error::DimensionMismatch {
                        what: "ensemble field dimension",
                        expected: dim,
                        got: e.dim_in(),
                    });
                }
                Arc::new(e)
            }
            FeatureSpec::Concat { maps } => {
                let maps = maps.iter().map(|m| m.build(dim)).collect::<Result<Vec<_>>>()?;
                Arc::new(Concat::new(maps)?)
            }
        })
    }
}
