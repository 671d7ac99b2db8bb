//! Drift regression and sampling for stochastic interpolants with
//! linear-in-parameter drifts.
//!
//! The pipeline is: pick a [`Schedule`] and a [`FeatureMap`], build
//! [`DataPairs`], precompute a [`DriftTable`] with [`fit_table`], then
//! integrate chains with [`generate`]. [`GaussianOracle`] supplies exact
//! drifts for Gaussian targets and [`diagnostics`] scores the output.

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod features;
pub mod fit;
pub mod io;
pub mod oracle;
pub mod presets;
pub mod rng;
pub mod sampler;
pub mod schedule;
mod sum;

pub use error::{Error, Result};
pub use features::{drift_apply, jacobian, FeatureMap, FeatureSpec};
pub use fit::{fit_table, solve_eta, DataPairs, DriftTable, FitReport, GramSystem, DEFAULT_RIDGE};
pub use oracle::{path_kl_estimate, GaussianOracle, GaussianSpec, GaussianTarget};
pub use sampler::{generate, reversed_ou_generate, Diffusion, DriftSource, GenConfig, SampleBatch, TableDrift};
pub use schedule::{Schedule, ScheduleId};
