//! Sample-quality metrics.

mod equivalence;
mod histogram;
mod leverage;
mod mmd;
mod moments;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use equivalence::{score_matching_equivalence, EquivalenceReport};
pub use histogram::{total_variation, Histogram};
pub use leverage::{leverage_effect, leverage_effect_batch, LeverageCurve};
pub use mmd::{median_bandwidth, mmd2, mmd2_gaussian_closed_form, MmdEstimate};
pub use moments::{moment_report, Reference};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub std_error: f64,
}

impl Metric {
    /// `value / std_error`; infinite when the error is zero and the value is not.
    pub fn z_score(&self) -> f64 {
        if self.std_error > 0.0 {
            self.value / self.std_error
        } else if self.value == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(self.value)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metrics: BTreeMap<String, Metric>,
    pub meta: BTreeMap<String, Value>,
}

impl MetricReport {
    pub fn insert(&mut self, name: impl Into<String>, value: f64, std_error: f64) {
        self.metrics.insert(name.into(), Metric { value, std_error });
    }

    pub fn get(&self, name: &str) -> Option<&Metric> {
        self.metrics.get(name)
    }

    pub fn max_abs_z(&self, prefix: &str) -> f64 {
        self.metrics
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, m)| m.z_score().abs())
            .fold(0.0, f64::max)
    }

    pub fn merge(&mut self, other: MetricReport) {
        self.metrics.extend(other.metrics);
        self.meta.extend(other.meta);
    }
}

/// Sum that is bitwise invariant under reversing `xs`: mirrored entries are
/// added first (floating-point addition commutes exactly).
pub(crate) fn reversal_invariant_sum(xs: &[f64]) -> f64 {
    let n = xs.len();
    let folded: Vec<f64> = (0..n / 2).map(|i| xs[i] + xs[n - 1 - i]).collect();
    let mut s = crate::sum::pairwise_sum(&folded);
    if n % 2 == 1 {
        s += xs[n / 2];
    }
    s
}
