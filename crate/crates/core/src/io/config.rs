//! Strict JSON run configuration.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::samples::read_csv_samples;
use crate::data::{Ar1Spec, CascadeSpec, MixtureSpec};
use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::fit::DEFAULT_RIDGE;
use crate::oracle::{GaussianSpec, GaussianTarget};
use crate::rng::{self, Domain};
use crate::sampler::Diffusion;
use crate::schedule::ScheduleId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvTarget {
    pub path: PathBuf,
}

/// Data source of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Gaussian(GaussianSpec),
    Csv(CsvTarget),
    Mixture(MixtureSpec),
    Ar1(Ar1Spec),
    /// One realization of a cascade series; data are its circular shifts.
    Cascade(CascadeSpec),
}

impl Target {
    /// Exact Gaussian law, when the target has one.
    pub fn gaussian(&self) -> Result<Option<GaussianTarget>> {
        match self {
            Target::Gaussian(g) => g.build().map(Some),
            _ => Ok(None),
        }
    }

    pub fn is_series(&self) -> bool {
        matches!(self, Target::Ar1(_) | Target::Cascade(_))
    }

    /// Training data: `n` rows drawn from the `(seed, Target)` stream, or the
    /// first `n` rows of the CSV file.
    pub fn training_data(&self, n: usize, seed: u64) -> Result<Array2<f64>> {
        self.draw(n, seed, Domain::Target)
    }

    /// Independent reference draws for evaluation. For a CSV target this is
    /// the file itself; for a cascade, shifts of a second realization.
    pub fn reference_data(&self, n: usize, seed: u64) -> Result<Array2<f64>> {
        self.draw(n, seed, Domain::Evaluation)
    }

    fn draw(&self, n: usize, seed: u64, domain: Domain) -> Result<Array2<f64>> {
        if n == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        let mut rng = rng::stream(seed, domain, 0);
        match self {
            Target::Gaussian(g) => Ok(g.build()?.sample(n, &mut rng)),
            Target::Csv(c) => {
                let x = read_csv_samples(&c.path, None)?;
                let keep = n.min(x.nrows());
                Ok(x.slice(ndarray::s![..keep, ..]).to_owned())
            }
            Target::Mixture(m) => m.sample(n, &mut rng),
            Target::Ar1(a) => a.sample(n, &mut rng),
            Target::Cascade(c) => {
                let r = c.realization(&mut rng)?;
                crate::data::circular_shifts(&r, n, seed ^ domain as u64)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    gaussian: Option<GaussianSpec>,
    csv: Option<CsvTarget>,
    mixture: Option<MixtureSpec>,
    ar1: Option<Ar1Spec>,
    cascade: Option<CascadeSpec>,
}

fn default_num_samples() -> usize {
    1000
}
fn default_diffusion() -> Diffusion {
    Diffusion::Optimal
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    #[serde(default = "default_num_samples")]
    pub num_samples: usize,
    #[serde(default = "default_diffusion")]
    pub diffusion: Diffusion,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            num_samples: default_num_samples(),
            diffusion: default_diffusion(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Mmd,
    Moments,
    Leverage,
    Histogram,
}

fn default_max_lag() -> usize {
    5
}
fn default_reference_samples() -> usize {
    10_000
}
fn default_bins() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Fixed MMD bandwidth; the median heuristic when absent.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    /// Reference draws for targets without a closed form.
    #[serde(default = "default_reference_samples")]
    pub reference_samples: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            bandwidth: None,
            max_lag: default_max_lag(),
            reference_samples: default_reference_samples(),
            bins: default_bins(),
        }
    }
}

fn default_samples() -> usize {
    10_000
}
fn default_ridge() -> f64 {
    DEFAULT_RIDGE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    target: RawTarget,
    features: Value,
    schedule: ScheduleId,
    steps: usize,
    #[serde(default = "default_samples")]
    samples: usize,
    #[serde(default = "default_ridge")]
    ridge: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    generate: GenerateConfig,
    #[serde(default)]
    metrics: Vec<MetricKind>,
    #[serde(default)]
    series: bool,
    #[serde(default)]
    eval: EvalConfig,
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub target: Target,
    pub features: FeatureSpec,
    pub schedule: ScheduleId,
    /// Grid size `K`.
    pub steps: usize,
    /// Number of data pairs `N`.
    pub samples: usize,
    pub ridge: f64,
    pub seed: u64,
    pub generate: GenerateConfig,
    pub metrics: Vec<MetricKind>,
    /// Treat each sample row as a time series.
    pub series: bool,
    pub eval: EvalConfig,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

fn from_value<T: DeserializeOwned>(v: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let tail = pointer_of(e.path());
        let pointer = if tail == "/" {
            prefix.to_string()
        } else {
            format!("{prefix}{tail}")
        };
        Error::config(
            if pointer.is_empty() { "/".into() } else { pointer },
            e.inner().to_string(),
        )
    })
}

/// Expands `"name"` to `{"type": "name"}`, recursing into `concat` maps.
fn normalize_features(v: Value) -> Value {
    match v {
        Value::String(s) => serde_json::json!({ "type": s }),
        Value::Object(mut m) => {
            if let Some(Value::Array(maps)) = m.remove("maps") {
                m.insert(
                    "maps".into(),
                    Value::Array(maps.into_iter().map(normalize_features).collect()),
                );
            }
            Value::Object(m)
        }
        other => other,
    }
}

/// Parses a config document; relative CSV paths resolve against `base`.
pub fn parse_config_str(text: &str, base: Option<&Path>) -> Result<RunConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::config("/", format!("invalid JSON: {e}")))?;
    let raw: RawConfig = from_value(value, "")?;

    let RawTarget {
        gaussian,
        csv,
        mixture,
        ar1,
        cascade,
    } = raw.target;
    let mut found: Vec<Target> = Vec::new();
    found.extend(gaussian.map(Target::Gaussian));
    found.extend(csv.map(Target::Csv));
    found.extend(mixture.map(Target::Mixture));
    found.extend(ar1.map(Target::Ar1));
    found.extend(cascade.map(Target::Cascade));
    if found.len() != 1 {
        return Err(Error::config(
            "/target",
            format!(
                "exactly one target must be given (gaussian, csv, mixture, ar1 or cascade), found {}",
                found.len()
            ),
        ));
    }
    let mut target = found.pop().expect("one target");
    match &mut target {
        Target::Gaussian(g) => {
            g.build()
                .map_err(|e| Error::config("/target/gaussian", e.to_string()))?;
        }
        Target::Csv(c) => {
            if let Some(b) = base {
                if c.path.is_relative() {
                    c.path = b.join(&c.path);
                }
            }
        }
        Target::Mixture(m) => {
            m.validate()
                .map_err(|e| Error::config("/target/mixture", e.to_string()))?;
        }
        Target::Ar1(a) => {
            a.validate().map_err(|e| Error::config("/target/ar1", e.to_string()))?;
        }
        Target::Cascade(c) => {
            c.validate()
                .map_err(|e| Error::config("/target/cascade", e.to_string()))?;
        }
    }

    let features: FeatureSpec = from_value(normalize_features(raw.features), "/features")?;

    if raw.steps == 0 {
        return Err(Error::config("/steps", "steps must be at least 1"));
    }
    if raw.samples == 0 {
        return Err(Error::config("/samples", "samples must be at least 1"));
    }
    if !(raw.ridge >= 0.0) || !raw.ridge.is_finite() {
        return Err(Error::config("/ridge", "ridge must be finite and non-negative"));
    }
    if raw.schedule == ScheduleId::Custom {
        return Err(Error::config(
            "/schedule",
            "custom schedules cannot be configured from JSON",
        ));
    }
    if raw.generate.num_samples == 0 {
        return Err(Error::config("/generate/num_samples", "num_samples must be at least 1"));
    }
    if let Diffusion::Constant(d) = raw.generate.diffusion {
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Error::config(
                "/generate/diffusion",
                "constant diffusion must be finite and non-negative",
            ));
        }
    }
    if let Some(bw) = raw.eval.bandwidth {
        if !(bw > 0.0) || !bw.is_finite() {
            return Err(Error::config("/eval/bandwidth", "bandwidth must be positive"));
        }
    }
    if raw.eval.bins == 0 {
        return Err(Error::config("/eval/bins", "bins must be at least 1"));
    }
    Ok(RunConfig {
        target,
        features,
        schedule: raw.schedule,
        steps: raw.steps,
        samples: raw.samples,
        ridge: raw.ridge,
        seed: raw.seed,
        generate: raw.generate,
        metrics: raw.metrics,
        series: raw.series,
        eval: raw.eval,
    })
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path.parent())
}
