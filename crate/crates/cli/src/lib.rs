//! The `ksi` command-line front end: fit, generate, eval and preset.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::{Array2, ArrayView2};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use ksi_core::diagnostics::{
    leverage_effect, leverage_effect_batch, mmd2, moment_report, total_variation, Histogram, LeverageCurve,
    MetricReport, Reference,
};
use ksi_core::io::{encode_csv, parse_config, read_csv_samples, read_table, write_atomic, MetricKind, RunConfig};
use ksi_core::presets::{self, all_passed, Check, PRESET_NAMES};
use ksi_core::{fit_table, generate, DataPairs, Error, GenConfig, Schedule, TableDrift};

pub const EXIT_OK: u8 = 0;
/// A preset ran to completion but one of its checks failed.
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ksi",
    version,
    about = "Kernel drift regression and SDE sampling for stochastic interpolants"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Run directory; defaults to runs/<config hash>.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a drift table from the configured target.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Generate samples from a fitted table.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Table file; defaults to table.ksid in the run directory.
        #[arg(long)]
        table: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare samples against the configured target.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Samples to evaluate; defaults to samples.csv in the run directory.
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Comma-separated metrics, replacing the config list.
        #[arg(long, value_delimiter = ',')]
        metrics: Option<Vec<String>>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a built-in experiment.
    Preset {
        name: String,
        /// Accepted for symmetry with the other commands; presets are not configurable.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    ChecksFailed,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::ChecksFailed => EXIT_CHECK_FAILED,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => f.write_str(m),
            CliError::ChecksFailed => f.write_str("one or more preset checks failed"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Records what a command read and wrote.
#[derive(Debug, Serialize)]
struct Manifest {
    command: String,
    version: &'static str,
    seed: u64,
    config: Value,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Value::is_null")]
    summary: Value,
}

impl Manifest {
    fn new(command: &str, seed: u64, config: Value) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            summary: Value::Null,
        }
    }

    fn input(&mut self, path: &Path) -> CliResult<()> {
        let h = hash_file(path)?;
        self.inputs.insert(path.display().to_string(), h);
        Ok(())
    }

    /// Writes `bytes` under the run directory and records their hash.
    fn output(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = dir.join(name);
        write_atomic(&path, bytes)?;
        self.outputs.insert(name.into(), sha256_hex(bytes));
        Ok(path)
    }

    fn finish(self, dir: &Path, name: &str) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&dir.join(name), text.as_bytes())?;
        Ok(())
    }
}

struct Loaded {
    config: RunConfig,
    json: Value,
    hash: String,
}

fn load_config(path: &Path, seed: Option<u64>) -> CliResult<Loaded> {
    let mut config = parse_config(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let json = serde_json::to_value(&config).expect("config serializes");
    let hash = sha256_hex(serde_json::to_string(&json).expect("value serializes").as_bytes());
    Ok(Loaded { config, json, hash })
}

fn run_dir(common: &Common, hash: &str) -> CliResult<PathBuf> {
    let dir = match &common.out {
        Some(d) => d.clone(),
        None => PathBuf::from("runs").join(&hash[..16]),
    };
    fs::create_dir_all(&dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn configure_threads(threads: Option<usize>) -> CliResult<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        // A second call in the same process (tests) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn add_csv_input(m: &mut Manifest, config: &RunConfig) -> CliResult<()> {
    if let ksi_core::io::Target::Csv(c) = &config.target {
        m.input(&c.path)?;
    }
    Ok(())
}

pub fn cmd_fit(config: &Path, common: &Common) -> CliResult<PathBuf> {
    configure_threads(common.threads)?;
    let l = load_config(config, common.seed)?;
    let c = &l.config;
    let data = c.target.training_data(c.samples, c.seed)?;
    let dim = data.ncols();
    let f = c.features.build(dim)?;
    let s = Schedule::from_id(c.schedule)?;
    let pairs = DataPairs::with_generated_noise(data, c.seed)?;
    let (table, report) = fit_table(f.as_ref(), &pairs, &s, c.steps, c.ridge)?;
    if c.ridge == 0.0 {
        if let Some(node) = report.first_pseudo_inverse() {
            return Err(Error::RankDeficient { k: node.k, t: node.t }.into());
        }
    }
    let (lo, med, hi) = report.eigen_ratio_summary();
    println!(
        "fitted {} nodes, P = {}, N = {}; Gram eigenvalue ratio min {lo:.3e} median {med:.3e} max {hi:.3e}",
        table.steps(),
        table.features(),
        pairs.len()
    );
    if let Some(node) = report.first_pseudo_inverse() {
        println!("note: pseudo-inverse used from node k={} (t={})", node.k, node.t);
    }

    let dir = run_dir(common, &l.hash)?;
    let mut m = Manifest::new("fit", c.seed, l.json.clone());
    m.input(config)?;
    add_csv_input(&mut m, c)?;
    let bytes = ksi_core::io::encode_table(&table)?;
    let path = m.output(&dir, "table.ksid", &bytes)?;
    m.summary = json!({
        "nodes": table.steps(),
        "features": table.features(),
        "eigen_ratio": {"min": lo, "median": med, "max": hi},
        "per_node": report.nodes,
    });
    m.finish(&dir, "fit_manifest.json")?;
    println!("wrote {}", path.display());
    Ok(path)
}

pub fn cmd_generate(config: &Path, table: Option<&Path>, common: &Common) -> CliResult<PathBuf> {
    configure_threads(common.threads)?;
    let l = load_config(config, common.seed)?;
    let c = &l.config;
    let dir = run_dir(common, &l.hash)?;
    let table_path = table.map(Path::to_path_buf).unwrap_or_else(|| dir.join("table.ksid"));
    let t = read_table(&table_path)?;
    if t.schedule != c.schedule {
        return Err(usage(format!(
            "schedule mismatch: table was fitted with '{}', config asks for '{}'",
            t.schedule, c.schedule
        )));
    }
    let f = c.features.build(t.dim)?;
    if f.descriptor() != t.descriptor.features {
        return Err(usage(format!(
            "feature map mismatch: table has {}, config builds {}",
            t.descriptor.features,
            f.descriptor()
        )));
    }
    let s = Schedule::from_id(c.schedule)?;
    let drift = TableDrift::new(&t, f.as_ref())?;
    let cfg = GenConfig {
        steps: t.steps(),
        num_samples: c.generate.num_samples,
        seed: c.seed,
        schedule: c.schedule,
        diffusion: c.generate.diffusion,
    };
    let out = generate(&drift, &s, &cfg)?;
    let mut m = Manifest::new("generate", c.seed, l.json.clone());
    m.input(config)?;
    m.input(&table_path)?;
    let path = m.output(&dir, "samples.csv", &encode_csv(&out.states, None))?;
    m.summary = json!({
        "samples": out.states.nrows(),
        "dim": out.states.ncols(),
        "steps": cfg.steps,
        "diffusion": cfg.diffusion.label(),
    });
    m.finish(&dir, "generate_manifest.json")?;
    println!(
        "wrote {} ({} samples, {} diffusion, {} steps)",
        path.display(),
        out.states.nrows(),
        cfg.diffusion.label(),
        cfg.steps
    );
    Ok(path)
}

fn parse_metrics(names: &[String]) -> CliResult<Vec<MetricKind>> {
    names
        .iter()
        .filter(|n| !n.trim().is_empty())
        .map(|n| {
            serde_json::from_value(Value::String(n.trim().to_string())).map_err(|_| {
                usage(format!(
                    "unknown metric '{n}' (expected mmd, moments, leverage or histogram)"
                ))
            })
        })
        .collect()
}

/// Every value of `x` as one column.
fn pooled(x: ArrayView2<f64>) -> Array2<f64> {
    Array2::from_shape_vec((x.len(), 1), x.iter().copied().collect()).expect("shape")
}

fn leverage_of(x: ArrayView2<f64>, series: bool, max_lag: usize) -> ksi_core::Result<LeverageCurve> {
    if series {
        leverage_effect_batch(x, max_lag)
    } else {
        let col: Vec<f64> = x.column(0).to_vec();
        leverage_effect(&col, max_lag)
    }
}

pub fn cmd_eval(
    config: &Path,
    samples: Option<&Path>,
    metrics: Option<&[String]>,
    common: &Common,
) -> CliResult<PathBuf> {
    configure_threads(common.threads)?;
    let l = load_config(config, common.seed)?;
    let c = &l.config;
    let kinds = match metrics {
        Some(names) => parse_metrics(names)?,
        None => c.metrics.clone(),
    };
    if kinds.is_empty() {
        return Err(usage(
            "no metrics requested: give a nonempty \"metrics\" list or --metrics",
        ));
    }
    let dir = run_dir(common, &l.hash)?;
    let samples_path = samples
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join("samples.csv"));
    let x = read_csv_samples(&samples_path, None)?;
    let d = x.ncols();
    let series = c.series;
    if kinds.contains(&MetricKind::Leverage) && d > 1 && !series {
        return Err(usage(format!(
            "the leverage metric needs time series: samples have {d} columns, so set \"series\": true \
             to treat each row as a path (or give one-column samples, read as a single path)"
        )));
    }
    let reference = c.target.reference_data(c.eval.reference_samples, c.seed)?;
    if reference.ncols() != d {
        return Err(usage(format!(
            "samples have {d} columns but the target has dimension {}",
            reference.ncols()
        )));
    }
    let gaussian = c.target.gaussian()?;

    let mut report = MetricReport::default();
    let mut m = Manifest::new("eval", c.seed, l.json.clone());
    m.input(config)?;
    m.input(&samples_path)?;
    add_csv_input(&mut m, c)?;
    report.meta.insert("samples".into(), json!(x.nrows()));
    report.meta.insert("reference_samples".into(), json!(reference.nrows()));

    for kind in &kinds {
        match kind {
            MetricKind::Mmd => {
                let (a, b) = if series {
                    (pooled(x.view()), pooled(reference.view()))
                } else {
                    (x.clone(), reference.clone())
                };
                let e = mmd2(a.view(), b.view(), c.eval.bandwidth)?;
                report.insert("mmd2", e.estimate, e.std_error);
                report.meta.insert("mmd_bandwidth".into(), json!(e.bandwidth));
            }
            MetricKind::Moments => {
                let r = match &gaussian {
                    Some(g) => moment_report(x.view(), Reference::Gaussian(g))?,
                    None => moment_report(x.view(), Reference::Empirical(reference.view()))?,
                };
                report.merge(r);
            }
            MetricKind::Leverage => {
                let lg = leverage_of(x.view(), series, c.eval.max_lag)?;
                let lr = leverage_of(reference.view(), series, c.eval.max_lag)?;
                let mut text = String::from("lag,generated,generated_se,reference,reference_se\n");
                for (i, lag) in lg.lags.iter().enumerate() {
                    text.push_str(&format!(
                        "{lag},{:?},{:?},{:?},{:?}\n",
                        lg.corr[i], lg.std_error[i], lr.corr[i], lr.std_error[i]
                    ));
                    report.insert(format!("leverage[{lag}]"), lg.corr[i], lg.std_error[i]);
                }
                m.output(&dir, "leverage.csv", text.as_bytes())?;
            }
            MetricKind::Histogram => {
                let mut text = String::from("coordinate,lo,hi,generated,reference\n");
                let cols: Vec<(String, Vec<f64>, Vec<f64>)> = if series || d == 1 {
                    vec![(
                        "all".into(),
                        x.iter().copied().collect(),
                        reference.iter().copied().collect(),
                    )]
                } else {
                    (0..d)
                        .map(|i| (i.to_string(), x.column(i).to_vec(), reference.column(i).to_vec()))
                        .collect()
                };
                let mut tvs = BTreeMap::new();
                for (name, gv, rv) in cols {
                    let lim = rv.iter().chain(&gv).fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12) * 1.05;
                    let hg = Histogram::new(&gv, -lim, lim, c.eval.bins)?;
                    let hr = Histogram::new(&rv, -lim, lim, c.eval.bins)?;
                    for b in 0..c.eval.bins {
                        text.push_str(&format!(
                            "{name},{:?},{:?},{:?},{:?}\n",
                            hg.edges[b],
                            hg.edges[b + 1],
                            hg.density[b],
                            hr.density[b]
                        ));
                    }
                    tvs.insert(name, total_variation(&hg, &hr)?);
                }
                report.meta.insert("total_variation".into(), json!(tvs));
                m.output(&dir, "histogram.csv", text.as_bytes())?;
            }
        }
    }
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    println!("{text}");
    let path = m.output(&dir, "report.json", text.as_bytes())?;
    m.finish(&dir, "eval_manifest.json")?;
    Ok(path)
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

pub fn cmd_preset(name: &str, common: &Common) -> CliResult<PathBuf> {
    configure_threads(common.threads)?;
    if !PRESET_NAMES.contains(&name) {
        return Err(usage(format!(
            "unknown preset '{name}'; available: {}",
            PRESET_NAMES.join(", ")
        )));
    }
    let seed = common.seed.unwrap_or(0);
    let hash = sha256_hex(format!("preset:{name}:{seed}").as_bytes());
    let dir = run_dir(common, &hash)?;
    let mut m = Manifest::new(&format!("preset {name}"), seed, json!({"preset": name}));
    let checks = match name {
        "gauss2d" => {
            let r = presets::gauss2d(&presets::Gauss2dOptions {
                seed,
                ..Default::default()
            })?;
            println!("mode            mean max|z|  cov max|z|  mmd2 (se)              path KL");
            for mode in &r.modes {
                println!(
                    "{:<15} {:>11.2} {:>11.2}  {:>9.2e} ({:.2e})  {}",
                    mode.diffusion,
                    mode.moments.max_abs_z("mean"),
                    mode.moments.max_abs_z("cov"),
                    mode.mmd.estimate,
                    mode.mmd.std_error,
                    mode.path_kl.map_or("-".into(), |k| format!("{k:.3e}"))
                );
            }
            m.output(&dir, "table.ksid", &ksi_core::io::encode_table(&r.table)?)?;
            m.output(&dir, "samples.csv", &encode_csv(&r.optimal_samples, None))?;
            m.output(&dir, "report.json", &json_bytes(&r))?;
            r.checks
        }
        "series1d" => {
            let r = presets::series1d(&presets::Series1dOptions {
                seed,
                ..Default::default()
            })?;
            let mut density = String::from("lo,hi,data,generated,heldout\n");
            let (hd, hg, hh) = (&r.histogram_data, &r.histogram_generated, &r.histogram_heldout);
            for b in 0..hd.density.len() {
                density.push_str(&format!(
                    "{:?},{:?},{:?},{:?},{:?}\n",
                    hd.edges[b],
                    hd.edges[b + 1],
                    hd.density[b],
                    hg.density[b],
                    hh.density[b]
                ));
            }
            let mut lev = String::from("lag,data,generated,generated_se\n");
            for (i, lag) in r.leverage_data.lags.iter().enumerate() {
                lev.push_str(&format!(
                    "{lag},{:?},{:?},{:?}\n",
                    r.leverage_data.corr[i], r.leverage_generated.corr[i], r.leverage_generated.std_error[i]
                ));
            }
            println!(
                "P = {}; mmd2 generated {:.3e} (se {:.2e}), held-out {:.3e} (se {:.2e})",
                r.features,
                r.mmd_generated.estimate,
                r.mmd_generated.std_error,
                r.mmd_heldout.estimate,
                r.mmd_heldout.std_error
            );
            m.output(&dir, "density.csv", density.as_bytes())?;
            m.output(&dir, "leverage.csv", lev.as_bytes())?;
            m.output(&dir, "samples.csv", &encode_csv(&r.samples, None))?;
            m.output(&dir, "report.json", &json_bytes(&r))?;
            r.checks
        }
        "ensemble" => {
            let r = presets::ensemble(&presets::EnsembleOptions {
                seed,
                ..Default::default()
            })?;
            let mut table = String::from("t,field_1,field_2,field_3,combined,eta_1,eta_2,eta_3\n");
            println!("  t    field 1    field 2    field 3   combined");
            for row in &r.rows {
                println!(
                    "{:.1}  {:>9.3e}  {:>9.3e}  {:>9.3e}  {:>9.3e}",
                    row.t, row.field_mse[0], row.field_mse[1], row.field_mse[2], row.combined_mse
                );
                table.push_str(&format!(
                    "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}\n",
                    row.t,
                    row.field_mse[0],
                    row.field_mse[1],
                    row.field_mse[2],
                    row.combined_mse,
                    row.eta[0],
                    row.eta[1],
                    row.eta[2]
                ));
            }
            m.output(&dir, "ensemble.csv", table.as_bytes())?;
            m.output(&dir, "report.json", &json_bytes(&r))?;
            r.checks
        }
        _ => unreachable!("name checked above"),
    };
    print_checks(&checks);
    m.summary = json!({"passed": all_passed(&checks)});
    m.finish(&dir, "preset_manifest.json")?;
    println!("outputs in {}", dir.display());
    if all_passed(&checks) {
        Ok(dir)
    } else {
        Err(CliError::ChecksFailed)
    }
}

/// Runs a parsed command, returning the process exit code.
pub fn run(cli: Cli) -> u8 {
    let result = match &cli.command {
        Command::Fit { config, common } => cmd_fit(config, common).map(drop),
        Command::Generate { config, table, common } => cmd_generate(config, table.as_deref(), common).map(drop),
        Command::Eval {
            config,
            samples,
            metrics,
            common,
        } => cmd_eval(config, samples.as_deref(), metrics.as_deref(), common).map(drop),
        Command::Preset { name, config, common } => {
            if config.is_some() {
                eprintln!("note: presets ignore --config");
            }
            cmd_preset(name, common).map(drop)
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            if !matches!(e, CliError::ChecksFailed) {
                eprintln!("error: {e}");
            } else {
                eprintln!("{e}");
            }
            e.exit_code()
        }
    }
}
