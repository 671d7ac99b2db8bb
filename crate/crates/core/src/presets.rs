//! End-to-end experiment presets at desk scale.
//!
//! Each preset returns a report with its raw measurements and a list of
//! named checks; callers decide how to print or persist them.

use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::{Array2, Axis};
use rand::seq::index::sample as sample_indices;
use serde::Serialize;

use crate::data::{circular_shifts, CascadeSpec};
use crate::diagnostics::{
    leverage_effect, leverage_effect_batch, mmd2, moment_report, Histogram, LeverageCurve, MetricReport, MmdEstimate,
    Reference,
};
use crate::error::{Error, Result};
use crate::features::{
    AffineField, Concat, EnsembleVelocity, FeatureMap, HaarScattering, LagCrossMoments, LinearCoordinates, OracleField,
    QuadraticMonomials, RadialQuadratic, VelocityField,
};
use crate::fit::{assemble, fit_table, interpolate, solve_eta, DataPairs, DriftTable, DEFAULT_RIDGE};
use crate::oracle::{path_kl_estimate, GaussianOracle, GaussianTarget};
use crate::rng::{self, Domain};
use crate::sampler::{generate, Diffusion, GenConfig, TableDrift};
use crate::schedule::{Schedule, ScheduleId};
use crate::sum::pairwise_sum;

pub const PRESET_NAMES: [&str; 3] = ["gauss2d", "series1d", "ensemble"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

/// The two-dimensional Gaussian used by `gauss2d` and `ensemble`.
pub fn gauss2d_target() -> GaussianTarget {
    GaussianTarget::new(vec![1.0, -1.0], DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]))
        .expect("fixed covariance is positive definite")
}

/// Coordinates, quadratic monomials and `|x|^2 / 2`.
pub fn quadratic_features(dim: usize) -> Concat {
    Concat::new(vec![
        Arc::new(LinearCoordinates::new(dim)),
        Arc::new(QuadraticMonomials::new(dim)),
        Arc::new(RadialQuadratic::new(dim)),
    ])
    .expect("maps share a dimension")
}

/// Evenly spread, seeded row subsample; the whole array when `n` covers it.
pub fn subsample_rows(x: &Array2<f64>, n: usize, seed: u64) -> Array2<f64> {
    if n >= x.nrows() {
        return x.clone();
    }
    let mut rng = rng::stream(seed, Domain::Evaluation, 1);
    let mut idx = sample_indices(&mut rng, x.nrows(), n).into_vec();
    idx.sort_unstable();
    x.select(Axis(0), &idx)
}

#[derive(Debug, Clone, Serialize)]
pub struct Gauss2dOptions {
    pub samples: usize,
    pub steps: usize,
    pub chains: usize,
    /// Points per side in the MMD comparison.
    pub mmd_points: usize,
    pub kl_nodes: usize,
    pub kl_draws: usize,
    pub seed: u64,
}

impl Default for Gauss2dOptions {
    fn default() -> Self {
        Self {
            samples: 50_000,
            steps: 200,
            chains: 50_000,
            mmd_points: 5_000,
            kl_nodes: 50,
            kl_draws: 2_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeResult {
    pub diffusion: String,
    pub moments: MetricReport,
    pub mmd: MmdEstimate,
    /// Path KL of the fitted drift against the exact one, when defined.
    pub path_kl: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Gauss2dReport {
    pub options: Gauss2dOptions,
    pub eigen_ratio: (f64, f64, f64),
    pub modes: Vec<ModeResult>,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub table: DriftTable,
    /// Terminal states of the optimal-diffusion run.
    #[serde(skip)]
    pub optimal_samples: Array2<f64>,
}

pub fn gauss2d(opts: &Gauss2dOptions) -> Result<Gauss2dReport> {
    let g = gauss2d_target();
    let s = Schedule::Trigonometric;
    let f = quadratic_features(2);
    let data = g.sample(opts.samples, &mut rng::stream(opts.seed, Domain::Target, 0));
    let pairs = DataPairs::with_generated_noise(data, opts.seed)?;
    let (table, fit) = fit_table(&f, &pairs, &s, opts.steps, DEFAULT_RIDGE)?;
    let drift = TableDrift::new(&table, &f)?;
    let oracle = GaussianOracle::new(g.clone(), s.clone());
    let fresh = g.sample(opts.mmd_points, &mut rng::stream(opts.seed, Domain::Evaluation, 0));

    let mut modes = Vec::new();
    let mut checks = Vec::new();
    let mut optimal_samples = Array2::zeros((0, 2));
    for mode in [Diffusion::Optimal, Diffusion::Zero, Diffusion::Constant(1.0)] {
        let cfg = GenConfig {
            steps: opts.steps,
            num_samples: opts.chains,
            seed: opts.seed,
            schedule: ScheduleId::Trigonometric,
            diffusion: mode,
        };
        let out = generate(&drift, &s, &cfg)?;
        let moments = moment_report(out.states.view(), Reference::Gaussian(&g))?;
        let sub = subsample_rows(&out.states, opts.mmd_points, opts.seed);
        let mmd = mmd2(sub.view(), fresh.view(), None)?;
        let path_kl = match mode {
            Diffusion::Zero => None,
            _ => Some(path_kl_estimate(&drift, &oracle, mode, opts.kl_nodes, opts.kl_draws, opts.seed)?.total),
        };
        if mode == Diffusion::Optimal {
            let zm = moments.max_abs_z("mean");
            let zc = moments.max_abs_z("cov");
            checks.push(Check::new("mean within 4 SE", zm <= 4.0, format!("max |z| = {zm:.3}")));
            checks.push(Check::new(
                "covariance within 4 SE",
                zc <= 4.0,
                format!("max |z| = {zc:.3}"),
            ));
            let z = mmd.estimate / mmd.std_error;
            checks.push(Check::new(
                "MMD^2 within 3 SE of 0",
                mmd.estimate <= 3.0 * mmd.std_error,
                format!("mmd2 = {:.3e}, se = {:.3e}, z = {z:.3}", mmd.estimate, mmd.std_error),
            ));
            optimal_samples = out.states;
        }
        modes.push(ModeResult {
            diffusion: mode.label(),
            moments,
            mmd,
            path_kl,
        });
    }
    Ok(Gauss2dReport {
        options: opts.clone(),
        eigen_ratio: fit.eigen_ratio_summary(),
        modes,
        checks,
        table,
        optimal_samples,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Series1dOptions {
    pub length: usize,
    pub levels: usize,
    pub lags: usize,
    /// Circular shifts of the single training realization.
    pub shifts: usize,
    pub steps: usize,
    pub chains: usize,
    /// Values per side in the marginal MMD.
    pub mmd_points: usize,
    pub max_lag: usize,
    pub bins: usize,
    pub seed: u64,
}

impl Default for Series1dOptions {
    fn default() -> Self {
        Self {
            length: 4096,
            levels: 6,
            lags: 3,
            shifts: 16,
            steps: 1200,
            chains: 16,
            mmd_points: 4096,
            max_lag: 5,
            bins: 60,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Series1dReport {
    pub options: Series1dOptions,
    pub features: usize,
    pub eigen_ratio: (f64, f64, f64),
    /// MMD^2 between generated values and the training realization.
    pub mmd_generated: MmdEstimate,
    /// MMD^2 between a held-out realization and the training realization.
    pub mmd_heldout: MmdEstimate,
    pub leverage_data: LeverageCurve,
    pub leverage_generated: LeverageCurve,
    pub histogram_data: Histogram,
    pub histogram_generated: Histogram,
    pub histogram_heldout: Histogram,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub samples: Array2<f64>,
}

/// Pools all entries of `x` into a column and keeps `n` of them.
fn pooled_values(x: &Array2<f64>, n: usize, seed: u64) -> Array2<f64> {
    let col = Array2::from_shape_vec((x.len(), 1), x.iter().copied().collect()).expect("shape");
    subsample_rows(&col, n, seed)
}

pub fn series_features(length: usize, levels: usize, lags: usize) -> Result<Concat> {
    Concat::new(vec![
        Arc::new(HaarScattering::new(length, levels)?),
        Arc::new(LagCrossMoments::new(length, lags)?),
    ])
}

pub fn series1d(opts: &Series1dOptions) -> Result<Series1dReport> {
    let spec = CascadeSpec::new(opts.length);
    let train = spec.realization(&mut rng::stream(opts.seed, Domain::Target, 0))?;
    let heldout = spec.realization(&mut rng::stream(opts.seed, Domain::Evaluation, 0))?;
    let s = Schedule::Trigonometric;
    let f = series_features(opts.length, opts.levels, opts.lags)?;
    let data = circular_shifts(&train, opts.shifts, opts.seed)?;
    let pairs = DataPairs::with_generated_noise(data, opts.seed)?;
    let (table, fit) = fit_table(&f, &pairs, &s, opts.steps, DEFAULT_RIDGE)?;
    let drift = TableDrift::new(&table, &f)?;
    let cfg = GenConfig {
        steps: opts.steps,
        num_samples: opts.chains,
        seed: opts.seed,
        schedule: ScheduleId::Trigonometric,
        diffusion: Diffusion::Optimal,
    };
    let out = generate(&drift, &s, &cfg)?;

    let train_col = pooled_values(
        &Array2::from_shape_vec((1, opts.length), train.clone()).expect("shape"),
        opts.mmd_points,
        opts.seed,
    );
    let held_col = pooled_values(
        &Array2::from_shape_vec((1, opts.length), heldout.clone()).expect("shape"),
        opts.mmd_points,
        opts.seed,
    );
    let gen_col = pooled_values(&out.states, opts.mmd_points, opts.seed);
    let bw = crate::diagnostics::median_bandwidth(train_col.view(), held_col.view())?;
    let mmd_generated = mmd2(gen_col.view(), train_col.view(), Some(bw))?;
    let mmd_heldout = mmd2(held_col.view(), train_col.view(), Some(bw))?;

    let leverage_data = leverage_effect(&train, opts.max_lag)?;
    let leverage_generated = leverage_effect_batch(out.states.view(), opts.max_lag)?;

    let lim = train.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12) * 1.05;
    let all_gen: Vec<f64> = out.states.iter().copied().collect();
    let histogram_data = Histogram::new(&train, -lim, lim, opts.bins)?;
    let histogram_generated = Histogram::new(&all_gen, -lim, lim, opts.bins)?;
    let histogram_heldout = Histogram::new(&heldout, -lim, lim, opts.bins)?;

    let gap = mmd_generated.estimate - mmd_heldout.estimate;
    let se = mmd_generated.std_error.hypot(mmd_heldout.std_error);
    let (lev_d, _) = leverage_data.at(1).expect("lag 1 present");
    let (lev_g, lev_se) = leverage_generated.at(1).expect("lag 1 present");
    let checks = vec![
        Check::new(
            "marginal MMD^2 within 3 SE of held-out distance",
            gap <= 3.0 * se,
            format!(
                "generated {:.3e}, held-out {:.3e}, gap/se = {:.3}",
                mmd_generated.estimate,
                mmd_heldout.estimate,
                gap / se
            ),
        ),
        Check::new(
            "lag-1 leverage negative, as in data",
            lev_d < 0.0 && lev_g < 0.0,
            format!("data {lev_d:.4}, generated {lev_g:.4} (se {lev_se:.4})"),
        ),
    ];
    Ok(Series1dReport {
        options: opts.clone(),
        features: f.dim_out(),
        eigen_ratio: fit.eigen_ratio_summary(),
        mmd_generated,
        mmd_heldout,
        leverage_data,
        leverage_generated,
        histogram_data,
        histogram_generated,
        histogram_heldout,
        checks,
        samples: out.states,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleOptions {
    pub samples: usize,
    pub times: Vec<f64>,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            samples: 20_000,
            times: (1..=9).map(|i| i as f64 / 10.0).collect(),
            ridge: DEFAULT_RIDGE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleRow {
    pub t: f64,
    /// In-sample `E|b_i - b|^2` for each field.
    pub field_mse: Vec<f64>,
    pub combined_mse: f64,
    /// In-sample regression loss `E|b_i - dI/dt|^2` for each field.
    pub field_loss: Vec<f64>,
    pub combined_loss: f64,
    pub eta: Vec<f64>,
    /// Allowance for the ridge shift in the comparison.
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleReport {
    pub options: EnsembleOptions,
    pub rows: Vec<EnsembleRow>,
    pub checks: Vec<Check>,
}

/// Affine perturbations `(A, c)` of the three preset fields. They sum to
/// zero, so the equal-weight combination recovers the exact drift while no
/// single field does.
pub fn ensemble_perturbations() -> [(Vec<f64>, Vec<f64>); 3] {
    let p1 = (vec![0.6, 0.0, 0.0, -0.2], vec![0.3, -0.1]);
    let p2 = (vec![-0.2, 0.5, 0.5, 0.1], vec![-0.4, 0.2]);
    let p3 = (
        p1.0.iter().zip(&p2.0).map(|(a, b)| -(a + b)).collect(),
        p1.1.iter().zip(&p2.1).map(|(a, b)| -(a + b)).collect(),
    );
    [p1, p2, p3]
}

pub fn ensemble_fields(schedule: &Schedule) -> Result<Vec<Arc<dyn VelocityField>>> {
    let g = gauss2d_target();
    ensemble_perturbations()
        .into_iter()
        .map(|(a, c)| {
            let field = OracleField::new(
                GaussianOracle::new(g.clone(), schedule.clone()),
                AffineField::new(a, c)?,
            )?;
            Ok(Arc::new(field) as Arc<dyn VelocityField>)
        })
        .collect()
}

fn mean_sq(diffs: &[f64], n: usize) -> f64 {
    pairwise_sum(diffs) / n as f64
}

pub fn ensemble(opts: &EnsembleOptions) -> Result<EnsembleReport> {
    let g = gauss2d_target();
    let s = Schedule::Trigonometric;
    let oracle = GaussianOracle::new(g.clone(), s.clone());
    let fields = ensemble_fields(&s)?;
    let map = EnsembleVelocity::new(fields.clone())?;
    let data = g.sample(opts.samples, &mut rng::stream(opts.seed, Domain::Target, 0));
    let pairs = DataPairs::with_generated_noise(data, opts.seed)?;
    let n = pairs.len();
    let p = fields.len();
    let mut rows = Vec::new();
    for &t in &opts.times {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::invalid(format!("ensemble times must lie in (0, 1), got {t}")));
        }
        let batch = interpolate(&pairs, &s, t);
        let sys = assemble(&map, &batch)?;
        let sol = solve_eta(&sys, opts.ridge)?;
        let shift = opts.ridge * sys.k.trace() / p as f64;
        let mut field_err = vec![Vec::with_capacity(n); p];
        let mut field_res = vec![Vec::with_capacity(n); p];
        let mut comb_err = Vec::with_capacity(n);
        let mut comb_res = Vec::with_capacity(n);
        let mut vals = vec![vec![0.0; 2]; p];
        let mut exact = vec![0.0; 2];
        for (x, v) in batch.states.rows().into_iter().zip(batch.velocities.rows()) {
            let x = x.to_slice().expect("contiguous");
            oracle.exact_drift_into(t, x, &mut exact);
            for (i, f) in fields.iter().enumerate() {
                f.eval_into(x, t, &mut vals[i]);
            }
            let mut comb = [0.0; 2];
            for (i, val) in vals.iter().enumerate() {
                for k in 0..2 {
                    comb[k] += sol.eta[i] * val[k];
                }
            }
            let sq = |u: &[f64], w: &[f64]| u.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let vel = [v[0], v[1]];
            for i in 0..p {
                field_err[i].push(sq(&vals[i], &exact));
                field_res[i].push(sq(&vals[i], &vel));
            }
            comb_err.push(sq(&comb, &exact));
            comb_res.push(sq(&comb, &vel));
        }
        let eta_sq: f64 = sol.eta.iter().map(|e| e * e).sum();
        rows.push(EnsembleRow {
            t,
            field_mse: field_err.iter().map(|e| mean_sq(e, n)).collect(),
            combined_mse: mean_sq(&comb_err, n),
            field_loss: field_res.iter().map(|e| mean_sq(e, n)).collect(),
            combined_loss: mean_sq(&comb_res, n),
            eta: sol.eta,
            slack: 1e-8 + shift * (eta_sq + 1.0),
        });
    }
    let mut checks = Vec::new();
    let worst = rows
        .iter()
        .map(|r| r.combined_mse - (r.field_mse.iter().cloned().fold(f64::INFINITY, f64::min) + r.slack))
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::new(
        "combined drift MSE <= best single field at every t",
        worst <= 0.0,
        format!("largest excess over best field {worst:.3e}"),
    ));
    if let Some(mid) = rows.iter().find(|r| (r.t - 0.5).abs() < 1e-12) {
        let best = mid.field_mse.iter().cloned().fold(f64::INFINITY, f64::min);
        checks.push(Check::new(
            "combined MSE at least 10% below best field at t = 0.5",
            mid.combined_mse <= 0.9 * best,
            format!("combined {:.4e}, best field {best:.4e}", mid.combined_mse),
        ));
    }
    Ok(EnsembleReport {
        options: opts.clone(),
        rows,
        checks,
    })
}
