//! Sample generation by integrating the drift-table SDE.
//!
//! Two steppers are provided. [`step_optimal`] integrates the dynamics with
//! the optimal diffusion `D_t* = alpha gamma / beta` written as an equation
//! for `beta_t X_t`; the state coefficient `beta_t / beta_{t+h}` is exactly
//! zero on the first step, so the infinite diffusion at `t = 0` needs no
//! special handling. [`step_generic`] is plain Euler-Maruyama for any
//! constant `D >= 0`.
//!
//! The reversed-time process of the optimal dynamics is linear and
//! target-free; [`reversed_ou_generate`] integrates it exactly and serves as
//! a validation tool.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::fit::DriftTable;
use crate::rng::{self, Domain};
use crate::schedule::{Schedule, ScheduleId};

/// Anything that can evaluate an approximate drift `bhat_t(x)`.
pub trait DriftSource: Send + Sync {
    fn dim(&self) -> usize;

    fn drift_into(&self, x: &[f64], t: f64, scratch: &mut Vec<f64>, out: &mut [f64]);

    /// Step count of the grid this source was fitted on, if any.
    fn grid_steps(&self) -> Option<usize> {
        None
    }
}

/// A drift table paired with the feature map it was fitted with.
/// Coefficients are looked up at the grid node left of `t`.
pub struct TableDrift<'a> {
    table: &'a DriftTable,
    map: &'a dyn FeatureMap,
}

impl<'a> TableDrift<'a> {
    pub fn new(table: &'a DriftTable, map: &'a dyn FeatureMap) -> Result<Self> {
        if table.features() != map.dim_out() {
            return Err(Error::DimensionMismatch {
                what: "table feature count",
                expected: map.dim_out(),
                got: table.features(),
            });
        }
        if table.dim != map.dim_in() {
            return Err(Error::DimensionMismatch {
                what: "table state dimension",
                expected: map.dim_in(),
                got: table.dim,
            });
        }
        Ok(Self { table, map })
    }
}

impl DriftSource for TableDrift<'_> {
    fn dim(&self) -> usize {
        self.table.dim
    }

    fn drift_into(&self, x: &[f64], t: f64, scratch: &mut Vec<f64>, out: &mut [f64]) {
        self.map.drift_into(x, t, self.table.eta_at(t), scratch, out);
    }

    fn grid_steps(&self) -> Option<usize> {
        Some(self.table.steps())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diffusion {
    /// `D_t = alpha_t gamma_t / beta_t`.
    Optimal,
    Constant(f64),
    /// Probability-flow ODE.
    Zero,
}

impl Diffusion {
    pub fn label(&self) -> String {
        match self {
            Diffusion::Optimal => "optimal".into(),
            Diffusion::Constant(d) => format!("constant({d})"),
            Diffusion::Zero => "zero".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub steps: usize,
    pub num_samples: usize,
    pub seed: u64,
    pub schedule: ScheduleId,
    pub diffusion: Diffusion,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("step count must be at least 1"));
        }
        if self.num_samples == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        if let Diffusion::Constant(d) = self.diffusion {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::invalid(format!(
                    "diffusion must be finite and non-negative, got {d}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    /// `M x d`, one row per chain.
    pub states: Array2<f64>,
    pub config: GenConfig,
    /// RNG stream index of each row.
    pub streams: Vec<u64>,
}

/// Affine one-step map `x' = state * x + drift * bhat(x) + noise * g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients {
    pub state: f64,
    pub drift: f64,
    pub noise: f64,
}

/// Coefficients of the optimal-diffusion step from `t` to `t + h`:
///
/// ```text
/// state = beta_t / beta_{t+h}
/// drift = h (1 + beta_t / beta_{t+h})
/// noise = sqrt(h (alpha_t beta_t gamma_t + alpha_{t+h} beta_{t+h} gamma_{t+h})) / beta_{t+h}
/// ```
pub fn optimal_coefficients(s: &Schedule, t: f64, h: f64) -> Result<StepCoefficients> {
    let u = t + h;
    let (bt, bu) = (s.beta(t), s.beta(u));
    if !(bu > 0.0) {
        return Err(Error::invalid(format!(
            "optimal step needs beta(t + h) > 0, got {bu} at {u}"
        )));
    }
    let ratio = bt / bu;
    let var = h * (s.alpha(t) * bt * s.gamma(t) + s.alpha(u) * bu * s.gamma(u));
    Ok(StepCoefficients {
        state: ratio,
        drift: h * (1.0 + ratio),
        noise: var.max(0.0).sqrt() / bu,
    })
}

/// Euler-Maruyama coefficients for constant diffusion `d` at time `t`:
/// `state = 1 - h d dbeta / (alpha gamma)`, `drift = h (1 + d beta / (alpha gamma))`,
/// `noise = sqrt(2 d h)`.
pub fn generic_coefficients(s: &Schedule, t: f64, h: f64, d: f64) -> Result<StepCoefficients> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::invalid(format!(
            "diffusion must be finite and non-negative, got {d}"
        )));
    }
    if d == 0.0 {
        return Ok(StepCoefficients {
            state: 1.0,
            drift: h,
            noise: 0.0,
        });
    }
    let ag = s.alpha(t) * s.gamma(t);
    if !(ag > 0.0) {
        return Err(Error::invalid(format!("alpha * gamma vanishes at t = {t}")));
    }
    Ok(StepCoefficients {
        state: 1.0 - h * d * s.dbeta(t) / ag,
        drift: h * (1.0 + d * s.beta(t) / ag),
        noise: (2.0 * d * h).sqrt(),
    })
}

fn apply_step(
    c: StepCoefficients,
    drift: &dyn DriftSource,
    x: &[f64],
    t: f64,
    g: &[f64],
    scratch: &mut Vec<f64>,
    out: &mut [f64],
) {
    drift.drift_into(x, t, scratch, out);
    for i in 0..x.len() {
        out[i] = c.state * x[i] + c.drift * out[i] + c.noise * g[i];
    }
}

fn check_lengths(drift: &dyn DriftSource, x: &[f64], g: &[f64]) -> Result<()> {
    for (what, len) in [("state length", x.len()), ("noise length", g.len())] {
        if len != drift.dim() {
            return Err(Error::DimensionMismatch {
                what,
                expected: drift.dim(),
                got: len,
            });
        }
    }
    Ok(())
}

/// One optimal-diffusion step from `t` to `t + h` with noise `g`.
pub fn step_optimal(drift: &dyn DriftSource, s: &Schedule, x: &[f64], t: f64, h: f64, g: &[f64]) -> Result<Vec<f64>> {
    check_lengths(drift, x, g)?;
    let c = optimal_coefficients(s, t, h)?;
    let mut out = vec![0.0; x.len()];
    apply_step(c, drift, x, t, g, &mut Vec::new(), &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("optimal step"));
    }
    Ok(out)
}

/// One Euler-Maruyama step with constant diffusion `d`.
pub fn step_generic(
    drift: &dyn DriftSource,
    s: &Schedule,
    x: &[f64],
    t: f64,
    h: f64,
    d: f64,
    g: &[f64],
) -> Result<Vec<f64>> {
    check_lengths(drift, x, g)?;
    let c = generic_coefficients(s, t, h, d)?;
    let mut out = vec![0.0; x.len()];
    apply_step(c, drift, x, t, g, &mut Vec::new(), &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("generic step"));
    }
    Ok(out)
}

/// Runs `cfg.num_samples` independent chains from `X_0 ~ N(0, I)` over the
/// grid `t_k = k / K`. Chain `m` draws from RNG stream `m`; within a chain
/// noise is consumed step by step, coordinate by coordinate. Any failing
/// chain fails the whole batch.
pub fn generate(drift: &dyn DriftSource, s: &Schedule, cfg: &GenConfig) -> Result<SampleBatch> {
    cfg.validate()?;
    if s.id() != cfg.schedule {
        return Err(Error::invalid(format!(
            "config schedule {} does not match sampler schedule {}",
            cfg.schedule,
            s.id()
        )));
    }
    if cfg.diffusion == Diffusion::Optimal {
        if let Some(k) = drift.grid_steps() {
            if k != cfg.steps {
                return Err(Error::invalid(format!(
                    "optimal mode needs the table grid: table has {k} steps, config asks for {}",
                    cfg.steps
                )));
            }
        }
    }
    let steps = cfg.steps;
    let mut plan = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = k as f64 / steps as f64;
        let h = (k + 1) as f64 / steps as f64 - t;
        let c = match cfg.diffusion {
            Diffusion::Optimal => optimal_coefficients(s, t, h)?,
            Diffusion::Constant(d) => generic_coefficients(s, t, h, d)?,
            Diffusion::Zero => generic_coefficients(s, t, h, 0.0)?,
        };
        plan.push((t, c));
    }
    let noisy = cfg.diffusion != Diffusion::Zero;
    let d = drift.dim();

    let chains: Vec<Result<Vec<f64>>> = (0..cfg.num_samples)
        .into_par_iter()
        .map(|chain| {
            let mut rng = rng::stream(cfg.seed, Domain::Chains, chain as u64);
            let mut x = vec![0.0; d];
            rng::fill_normal(&mut rng, &mut x);
            let mut next = vec![0.0; d];
            let mut g = vec![0.0; d];
            let mut scratch = Vec::new();
            for (step, &(t, c)) in plan.iter().enumerate() {
                if noisy {
                    rng::fill_normal(&mut rng, &mut g);
                }
                apply_step(c, drift, &x, t, &g, &mut scratch, &mut next);
                if next.iter().any(|v| !v.is_finite()) {
                    return Err(Error::ChainDiverged { chain, step, t });
                }
                std::mem::swap(&mut x, &mut next);
            }
            Ok(x)
        })
        .collect();

    let mut states = Array2::zeros((cfg.num_samples, d));
    let mut failures = Vec::new();
    for (m, res) in chains.into_iter().enumerate() {
        match res {
            Ok(x) => states.row_mut(m).assign(&ndarray::ArrayView1::from(&x)),
            Err(e) => failures.push(e),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Chains(failures));
    }
    Ok(SampleBatch {
        states,
        config: *cfg,
        streams: (0..cfg.num_samples as u64).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub tau: f64,
    pub states: Array2<f64>,
}

/// Transition of the reversed dynamics from forward time `from` down to
/// `to < from`: `Y_to = factor * Y_from + sqrt(variance) * g` with
/// `factor = beta_to / beta_from` and
/// `variance = alpha_to^2 - alpha_from^2 factor^2`.
///
/// Both follow from integrating the linear reversed SDE exactly: the drift
/// `-(dbeta / beta)` integrates to a ratio of betas, and the noise integrand
/// `2 alpha gamma / beta^3` is the derivative of `-(alpha / beta)^2`.
pub fn reversed_transition(s: &Schedule, from: f64, to: f64) -> (f64, f64) {
    let (bf, bt) = (s.beta(from), s.beta(to));
    let factor = bt / bf;
    let (af, at) = (s.alpha(from), s.alpha(to));
    (factor, (at * at - af * af * factor * factor).max(0.0))
}

/// Integrates the reversed optimal dynamics `Y_tau = X_{1 - tau}` from the
/// data (`tau = 0`) to noise (`tau = 1`) on `steps` uniform substeps,
/// recording the ensemble at each requested `tau` (which must be grid
/// points). The final substep has `beta = 0` at its end, so it replaces the
/// state with a fresh standard normal draw.
pub fn reversed_ou_generate(
    data: ArrayView2<'_, f64>,
    s: &Schedule,
    steps: usize,
    snapshots: &[f64],
    seed: u64,
) -> Result<Vec<Snapshot>> {
    if steps < 10 {
        return Err(Error::invalid(format!(
            "reversed integration needs at least 10 steps, got {steps}"
        )));
    }
    if s.id() == ScheduleId::Custom {
        return Err(Error::Schedule(
            "reversed integration supports built-in schedules only".into(),
        ));
    }
    let mut wanted = Vec::with_capacity(snapshots.len());
    for &tau in snapshots {
        let k = (tau * steps as f64).round();
        if !(0.0..=steps as f64).contains(&k) || (k / steps as f64 - tau).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "snapshot tau = {tau} is not on the {steps}-step grid"
            )));
        }
        wanted.push((k as usize, tau));
    }
    let (n, d) = data.dim();
    let mut y = data.to_owned();
    let mut rngs: Vec<_> = (0..n as u64).map(|i| rng::stream(seed, Domain::Reversal, i)).collect();
    let mut out = Vec::with_capacity(wanted.len());
    let mut g = vec![0.0; d];
    let record = |k: usize, y: &Array2<f64>, out: &mut Vec<Snapshot>| {
        for &(kk, tau) in &wanted {
            if kk == k {
                out.push(Snapshot { tau, states: y.clone() });
            }
        }
    };
    record(0, &y, &mut out);
    for k in 0..steps {
        let from = 1.0 - k as f64 / steps as f64;
        let to = 1.0 - (k + 1) as f64 / steps as f64;
        let (factor, var) = reversed_transition(s, from, to);
        let sd = var.sqrt();
        for (mut row, rng) in y.rows_mut().into_iter().zip(rngs.iter_mut()) {
            rng::fill_normal(rng, &mut g);
            for (v, gi) in row.iter_mut().zip(&g) {
                *v = factor * *v + sd * gi;
            }
        }
        record(k + 1, &y, &mut out);
    }
    out.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;
    use crate::features::LinearCoordinates;
    use crate::fit::{uniform_grid, TableDescriptor};

    struct ZeroDrift(usize);

    impl DriftSource for ZeroDrift {
        fn dim(&self) -> usize {
            self.0
        }

        fn drift_into(&self, _x: &[f64], _t: f64, _s: &mut Vec<f64>, out: &mut [f64]) {
            out.fill(0.0);
        }
    }

    struct ConstDrift(Vec<f64>);

    impl DriftSource for ConstDrift {
        fn dim(&self) -> usize {
            self.0.len()
        }

        fn drift_into(&self, _x: &[f64], _t: f64, _s: &mut Vec<f64>, out: &mut [f64]) {
            out.copy_from_slice(&self.0);
        }
    }

    #[test]
    fn first_optimal_step_forgets_state() {
        let s = Schedule::Trigonometric;
        let c = optimal_coefficients(&s, 0.0, 1e-4).unwrap();
        assert_eq!(c.state, 0.0);
        assert!((c.noise - 1.0).abs() < 1e-6);
        assert!((c.drift - 1e-4).abs() < 1e-18);
        let x = step_optimal(&ZeroDrift(2), &s, &[100.0, -50.0], 0.0, 1e-4, &[0.3, 0.4]).unwrap();
        assert!((x[0] - 0.3 * c.noise).abs() < 1e-15);
        assert!((x[1] - 0.4 * c.noise).abs() < 1e-15);
    }

    #[test]
    fn last_optimal_step_drops_terminal_noise() {
        let s = Schedule::Trigonometric;
        let h = 0.01;
        let t = 1.0 - h;
        let c = optimal_coefficients(&s, t, h).unwrap();
        let expect = (h * s.alpha(t) * s.beta(t) * FRAC_PI_2).sqrt() / s.beta(1.0);
        assert!((c.noise - expect).abs() < 1e-12 * expect);
        assert!(c.noise < 0.02);
        assert!((c.state - s.beta(t)).abs() < 1e-15);
    }

    #[test]
    fn optimal_step_with_zero_drift_linear() {
        let s = Schedule::Linear;
        let (t, h) = (0.3, 0.1);
        let c = optimal_coefficients(&s, t, h).unwrap();
        assert!((c.state - 0.75).abs() < 1e-14);
        let x = step_optimal(&ZeroDrift(1), &s, &[2.0], t, h, &[0.0]).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn generic_step_examples() {
        let s = Schedule::Trigonometric;
        let b = vec![0.5, -1.0];
        let x = step_generic(&ConstDrift(b.clone()), &s, &[1.0, 2.0], 0.3, 0.01, 0.0, &[9.0, 9.0]).unwrap();
        assert!((x[0] - 1.005).abs() < 1e-15 && (x[1] - 1.99).abs() < 1e-15);

        let t = 0.4;
        let c = generic_coefficients(&s, t, 0.01, s.d_star(t)).unwrap();
        assert!((c.drift - 0.02).abs() < 1e-15);
        assert!((1.0 - c.state - 0.01 * s.dbeta(t) / s.beta(t)).abs() < 1e-15);

        let c1 = generic_coefficients(&s, t, 0.01, 1.0).unwrap();
        let ag = s.alpha(t) * s.gamma(t);
        assert!((c1.state - (1.0 - 0.01 * s.dbeta(t) / ag)).abs() < 1e-15);
        assert!((c1.noise - 0.02f64.sqrt()).abs() < 1e-15);

        assert!(generic_coefficients(&s, 1.0, 0.01, 1.0).is_err());
        assert!(generic_coefficients(&s, 0.5, 0.01, -1.0).is_err());
        assert!(generic_coefficients(&s, 0.0, 0.01, 1.0).is_ok());
    }

    #[test]
    fn generic_step_converges_first_order() {
        // With zero drift the dynamics are dX = -c(t) X dt + sqrt(2D) dW, and
        // the mean solves m' = -c(t) m. Compare one step against a fine
        // reference integration.
        let s = Schedule::Trigonometric;
        let (t0, d) = (0.3, 1.0);
        let rate = |t: f64| d * s.dbeta(t) / (s.alpha(t) * s.gamma(t));
        let exact = |h: f64| {
            let n = 20_000;
            let dt = h / n as f64;
            let integral: f64 = (0..n).map(|i| rate(t0 + (i as f64 + 0.5) * dt) * dt).sum();
            (-integral).exp()
        };
        let mut errs = Vec::new();
        for level in 0..4 {
            let h = 0.08 / 2f64.powi(level);
            let c = generic_coefficients(&s, t0, h, d).unwrap();
            errs.push((c.state - exact(h)).abs() / h);
        }
        // Error per unit time halves with h.
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
        }
    }

    #[test]
    fn generic_step_moments_zero_drift() {
        let s = Schedule::Linear;
        let (t, h, d) = (0.4, 0.05, 0.7);
        let c = generic_coefficients(&s, t, h, d).unwrap();
        let n = 40_000;
        let mut r = rng::stream(1, Domain::Evaluation, 0);
        let mut vals = Vec::with_capacity(n);
        let mut g = [0.0];
        for _ in 0..n {
            rng::fill_normal(&mut r, &mut g);
            vals.push(step_generic(&ZeroDrift(1), &s, &[1.5], t, h, d, &g).unwrap()[0]);
        }
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let want_mean = (1.0 - h * d / (1.0 - t)) * 1.5;
        let want_var = 2.0 * d * h;
        assert!((c.state * 1.5 - want_mean).abs() < 1e-15);
        assert!((c.noise * c.noise - want_var).abs() < 1e-15);
        assert!((mean - want_mean).abs() < 4.0 * (want_var / n as f64).sqrt());
        assert!((var - want_var).abs() < 4.0 * want_var * (2.0 / n as f64).sqrt());
    }

    fn zero_table(steps: usize, dim: usize) -> DriftTable {
        DriftTable {
            grid: uniform_grid(steps),
            etas: Array2::zeros((steps, dim)),
            dim,
            schedule: ScheduleId::Trigonometric,
            ridge: 0.0,
            descriptor: TableDescriptor {
                features: serde_json::json!({"type": "linear"}),
                samples: 1,
            },
        }
    }

    #[test]
    fn generate_is_deterministic_and_checks_grid() {
        let table = zero_table(20, 2);
        let map = LinearCoordinates::new(2);
        let drift = TableDrift::new(&table, &map).unwrap();
        let cfg = GenConfig {
            steps: 20,
            num_samples: 50,
            seed: 9,
            schedule: ScheduleId::Trigonometric,
            diffusion: Diffusion::Optimal,
        };
        let a = generate(&drift, &Schedule::Trigonometric, &cfg).unwrap();
        let b = generate(&drift, &Schedule::Trigonometric, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.states.iter().all(|v| v.is_finite()));
        let bad = GenConfig { steps: 10, ..cfg };
        assert!(generate(&drift, &Schedule::Trigonometric, &bad).is_err());
        let zero = GenConfig {
            steps: 10,
            diffusion: Diffusion::Zero,
            ..cfg
        };
        // Zero mode with zero drift keeps X_0.
        let z = generate(&drift, &Schedule::Trigonometric, &zero).unwrap();
        let mut r0 = rng::stream(9, Domain::Chains, 0);
        let mut x0 = [0.0; 2];
        rng::fill_normal(&mut r0, &mut x0);
        assert_eq!(z.states.row(0).to_vec(), x0.to_vec());
        let wrong = GenConfig {
            schedule: ScheduleId::Linear,
            ..cfg
        };
        assert!(generate(&drift, &Schedule::Trigonometric, &wrong).is_err());
    }

    struct Explode;

    impl DriftSource for Explode {
        fn dim(&self) -> usize {
            1
        }

        fn drift_into(&self, x: &[f64], t: f64, _s: &mut Vec<f64>, out: &mut [f64]) {
            out[0] = if t > 0.5 && x[0] > 0.0 { f64::INFINITY } else { 0.0 };
        }
    }

    #[test]
    fn generate_reports_failed_chains() {
        let cfg = GenConfig {
            steps: 10,
            num_samples: 40,
            seed: 0,
            schedule: ScheduleId::Linear,
            diffusion: Diffusion::Constant(1.0),
        };
        match generate(&Explode, &Schedule::Linear, &cfg) {
            Err(Error::Chains(v)) => {
                assert!(!v.is_empty() && v.len() < 40);
                assert!(v
                    .iter()
                    .all(|e| matches!(e, Error::ChainDiverged { step, .. } if *step >= 6)));
            }
            other => panic!("expected chain failures, got {other:?}"),
        }
    }

    #[test]
    fn reversed_transition_matches_trapezoid_quadrature() {
        // Independent route: integrate the diffusion variance numerically.
        for s in [Schedule::Linear, Schedule::Trigonometric] {
            for (from, to) in [(0.9, 0.8), (0.5, 0.45), (0.2, 0.1), (1.0, 0.97)] {
                let (factor, var) = reversed_transition(&s, from, to);
                let n = 200_000;
                let dt = (from - to) / n as f64;
                let integrand = |t: f64| {
                    let phi = s.beta(to) / s.beta(t);
                    phi * phi * 2.0 * s.alpha(t) * s.gamma(t) / s.beta(t)
                };
                let mut q = 0.0;
                for i in 0..n {
                    let (a, b) = (to + i as f64 * dt, to + (i + 1) as f64 * dt);
                    q += 0.5 * dt * (integrand(a) + integrand(b));
                }
                assert!((var - q).abs() < 1e-7 * q.max(1e-3), "{s:?} {from}->{to}: {var} vs {q}");
                assert!((factor - s.beta(to) / s.beta(from)).abs() < 1e-15);
            }
            let (f0, v0) = reversed_transition(&s, 0.01, 0.0);
            assert_eq!(f0, 0.0);
            assert!((v0 - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn reversed_rejects_coarse_grids_and_off_grid_snapshots() {
        let data = Array2::zeros((4, 1));
        assert!(reversed_ou_generate(data.view(), &Schedule::Linear, 9, &[0.5], 0).is_err());
        assert!(reversed_ou_generate(data.view(), &Schedule::Linear, 10, &[0.55], 0).is_err());
        let snaps = reversed_ou_generate(data.view(), &Schedule::Linear, 10, &[1.0, 0.0, 0.5], 0).unwrap();
        assert_eq!(snaps.iter().map(|s| s.tau).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
    }
}
