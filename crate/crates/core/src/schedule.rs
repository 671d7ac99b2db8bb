//! Interpolant coefficient schedules `(alpha_t, beta_t)` and the scalar
//! functions of time built from them.
//!
//! A schedule moves mass from noise (`alpha_0 = 1, beta_0 = 0`) to data
//! (`alpha_1 = 0, beta_1 = 1`). Everything downstream only touches the four
//! functions `alpha`, `beta`, `dalpha`, `dbeta`, plus
//!
//! * `gamma(t) = alpha * dbeta - dalpha * beta`, positive on `(0, 1)`;
//! * `d_star(t) = alpha * gamma / beta`, the diffusion coefficient that
//!   minimizes the path-KL weight. It is infinite at `t = 0` and zero at `t = 1`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of interior points used to validate custom schedules.
pub const VALIDATION_GRID: usize = 1024;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Stable schedule identifier, as stored in drift tables and configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleId {
    Linear,
    #[serde(rename = "trig")]
    Trigonometric,
    Custom,
}

impl ScheduleId {
    /// Byte code used by the drift table format. Custom schedules have none.
    pub fn code(self) -> Option<u8> {
        match self {
            ScheduleId::Linear => Some(0),
            ScheduleId::Trigonometric => Some(1),
            ScheduleId::Custom => None,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ScheduleId::Linear),
            1 => Some(ScheduleId::Trigonometric),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScheduleId::Linear => "linear",
            ScheduleId::Trigonometric => "trig",
            ScheduleId::Custom => "custom",
        }
    }
}

impl fmt::Display for ScheduleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone)]
pub struct CustomSchedule {
    alpha: ScalarFn,
    beta: ScalarFn,
    dalpha: ScalarFn,
    dbeta: ScalarFn,
}

#[derive(Clone)]
pub enum Schedule {
    /// `alpha = 1 - t`, `beta = t`.
    Linear,
    /// `alpha = cos(pi t / 2)`, `beta = sin(pi t / 2)`. The cosines are
    /// evaluated as `sin(pi (1 - t) / 2)` so both endpoints are exact.
    Trigonometric,
    Custom(CustomSchedule),
}

impl fmt::Debug for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Schedule::{}", self.id())
    }
}

impl Schedule {
    /// Builds a custom schedule from explicit coefficient functions and their
    /// derivatives. Endpoint values, monotonicity and `gamma > 0` are checked
    /// on a dense grid; any violation is an error.
    pub fn custom<A, B, DA, DB>(alpha: A, beta: B, dalpha: DA, dbeta: DB) -> Result<Self>
    where
        A: Fn(f64) -> f64 + Send + Sync + 'static,
        B: Fn(f64) -> f64 + Send + Sync + 'static,
        DA: Fn(f64) -> f64 + Send + Sync + 'static,
        DB: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let s = Schedule::Custom(CustomSchedule {
            alpha: Arc::new(alpha),
            beta: Arc::new(beta),
            dalpha: Arc::new(dalpha),
            dbeta: Arc::new(dbeta),
        });
        s.validate()?;
        Ok(s)
    }

    pub fn from_id(id: ScheduleId) -> Result<Self> {
        match id {
            ScheduleId::Linear => Ok(Schedule::Linear),
            ScheduleId::Trigonometric => Ok(Schedule::Trigonometric),
            ScheduleId::Custom => Err(Error::Schedule(
                "custom schedules cannot be rebuilt from an identifier".into(),
            )),
        }
    }

    pub fn id(&self) -> ScheduleId {
        match self {
            Schedule::Linear => ScheduleId::Linear,
            Schedule::Trigonometric => ScheduleId::Trigonometric,
            Schedule::Custom(_) => ScheduleId::Custom,
        }
    }

    fn validate(&self) -> Result<()> {
        const TOL: f64 = 1e-12;
        let checks = [
            ("alpha(0)", self.alpha(0.0), 1.0),
            ("alpha(1)", self.alpha(1.0), 0.0),
            ("beta(0)", self.beta(0.0), 0.0),
            ("beta(1)", self.beta(1.0), 1.0),
        ];
        for (name, got, want) in checks {
            if !((got - want).abs() <= TOL) {
                return Err(Error::Schedule(format!("{name} = {got}, expected {want}")));
            }
        }
        for i in 1..=VALIDATION_GRID {
            let t = i as f64 / (VALIDATION_GRID + 1) as f64;
            let (da, db, g) = (self.dalpha(t), self.dbeta(t), self.gamma(t));
            if !(da < 0.0) {
                return Err(Error::Schedule(format!("dalpha({t}) = {da} is not negative")));
            }
            if !(db > 0.0) {
                return Err(Error::Schedule(format!("dbeta({t}) = {db} is not positive")));
            }
            if !(g > 0.0) {
                return Err(Error::Schedule(format!("gamma({t}) = {g} is not positive")));
            }
        }
        Ok(())
    }

    pub fn alpha(&self, t: f64) -> f64 {
        match self {
            Schedule::Linear => 1.0 - t,
            Schedule::Trigonometric => (FRAC_PI_2 * (1.0 - t)).sin(),
            Schedule::Custom(c) => (c.alpha)(t),
        }
    }

    pub fn beta(&self, t: f64) -> f64 {
        match self {
            Schedule::Linear => t,
            Schedule::Trigonometric => (FRAC_PI_2 * t).sin(),
            Schedule::Custom(c) => (c.beta)(t),
        }
    }

    pub fn dalpha(&self, t: f64) -> f64 {
        match self {
            Schedule::Linear => -1.0,
            Schedule::Trigonometric => -FRAC_PI_2 * (FRAC_PI_2 * t).sin(),
            Schedule::Custom(c) => (c.dalpha)(t),
        }
    }

    pub fn dbeta(&self, t: f64) -> f64 {
        match self {
            Schedule::Linear => 1.0,
            Schedule::Trigonometric => FRAC_PI_2 * (FRAC_PI_2 * (1.0 - t)).sin(),
            Schedule::Custom(c) => (c.dbeta)(t),
        }
    }

    /// `alpha * dbeta - dalpha * beta`.
    pub fn gamma(&self, t: f64) -> f64 {
        match self {
            // Exact closed forms; the generic expression rounds.
            Schedule::Linear => 1.0,
            Schedule::Trigonometric => FRAC_PI_2,
            Schedule::Custom(_) => self.alpha(t) * self.dbeta(t) - self.dalpha(t) * self.beta(t),
        }
    }

    /// Optimal diffusion coefficient `alpha * gamma / beta`.
    ///
    /// Returns `f64::INFINITY` at `t = 0`. The sampler never evaluates this;
    /// it exists for diagnostics and for the path-KL weight.
    pub fn d_star(&self, t: f64) -> f64 {
        let b = self.beta(t);
        if b == 0.0 {
            return f64::INFINITY;
        }
        self.alpha(t) * self.gamma(t) / b
    }

    /// Multiplier of the drift-error expectation in the path-KL integrand,
    /// `(1 / 4D) (1 + D beta / (alpha gamma))^2`, for `0 < t < 1`.
    pub fn kl_weight(&self, t: f64, d: f64) -> Result<f64> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::invalid(format!(
                "diffusion coefficient must be positive, got {d}"
            )));
        }
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::invalid(format!("kl_weight requires 0 < t < 1, got {t}")));
        }
        let lambda = 1.0 + d * self.beta(t) / (self.alpha(t) * self.gamma(t));
        Ok(lambda * lambda / (4.0 * d))
    }

    /// The same weight evaluated at `D = d_star(t)`, `beta / (alpha gamma)`.
    pub fn optimal_kl_weight(&self, t: f64) -> f64 {
        self.beta(t) / (self.alpha(t) * self.gamma(t))
    }
}
