use ndarray::ArrayView2;
use serde::Serialize;

use super::reversal_invariant_sum;
use crate::error::{Error, Result};
use crate::sum::pairwise_sum;

/// Lag-indexed correlations `corr(r_t, r_{t+l}^2)` for `l` in `-L..=L`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeverageCurve {
    pub lags: Vec<i64>,
    pub corr: Vec<f64>,
    /// Standard error across realizations; zero for a single path.
    pub std_error: Vec<f64>,
}

impl LeverageCurve {
    pub fn at(&self, lag: i64) -> Option<(f64, f64)> {
        let i = self.lags.iter().position(|&l| l == lag)?;
        Some((self.corr[i], self.std_error[i]))
    }
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = reversal_invariant_sum(x) / n;
    let my = reversal_invariant_sum(y) / n;
    let dx: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let dy: Vec<f64> = y.iter().map(|v| v - my).collect();
    let sxy: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| a * b).collect();
    let sxx: Vec<f64> = dx.iter().map(|a| a * a).collect();
    let syy: Vec<f64> = dy.iter().map(|b| b * b).collect();
    let (vx, vy) = (reversal_invariant_sum(&sxx), reversal_invariant_sum(&syy));
    if !(vx > 0.0 && vy > 0.0) {
        return None;
    }
    Some(reversal_invariant_sum(&sxy) / (vx.sqrt() * vy.sqrt()))
}

/// Pearson correlation between the return and the squared return at offset
/// `l`, over every `t` with both ends inside the series. Sums are arranged so
/// that reversing the series maps lag `l` to lag `-l` bitwise.
pub fn leverage_effect(series: &[f64], max_lag: usize) -> Result<LeverageCurve> {
    let n = series.len();
    if n <= 2 * max_lag {
        return Err(Error::invalid(format!(
            "leverage needs more than {} points for max lag {max_lag}, got {n}",
            2 * max_lag
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("leverage series"));
    }
    let sq: Vec<f64> = series.iter().map(|v| v * v).collect();
    let l = max_lag as i64;
    let mut lags = Vec::new();
    let mut corr = Vec::new();
    for lag in -l..=l {
        let (x, y) = if lag >= 0 {
            let k = lag as usize;
            (&series[..n - k], &sq[k..])
        } else {
            let k = (-lag) as usize;
            (&series[k..], &sq[..n - k])
        };
        let c = pearson(x, y).ok_or_else(|| Error::invalid("leverage of a constant series is undefined"))?;
        lags.push(lag);
        corr.push(c);
    }
    Ok(LeverageCurve {
        std_error: vec![0.0; corr.len()],
        lags,
        corr,
    })
}

/// Averages per-row leverage curves over independent realizations (rows).
pub fn leverage_effect_batch(paths: ArrayView2<f64>, max_lag: usize) -> Result<LeverageCurve> {
    let m = paths.nrows();
    if m == 0 {
        return Err(Error::invalid("leverage needs at least one path"));
    }
    let curves: Vec<LeverageCurve> = paths
        .rows()
        .into_iter()
        .map(|r| leverage_effect(&r.to_vec(), max_lag))
        .collect::<Result<_>>()?;
    let lags = curves[0].lags.clone();
    let mf = m as f64;
    let mut corr = Vec::with_capacity(lags.len());
    let mut std_error = Vec::with_capacity(lags.len());
    for i in 0..lags.len() {
        let vals: Vec<f64> = curves.iter().map(|c| c.corr[i]).collect();
        let mean = pairwise_sum(&vals) / mf;
        corr.push(mean);
        if m > 1 {
            let dev: Vec<f64> = vals.iter().map(|v| (v - mean) * (v - mean)).collect();
            std_error.push((pairwise_sum(&dev) / (mf - 1.0) / mf).sqrt());
        } else {
            std_error.push(0.0);
        }
    }
    Ok(LeverageCurve { lags, corr, std_error })
}
