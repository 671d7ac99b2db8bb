use ndarray::ArrayView2;
use serde_json::json;

use super::MetricReport;
use crate::error::{Error, Result};
use crate::oracle::GaussianTarget;
use crate::sum::pairwise_sum;

/// What sample moments are compared against.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    /// Exact mean and covariance; no reference-side error.
    Gaussian(&'a GaussianTarget),
    /// Another sample, whose own jackknife error is added in quadrature.
    Empirical(ArrayView2<'a, f64>),
}

struct Moments {
    mean: Vec<f64>,
    mean_se: Vec<f64>,
    /// Upper triangle, row-major.
    cov: Vec<f64>,
    cov_se: Vec<f64>,
}

fn moments(x: ArrayView2<f64>) -> Result<Moments> {
    let (n, d) = x.dim();
    if n < 3 {
        return Err(Error::invalid(format!(
            "moment report needs at least 3 samples, got {n}"
        )));
    }
    let nf = n as f64;
    let col = |i: usize| -> Vec<f64> { x.column(i).to_vec() };
    let cols: Vec<Vec<f64>> = (0..d).map(col).collect();
    let mean: Vec<f64> = cols.iter().map(|c| pairwise_sum(c) / nf).collect();
    let dev: Vec<Vec<f64>> = cols
        .iter()
        .zip(&mean)
        .map(|(c, m)| c.iter().map(|v| v - m).collect())
        .collect();
    let mut mean_se = Vec::with_capacity(d);
    for di in &dev {
        let sq: Vec<f64> = di.iter().map(|v| v * v).collect();
        mean_se.push((pairwise_sum(&sq) / (nf - 1.0) / nf).sqrt());
    }
    // Delete-one covariances satisfy theta_{-k} - mean = -n c'_k / ((n-1)(n-2))
    // with c'_k the centered cross product, which gives the jackknife spread
    // in closed form.
    let scale = nf / ((nf - 1.0) * (nf - 2.0));
    let mut cov = Vec::new();
    let mut cov_se = Vec::new();
    for i in 0..d {
        for j in i..d {
            let c: Vec<f64> = dev[i].iter().zip(&dev[j]).map(|(a, b)| a * b).collect();
            let s = pairwise_sum(&c);
            let cbar = s / nf;
            let spread: Vec<f64> = c.iter().map(|v| (v - cbar) * (v - cbar)).collect();
            cov.push(s / (nf - 1.0));
            cov_se.push(((nf - 1.0) / nf * scale * scale * pairwise_sum(&spread)).sqrt());
        }
    }
    Ok(Moments {
        mean,
        mean_se,
        cov,
        cov_se,
    })
}

/// Per-coordinate mean errors `mean[i]` and covariance errors `cov[i,j]`
/// (`i <= j`), each as sample minus reference with a jackknife error.
pub fn moment_report(x: ArrayView2<f64>, reference: Reference<'_>) -> Result<MetricReport> {
    let d = x.ncols();
    if d == 0 {
        return Err(Error::invalid("moment report needs at least one coordinate"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("moment samples"));
    }
    let own = moments(x)?;
    let (ref_mean, ref_mean_se, ref_cov, ref_cov_se) = match reference {
        Reference::Gaussian(g) => {
            if g.dim() != d {
                return Err(Error::DimensionMismatch {
                    what: "reference dimension",
                    expected: d,
                    got: g.dim(),
                });
            }
            let mut cov = Vec::new();
            for i in 0..d {
                for j in i..d {
                    cov.push(g.cov()[(i, j)]);
                }
            }
            let zeros = vec![0.0; cov.len()];
            (g.mean().iter().copied().collect(), vec![0.0; d], cov, zeros)
        }
        Reference::Empirical(y) => {
            if y.ncols() != d {
                return Err(Error::DimensionMismatch {
                    what: "reference dimension",
                    expected: d,
                    got: y.ncols(),
                });
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("reference samples"));
            }
            let m = moments(y)?;
            (m.mean, m.mean_se, m.cov, m.cov_se)
        }
    };
    let mut report = MetricReport::default();
    for i in 0..d {
        report.insert(
            format!("mean[{i}]"),
            own.mean[i] - ref_mean[i],
            own.mean_se[i].hypot(ref_mean_se[i]),
        );
    }
    let mut slot = 0;
    for i in 0..d {
        for j in i..d {
            report.insert(
                format!("cov[{i},{j}]"),
                own.cov[slot] - ref_cov[slot],
                own.cov_se[slot].hypot(ref_cov_se[slot]),
            );
            slot += 1;
        }
    }
    report.meta.insert("samples".into(), json!(x.nrows()));
    if let Reference::Empirical(y) = reference {
        report.meta.insert("reference_samples".into(), json!(y.nrows()));
    }
    Ok(report)
}
