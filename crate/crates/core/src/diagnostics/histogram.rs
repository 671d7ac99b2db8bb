use serde::Serialize;

use crate::error::{Error, Result};

/// Density histogram on fixed, equal-width bins over `[lo, hi)`; values
/// outside the range are counted in `outside` and excluded from the density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub outside: usize,
}

impl Histogram {
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid("histogram needs bins > 0 and a finite range lo < hi"));
        }
        if values.is_empty() {
            return Err(Error::invalid("histogram of an empty sample"));
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        let mut outside = 0;
        for &v in values {
            if !(v >= lo && v < hi) {
                outside += 1;
                continue;
            }
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        let total = values.len() as f64 * width;
        Ok(Self {
            edges: (0..=bins).map(|k| lo + k as f64 * width).collect(),
            density: counts.iter().map(|&c| c as f64 / total).collect(),
            outside,
        })
    }

    fn width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }
}

/// Total-variation distance between two histograms on the same bins,
/// counting mass outside the range as disagreeing.
pub fn total_variation(p: &Histogram, q: &Histogram) -> Result<f64> {
    if p.edges != q.edges {
        return Err(Error::invalid("histograms must share bin edges"));
    }
    let w = p.width();
    let inside: f64 = p.density.iter().zip(&q.density).map(|(a, b)| (a - b).abs() * w).sum();
    let mass = |h: &Histogram| 1.0 - h.density.iter().sum::<f64>() * w;
    Ok(0.5 * (inside + (mass(p) - mass(q)).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_integrates_to_inside_fraction() {
        let v = [0.1, 0.2, 0.6, 0.9, 1.5];
        let h = Histogram::new(&v, 0.0, 1.0, 4).unwrap();
        assert_eq!(h.outside, 1);
        let mass: f64 = h.density.iter().sum::<f64>() * 0.25;
        assert!((mass - 0.8).abs() < 1e-15);
        assert_eq!(h.density, vec![1.6, 0.0, 0.8, 0.8]);
    }

    #[test]
    fn total_variation_bounds() {
        let a = Histogram::new(&[0.1, 0.2], 0.0, 1.0, 2).unwrap();
        let b = Histogram::new(&[0.7, 0.8], 0.0, 1.0, 2).unwrap();
        assert!((total_variation(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(total_variation(&a, &a).unwrap(), 0.0);
        let c = Histogram::new(&[0.1], 0.0, 2.0, 2).unwrap();
        assert!(total_variation(&a, &c).is_err());
    }
}
