//! Drift regression: Gram assembly on a time grid and the `P x P` solves.
//!
//! At each node `t` the least-squares drift `jacobian(x, t)^T eta` solves
//! `K eta = r` with
//!
//! ```text
//! K = (1/N) sum_n J_n J_n^T,   r = (1/N) sum_n J_n Idot_n,   J_n = jacobian(I_n, t)
//! ```
//!
//! where `I_n = alpha z_n + beta a_n` and `Idot_n = dalpha z_n + dbeta a_n`.

use std::cell::RefCell;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::rng::{self, Domain};
use crate::schedule::{Schedule, ScheduleId};
use crate::sum::pairwise_accumulate;

pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Relative pivot size below which a Cholesky factor is treated as failed.
const PIVOT_TOLERANCE: f64 = 1e-14;

/// Relative eigenvalue cutoff of the pseudo-inverse fallback.
const PINV_CUTOFF: f64 = 1e-10;

/// Paired noise and data samples, `N x d` each, row `n` of `z` paired with
/// row `n` of `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPairs {
    z: Array2<f64>,
    a: Array2<f64>,
}

impl DataPairs {
    pub fn new(z: Array2<f64>, a: Array2<f64>) -> Result<Self> {
        if z.dim() != a.dim() {
            return Err(Error::invalid(format!(
                "noise shape {:?} differs from data shape {:?}",
                z.dim(),
                a.dim()
            )));
        }
        if z.nrows() == 0 || z.ncols() == 0 {
            return Err(Error::invalid("data pairs must be non-empty"));
        }
        if z.iter().chain(a.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("data pairs"));
        }
        Ok(Self::canonical(z, a))
    }

    /// Reorders pairs lexicographically by `(z_n, a_n)`, so every sum over
    /// samples runs in an order independent of how the rows were supplied.
    fn canonical(z: Array2<f64>, a: Array2<f64>) -> Self {
        let n = z.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        let key = |i: usize| z.row(i).iter().chain(a.row(i).iter()).copied().collect::<Vec<f64>>();
        let keys: Vec<Vec<f64>> = (0..n).map(key).collect();
        order.sort_by(|&i, &j| {
            keys[i]
                .iter()
                .zip(&keys[j])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if order.iter().enumerate().all(|(i, &o)| i == o) {
            return Self { z, a };
        }
        Self {
            z: z.select(ndarray::Axis(0), &order),
            a: a.select(ndarray::Axis(0), &order),
        }
    }

    /// Pairs `a` with standard-normal noise drawn from `seed`.
    pub fn with_generated_noise(a: Array2<f64>, seed: u64) -> Result<Self> {
        let mut r = rng::stream(seed, Domain::Noise, 0);
        let mut z = Array2::zeros(a.dim());
        rng::fill_normal(&mut r, z.as_slice_mut().expect("standard layout"));
        Self::new(z, a)
    }

    pub fn len(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    pub fn z(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolantBatch {
    pub states: Array2<f64>,
    pub velocities: Array2<f64>,
    pub t: f64,
}

pub fn interpolate(pairs: &DataPairs, s: &Schedule, t: f64) -> InterpolantBatch {
    let (a, b, da, db) = (s.alpha(t), s.beta(t), s.dalpha(t), s.dbeta(t));
    let mut states = Array2::zeros(pairs.z.dim());
    let mut velocities = Array2::zeros(pairs.z.dim());
    ndarray::Zip::from(&mut states)
        .and(&mut velocities)
        .and(&pairs.z)
        .and(&pairs.a)
        .for_each(|i, v, &z, &x| {
            *i = a * z + b * x;
            *v = da * z + db * x;
        });
    InterpolantBatch { states, velocities, t }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramSystem {
    pub k: DMatrix<f64>,
    pub r: DVector<f64>,
    pub t: f64,
}

thread_local! {
    static JACOBIAN_SCRATCH: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
}

/// Builds the empirical system at the batch's time. Samples are reduced in
/// index order with a fixed pairwise tree.
pub fn assemble(f: &dyn FeatureMap, batch: &InterpolantBatch) -> Result<GramSystem> {
    let (n, d) = batch.states.dim();
    if d != f.dim_in() {
        return Err(Error::DimensionMismatch {
            what: "batch dimension",
            expected: f.dim_in(),
            got: d,
        });
    }
    let p = f.dim_out();
    let tri = p * (p + 1) / 2;
    let states = batch.states.as_slice().expect("standard layout");
    let vels = batch.velocities.as_slice().expect("standard layout");
    let t = batch.t;

    let sums = pairwise_accumulate(n, tri + p, &|idx, acc: &mut [f64]| {
        JACOBIAN_SCRATCH.with(|cell| {
            let mut jac = cell.borrow_mut();
            jac.resize(p * d, 0.0);
            let x = &states[idx * d..(idx + 1) * d];
            let v = &vels[idx * d..(idx + 1) * d];
            f.jacobian_into(x, t, &mut jac);
            let mut slot = 0;
            for i in 0..p {
                let ri = &jac[i * d..(i + 1) * d];
                for j in i..p {
                    let rj = &jac[j * d..(j + 1) * d];
                    acc[slot] += dot(ri, rj);
                    slot += 1;
                }
            }
            for i in 0..p {
                acc[tri + i] += dot(&jac[i * d..(i + 1) * d], v);
            }
        })
    });

    let inv = 1.0 / n as f64;
    let mut k = DMatrix::zeros(p, p);
    let mut slot = 0;
    for i in 0..p {
        for j in i..p {
            k[(i, j)] = sums[slot] * inv;
            k[(j, i)] = sums[slot] * inv;
            slot += 1;
        }
    }
    let r = DVector::from_iterator(p, sums[tri..].iter().map(|v| v * inv));
    if k.iter().chain(r.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature Jacobian"));
    }
    Ok(GramSystem { k, r, t })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent lanes; the order is fixed so results are reproducible.
    let mut s = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            s[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaSolution {
    pub eta: Vec<f64>,
    /// Set when the Cholesky route failed and the eigen pseudo-inverse was used.
    pub pseudo_inverse: bool,
}

/// Solves `(K + lambda I) eta = r` with `lambda = ridge * trace(K) / P`.
pub fn solve_eta(sys: &GramSystem, ridge: f64) -> Result<EtaSolution> {
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::invalid(format!("ridge must be non-negative, got {ridge}")));
    }
    let p = sys.k.nrows();
    if sys.k.ncols() != p || sys.r.len() != p {
        return Err(Error::DimensionMismatch {
            what: "Gram system size",
            expected: p,
            got: sys.r.len(),
        });
    }
    if sys.k.iter().chain(sys.r.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Gram system"));
    }
    if sys.k.iter().all(|&v| v == 0.0) {
        if sys.r.iter().all(|&v| v == 0.0) {
            return Ok(EtaSolution {
                eta: vec![0.0; p],
                pseudo_inverse: false,
            });
        }
        return Err(Error::UnrepresentableDrift);
    }

    let shift = ridge * sys.k.trace() / p as f64;
    let mut a = sys.k.clone();
    for i in 0..p {
        a[(i, i)] += shift;
    }
    let max_diag = (0..p).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
    if let Some(chol) = a.clone().cholesky() {
        let l = chol.l_dirty();
        let min_pivot = (0..p).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot > PIVOT_TOLERANCE * max_diag {
            let eta = chol.solve(&sys.r);
            return Ok(EtaSolution {
                eta: eta.iter().copied().collect(),
                pseudo_inverse: false,
            });
        }
    }

    let eig = SymmetricEigen::new(a);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let proj = eig.eigenvectors.transpose() * &sys.r;
    let mut coef = DVector::zeros(p);
    for i in 0..p {
        let lam = eig.eigenvalues[i];
        if lam > PINV_CUTOFF * top {
            coef[i] = proj[i] / lam;
        }
    }
    let eta = &eig.eigenvectors * coef;
    Ok(EtaSolution {
        eta: eta.iter().copied().collect(),
        pseudo_inverse: true,
    })
}

/// Free-form fit metadata carried alongside the coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDescriptor {
    /// Feature map description, `null` for opaque maps.
    pub features: Value,
    /// Number of data pairs used at every node.
    pub samples: u64,
}

/// Solved coefficients on the uniform grid `t_k = k / K`. Row `k` of `etas`
/// is used on `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftTable {
    pub grid: Vec<f64>,
    pub etas: Array2<f64>,
    pub dim: usize,
    pub schedule: ScheduleId,
    pub ridge: f64,
    pub descriptor: TableDescriptor,
}

impl DriftTable {
    pub fn steps(&self) -> usize {
        self.etas.nrows()
    }

    pub fn features(&self) -> usize {
        self.etas.ncols()
    }

    /// Index of the grid node at or left of `t`, clamped to `0..K`.
    pub fn node_at(&self, t: f64) -> usize {
        let k = self.grid.partition_point(|&g| g <= t);
        k.saturating_sub(1).min(self.steps() - 1)
    }

    pub fn eta_at(&self, t: f64) -> &[f64] {
        let k = self.node_at(t);
        self.etas.row(k).to_slice().expect("standard layout")
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.steps();
        if k == 0 || self.grid.len() != k + 1 {
            return Err(Error::invalid("drift table grid must have K + 1 nodes with K >= 1"));
        }
        if self.grid[0] != 0.0 || self.grid[k] != 1.0 || self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("drift table grid must increase from 0 to 1"));
        }
        if self.etas.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("drift table coefficients"));
        }
        Ok(())
    }
}

pub fn uniform_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 / steps as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeReport {
    pub k: usize,
    pub t: f64,
    /// Smallest over largest eigenvalue of the unregularized Gram matrix.
    pub eigen_ratio: f64,
    pub pseudo_inverse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub nodes: Vec<NodeReport>,
}

impl FitReport {
    /// `(min, median, max)` of the per-node eigenvalue ratios.
    pub fn eigen_ratio_summary(&self) -> (f64, f64, f64) {
        let mut r: Vec<f64> = self.nodes.iter().map(|n| n.eigen_ratio).collect();
        r.sort_by(f64::total_cmp);
        (r[0], r[r.len() / 2], r[r.len() - 1])
    }

    pub fn first_pseudo_inverse(&self) -> Option<&NodeReport> {
        self.nodes.iter().find(|n| n.pseudo_inverse)
    }
}

fn eigen_ratio(k: &DMatrix<f64>) -> f64 {
    let ev = SymmetricEigen::new(k.clone()).eigenvalues;
    let max = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        min / max
    } else {
        0.0
    }
}

/// Runs interpolate, assemble and solve at every left node `t_k = k / K`,
/// `k = 0..K`. The right endpoint `t = 1` is never fitted.
pub fn fit_table(
    f: &dyn FeatureMap,
    pairs: &DataPairs,
    s: &Schedule,
    steps: usize,
    ridge: f64,
) -> Result<(DriftTable, FitReport)> {
    if steps == 0 {
        return Err(Error::invalid("step count must be at least 1"));
    }
    if pairs.dim() != f.dim_in() {
        return Err(Error::DimensionMismatch {
            what: "data dimension",
            expected: f.dim_in(),
            got: pairs.dim(),
        });
    }
    if s.id() == ScheduleId::Custom {
        // Tables record a schedule id; custom schedules have none.
        return Err(Error::Schedule("drift tables require a built-in schedule".into()));
    }
    let grid = uniform_grid(steps);
    let solved: Vec<(Vec<f64>, NodeReport)> = grid[..steps]
        .par_iter()
        .enumerate()
        .map(|(k, &t)| {
            let wrap = |e: Error| Error::NodeSolve {
                k,
                t,
                source: Box::new(e),
            };
            let sys = assemble(f, &interpolate(pairs, s, t)).map_err(wrap)?;
            let sol = solve_eta(&sys, ridge).map_err(wrap)?;
            if sol.eta.iter().any(|v| !v.is_finite()) {
                return Err(wrap(Error::NonFinite("solved coefficients")));
            }
            let report = NodeReport {
                k,
                t,
                eigen_ratio: eigen_ratio(&sys.k),
                pseudo_inverse: sol.pseudo_inverse,
            };
            Ok((sol.eta, report))
        })
        .collect::<Result<_>>()?;

    let p = f.dim_out();
    let mut etas = Array2::zeros((steps, p));
    let mut nodes = Vec::with_capacity(steps);
    for (k, (eta, report)) in solved.into_iter().enumerate() {
        etas.row_mut(k).assign(&ndarray::ArrayView1::from(&eta));
        nodes.push(report);
    }
    let table = DriftTable {
        grid,
        etas,
        dim: f.dim_in(),
        schedule: s.id(),
        ridge,
        descriptor: TableDescriptor {
            features: f.descriptor(),
            samples: pairs.len() as u64,
        },
    };
    Ok((table, FitReport { nodes }))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use ndarray::array;

    use super::*;
    use crate::features::{Concat, LinearCoordinates, RadialQuadratic};

    fn hand_pairs() -> DataPairs {
        DataPairs::new(array![[1.0], [-1.0]], array![[2.0], [0.0]]).unwrap()
    }

    fn x_and_half_square() -> Concat {
        Concat::new(vec![
            Arc::new(LinearCoordinates::new(1)),
            Arc::new(RadialQuadratic::new(1)),
        ])
        .unwrap()
    }

    #[test]
    fn interpolate_examples() {
        let pairs = DataPairs::new(array![[0.3, -1.0], [2.0, 0.5]], array![[4.0, 1.0], [-2.0, 7.0]]).unwrap();
        for s in [Schedule::Linear, Schedule::Trigonometric] {
            assert_eq!(interpolate(&pairs, &s, 0.0).states, pairs.z);
            assert_eq!(interpolate(&pairs, &s, 1.0).states, pairs.a);
        }
        let one = DataPairs::new(array![[1.0]], array![[2.0]]).unwrap();
        let b = interpolate(&one, &Schedule::Linear, 0.5);
        assert_eq!(b.states[[0, 0]], 1.5);
        assert_eq!(b.velocities[[0, 0]], 1.0);
    }

    #[test]
    fn assemble_hand_example() {
        let batch = interpolate(&hand_pairs(), &Schedule::Linear, 0.5);
        let sys = assemble(&x_and_half_square(), &batch).unwrap();
        let want_k = [[1.0, 0.5], [0.5, 1.25]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((sys.k[(i, j)] - want_k[i][j]).abs() < 1e-15);
            }
        }
        assert!((sys.r[0] - 1.0).abs() < 1e-15);
        assert!((sys.r[1] - 0.5).abs() < 1e-15);
        let sol = solve_eta(&sys, 0.0).unwrap();
        assert!(!sol.pseudo_inverse);
        assert!((sol.eta[0] - 1.0).abs() < 1e-14);
        assert!(sol.eta[1].abs() < 1e-14);
    }

    #[test]
    fn assemble_linear_coordinates_gives_identity() {
        let pairs = DataPairs::with_generated_noise(array![[1.0, 2.0], [3.0, -1.0], [0.0, 0.5]], 3).unwrap();
        let batch = interpolate(&pairs, &Schedule::Trigonometric, 0.4);
        let sys = assemble(&LinearCoordinates::new(2), &batch).unwrap();
        assert_eq!(sys.k, DMatrix::identity(2, 2));
        for j in 0..2 {
            let mean = batch.velocities.column(j).sum() / 3.0;
            assert!((sys.r[j] - mean).abs() < 1e-15);
        }
    }

    #[test]
    fn duplicating_samples_leaves_system_unchanged() {
        let pairs = hand_pairs();
        let doubled = DataPairs::new(
            ndarray::concatenate![ndarray::Axis(0), pairs.z, pairs.z],
            ndarray::concatenate![ndarray::Axis(0), pairs.a, pairs.a],
        )
        .unwrap();
        let f = x_and_half_square();
        let a = assemble(&f, &interpolate(&pairs, &Schedule::Linear, 0.5)).unwrap();
        let b = assemble(&f, &interpolate(&doubled, &Schedule::Linear, 0.5)).unwrap();
        assert!((a.k - b.k).norm() < 1e-15);
        assert!((a.r - b.r).norm() < 1e-15);
    }

    #[test]
    fn solve_examples() {
        let r = DVector::from_vec(vec![0.3, -2.0, 5.0]);
        let sys = GramSystem {
            k: DMatrix::identity(3, 3),
            r: r.clone(),
            t: 0.0,
        };
        let plain = solve_eta(&sys, 0.0).unwrap();
        assert_eq!(plain.eta, r.iter().copied().collect::<Vec<_>>());
        // trace / P = 1, so ridge 1 doubles the diagonal.
        let half = solve_eta(&sys, 1.0).unwrap();
        for (h, v) in half.eta.iter().zip(r.iter()) {
            assert!((h - v / 2.0).abs() < 1e-15);
        }
        assert!(solve_eta(&sys, -1.0).is_err());
    }

    #[test]
    fn solve_error_paths() {
        let zero = GramSystem {
            k: DMatrix::zeros(2, 2),
            r: DVector::from_vec(vec![1.0, 0.0]),
            t: 0.0,
        };
        assert!(matches!(solve_eta(&zero, 0.0), Err(Error::UnrepresentableDrift)));
        let nan = GramSystem {
            k: DMatrix::from_row_slice(1, 1, &[f64::NAN]),
            r: DVector::from_vec(vec![1.0]),
            t: 0.0,
        };
        assert!(matches!(solve_eta(&nan, 0.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn singular_system_falls_back_to_pseudo_inverse() {
        let sys = GramSystem {
            k: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
            r: DVector::from_vec(vec![2.0, 2.0]),
            t: 0.0,
        };
        let sol = solve_eta(&sys, 0.0).unwrap();
        assert!(sol.pseudo_inverse);
        assert!((sol.eta[0] - 1.0).abs() < 1e-12 && (sol.eta[1] - 1.0).abs() < 1e-12);
        let ridged = solve_eta(&sys, DEFAULT_RIDGE).unwrap();
        assert!(!ridged.pseudo_inverse);
    }

    #[test]
    fn single_step_table_fits_pure_noise() {
        let pairs = DataPairs::with_generated_noise(array![[1.0], [2.0], [3.0]], 0).unwrap();
        let (table, report) = fit_table(&x_and_half_square(), &pairs, &Schedule::Linear, 1, 0.0).unwrap();
        assert_eq!(table.grid, vec![0.0, 1.0]);
        assert_eq!(table.steps(), 1);
        assert_eq!(report.nodes.len(), 1);
        // At t = 0 the states are the noise draws themselves.
        let sys = assemble(&x_and_half_square(), &interpolate(&pairs, &Schedule::Linear, 0.0)).unwrap();
        let direct = solve_eta(&sys, 0.0).unwrap();
        assert_eq!(table.etas.row(0).to_vec(), direct.eta);
        assert_eq!(table.descriptor.samples, 3);
    }

    #[test]
    fn node_lookup_is_left_continuous() {
        let pairs = DataPairs::with_generated_noise(array![[1.0], [2.0]], 0).unwrap();
        let (table, _) = fit_table(&LinearCoordinates::new(1), &pairs, &Schedule::Linear, 4, 0.0).unwrap();
        assert_eq!(table.node_at(0.0), 0);
        assert_eq!(table.node_at(0.25), 1);
        assert_eq!(table.node_at(0.2499), 0);
        assert_eq!(table.node_at(0.99), 3);
        assert_eq!(table.node_at(1.0), 3);
        table.validate().unwrap();
    }

    #[test]
    fn fit_errors() {
        let pairs = hand_pairs();
        assert!(fit_table(&LinearCoordinates::new(2), &pairs, &Schedule::Linear, 3, 0.0).is_err());
        assert!(fit_table(&LinearCoordinates::new(1), &pairs, &Schedule::Linear, 0, 0.0).is_err());
        assert!(DataPairs::new(array![[1.0, 2.0]], array![[1.0]]).is_err());
        assert!(DataPairs::new(array![[f64::NAN]], array![[1.0]]).is_err());
    }
}
