//! Metric multidimensional scaling by SMACOF stress majorization.
//!
//! Raw stress is `sum_{i<j} (d_ij - |x_i - x_j|)^2`. The embedding starts
//! from classical (Torgerson) scaling or a seeded random configuration and is
//! refined with Guttman transforms, each of which cannot increase stress.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::oss::DissimilarityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MdsInit {
    #[default]
    Classical,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MdsConfig {
    /// Target dimension K.
    pub dims: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub init: MdsInit,
}

impl Default for MdsConfig {
    fn default() -> Self {
        Self {
            dims: 100,
            max_iter: 300,
            rel_tol: 1e-6,
            seed: 0,
            init: MdsInit::Classical,
        }
    }
}

impl MdsConfig {
    pub fn with_dims(dims: usize) -> Self {
        Self {
            dims,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub subject_ids: Vec<String>,
    /// N x K coordinates, rows aligned with the input matrix.
    pub coordinates: DMatrix<f64>,
    pub final_stress: f64,
    pub n_iter: usize,
    /// Stress of the initial configuration followed by one value per update.
    pub stress_history: Vec<f64>,
}

impl Embedding {
    pub fn to_features(&self) -> Result<FeatureMatrix> {
        FeatureMatrix::with_prefix(self.subject_ids.clone(), "mds", self.coordinates.clone())
    }
}

/// Raw stress of configuration `x` (N x K) against `d`.
pub fn stress(d: &DissimilarityMatrix, x: &DMatrix<f64>) -> Result<f64> {
    if x.nrows() != d.len() {
        return Err(Error::Shape(format!(
            "configuration has {} rows for {} subjects",
            x.nrows(),
            d.len()
        )));
    }
    let rows = to_rows(x);
    Ok(raw_stress(d.entries(), &rows, x.ncols()))
}

fn to_rows(x: &DMatrix<f64>) -> Vec<f64> {
    let (n, k) = x.shape();
    let mut out = vec![0.0; n * k];
    for i in 0..n {
        for c in 0..k {
            out[i * k + c] = x[(i, c)];
        }
    }
    out
}

fn from_rows(rows: &[f64], n: usize, k: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, k, rows)
}

#[inline]
fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

fn raw_stress(d: &DMatrix<f64>, rows: &[f64], k: usize) -> f64 {
    let n = d.nrows();
    let per_row: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &rows[i * k..(i + 1) * k];
            ((i + 1)..n)
                .map(|j| {
                    let r = d[(i, j)] - dist(xi, &rows[j * k..(j + 1) * k]);
                    r * r
                })
                .sum::<f64>()
        })
        .collect();
    per_row.iter().sum()
}

/// Classical scaling: top-K eigenpairs of `-1/2 J D^2 J`. Negative
/// eigenvalues contribute zero-valued coordinates.
pub fn classical_mds(d: &DissimilarityMatrix, dims: usize) -> Result<DMatrix<f64>> {
    let n = d.len();
    let d2 = d.entries().map(|v| v * v);
    let row_means: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (d2[(i, j)] - row_means[i] - row_means[j] + grand)
    });
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut x = DMatrix::zeros(n, dims);
    for (c, &idx) in order.iter().take(dims).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if !(lambda > 0.0) {
            continue;
        }
        let mut v = eig.eigenvectors.column(idx).into_owned();
        // Fix the sign so the output does not depend on solver conventions.
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        x.column_mut(c).copy_from(&(v * lambda.sqrt()));
    }
    Ok(x)
}

fn random_init(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, k, |_, _| rng.random::<f64>() - 0.5)
}

/// One Guttman transform: `x_i <- (1/N) sum_j (d_ij / |x_i - x_j|) (x_i - x_j)`.
fn guttman(d: &DMatrix<f64>, rows: &[f64], k: usize) -> Vec<f64> {
    let n = d.nrows();
    let inv_n = 1.0 / n as f64;
    let updated: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &rows[i * k..(i + 1) * k];
            let mut acc = vec![0.0; k];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let xj = &rows[j * k..(j + 1) * k];
                let delta = dist(xi, xj);
                if delta > 0.0 {
                    let ratio = d[(i, j)] / delta;
                    for c in 0..k {
                        acc[c] += ratio * (xi[c] - xj[c]);
                    }
                }
            }
            acc.iter_mut().for_each(|a| *a *= inv_n);
            acc
        })
        .collect();
    updated.concat()
}

/// Embeds `d` into `cfg.dims` dimensions.
pub fn mds_embed(d: &DissimilarityMatrix, cfg: &MdsConfig) -> Result<Embedding> {
    let n = d.len();
    let k = cfg.dims;
    if n < 2 {
        return Err(Error::invalid("MDS needs at least two subjects"));
    }
    if k < 1 || k > n - 1 {
        return Err(Error::invalid(format!(
            "target dimension {k} must be in 1..={}",
            n - 1
        )));
    }
    if !(cfg.rel_tol > 0.0) {
        return Err(Error::invalid("rel_tol must be positive"));
    }
    if d.entries().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "dissimilarities contain non-finite values".into(),
        ));
    }
    let x0 = match cfg.init {
        MdsInit::Classical => classical_mds(d, k)?,
        MdsInit::Random => random_init(n, k, cfg.seed),
    };
    let total: f64 = d.entries().iter().map(|v| v * v).sum::<f64>() / 2.0;
    let floor = total * 1e-24;

    let mut rows = to_rows(&x0);
    let mut current = raw_stress(d.entries(), &rows, k);
    let mut history = vec![current];
    let mut n_iter = 0;
    while n_iter < cfg.max_iter && current > floor {
        let next_rows = guttman(d.entries(), &rows, k);
        let next = raw_stress(d.entries(), &next_rows, k);
        if next > current * (1.0 + 1e-12) + floor {
            return Err(Error::Numeric(format!(
                "stress increased from {current} to {next} at iteration {}",
                n_iter + 1
            )));
        }
        n_iter += 1;
        history.push(next);
        rows = next_rows;
        let improvement = (current - next) / current;
        current = next;
        if improvement < cfg.rel_tol {
            break;
        }
    }
    Ok(Embedding {
        subject_ids: d.subject_ids().to_vec(),
        coordinates: from_rows(&rows, n, k),
        final_stress: current,
        n_iter,
        stress_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(entries: &[f64], n: usize) -> DissimilarityMatrix {
        let ids = (0..n).map(|i| format!("s{i}")).collect();
        DissimilarityMatrix::new(ids, DMatrix::from_row_slice(n, n, entries)).unwrap()
    }

    #[test]
    fn two_points() {
        let d = matrix(&[0.0, 1.0, 1.0, 0.0], 2);
        let e = mds_embed(&d, &MdsConfig::with_dims(1)).unwrap();
        let x = &e.coordinates;
        assert!(((x[(0, 0)] - x[(1, 0)]).abs() - 1.0).abs() < 1e-12);
        assert!(e.final_stress < 1e-20);
    }

    #[test]
    fn equilateral_triangle() {
        let d = matrix(&[0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0], 3);
        for init in [MdsInit::Classical, MdsInit::Random] {
            let cfg = MdsConfig {
                dims: 2,
                init,
                rel_tol: 1e-12,
                max_iter: 10_000,
                seed: 3,
            };
            let e = mds_embed(&d, &cfg).unwrap();
            let x = &e.coordinates;
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let dij = (x.row(i) - x.row(j)).norm();
                assert!((dij - 1.0).abs() < 1e-6, "{init:?} {dij}");
            }
            assert!(e.final_stress < 1e-10);
        }
    }

    #[test]
    fn stress_edge_cases() {
        let d = matrix(&[0.0, 0.3, 0.4, 0.3, 0.0, 0.5, 0.4, 0.5, 0.0], 3);
        let collapsed = DMatrix::zeros(3, 2);
        let want = 0.3f64.powi(2) + 0.4f64.powi(2) + 0.5f64.powi(2);
        assert!((stress(&d, &collapsed).unwrap() - want).abs() < 1e-15);
        assert!(stress(&d, &DMatrix::zeros(2, 2)).is_err());
        // 3-4-5 right triangle scaled by 0.1 is exactly representable in 2-D.
        let exact = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.3, 0.0, 0.0, 0.4]);
        assert!(stress(&d, &exact).unwrap() < 1e-30);
    }

    #[test]
    fn dimension_bounds() {
        let d = matrix(&[0.0, 1.0, 1.0, 0.0], 2);
        assert!(mds_embed(&d, &MdsConfig::with_dims(2)).is_err());
        assert!(mds_embed(&d, &MdsConfig::with_dims(0)).is_err());
    }
}
