//! Geometry of the ergodic quotient.
//!
//! Empirical-measure coefficient vectors are compared with a negative
//! Sobolev norm, the resulting distance matrix is embedded with diffusion
//! maps, and the embedding can be clustered with k-means.
//!
//! Diffusion-map conventions: Gaussian kernel `exp(−d²/ε²)`, density
//! normalization with α = 1, Markov normalization, eigenvectors scaled to
//! unit norm under the stationary distribution and multiplied by their
//! eigenvalues. Each coordinate's sign is chosen so that its entry of
//! largest magnitude is positive.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::averaging::EmpiricalMeasureCoeffs;
use crate::error::{KoopmanError, Result};
use crate::linalg::symmetric_eigen;
use crate::observables::WavevectorGrid;

/// Sobolev index `s > 0` of the weight `(1 + (2π‖k‖₂)²)^{−s}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevIndex {
    s: f64,
}

impl SobolevIndex {
    pub fn new(s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(KoopmanError::input("Sobolev index must be positive"));
        }
        Ok(SobolevIndex { s })
    }

    /// `s = (D + 1) / 2`.
    pub fn for_dims(dims: usize) -> Self {
        SobolevIndex { s: (dims as f64 + 1.0) / 2.0 }
    }

    pub fn value(&self) -> f64 {
        self.s
    }

    pub fn weight(&self, k: &[i32]) -> f64 {
        let norm2: f64 = k.iter().map(|&v| (v as f64) * (v as f64)).sum();
        (1.0 + 4.0 * PI * PI * norm2).powf(-self.s)
    }

    pub fn weights(&self, grid: &WavevectorGrid) -> Vec<f64> {
        grid.vectors().iter().map(|k| self.weight(k)).collect()
    }
}

/// `sqrt(Σ_k w_k |a_k − b_k|²)`.
pub fn weighted_distance(a: &[Complex64], b: &[Complex64], weights: &[f64]) -> f64 {
    a.iter().zip(b).zip(weights).map(|((x, y), w)| w * (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn check_same_grid(a: &EmpiricalMeasureCoeffs, b: &EmpiricalMeasureCoeffs) -> Result<()> {
    if a.grid != b.grid || a.coeffs.len() != b.coeffs.len() {
        return Err(KoopmanError::input(format!(
            "coefficient truncations differ: (D={}, kmax={}) vs (D={}, kmax={})",
            a.dims(),
            a.kmax(),
            b.dims(),
            b.kmax()
        )));
    }
    Ok(())
}

/// Negative Sobolev distance between two coefficient vectors.
pub fn sobolev_distance(a: &EmpiricalMeasureCoeffs, b: &EmpiricalMeasureCoeffs, s: SobolevIndex) -> Result<f64> {
    check_same_grid(a, b)?;
    Ok(weighted_distance(&a.coeffs, &b.coeffs, &s.weights(&a.grid)))
}

/// Pairwise distances over a set of seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub entries: DMatrix<f64>,
    pub seed_ids: Vec<usize>,
    pub s: SobolevIndex,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }
}

/// Distances between raw coefficient vectors under explicit weights.
pub fn pairwise_distances(vectors: &[Vec<Complex64>], weights: &[f64]) -> DMatrix<f64> {
    let n = vectors.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| weighted_distance(&vectors[i], &vectors[j], weights)).collect())
        .collect();
    let mut d = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// All pairwise Sobolev distances; seeds are numbered by position.
pub fn distance_matrix(set: &[EmpiricalMeasureCoeffs], s: SobolevIndex) -> Result<DistanceMatrix> {
    if let Some(first) = set.first() {
        for other in &set[1..] {
            check_same_grid(first, other)?;
        }
    }
    let weights = set.first().map(|c| s.weights(&c.grid)).unwrap_or_default();
    let vectors: Vec<Vec<Complex64>> = set.iter().map(|c| c.coeffs.clone()).collect();
    Ok(DistanceMatrix { entries: pairwise_distances(&vectors, &weights), seed_ids: (0..set.len()).collect(), s })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Median of the nonzero pairwise distances.
    Auto,
    Fixed(f64),
}

/// Diffusion coordinates of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionEmbedding {
    /// `N × n_coords`, column `k` is `χ_{k+1}`.
    pub coords: DMatrix<f64>,
    /// Non-increasing, trivial eigenvalue excluded.
    pub eigenvalues: Vec<f64>,
    pub bandwidth: f64,
}

impl DiffusionEmbedding {
    pub fn n_coords(&self) -> usize {
        self.coords.ncols()
    }

    /// Keeps the first `n` coordinates.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_coords() {
            return Err(KoopmanError::input(format!("cannot keep {n} of {} coordinates", self.n_coords())));
        }
        Ok(DiffusionEmbedding {
            coords: self.coords.columns(0, n).into_owned(),
            eigenvalues: self.eigenvalues[..n].to_vec(),
            bandwidth: self.bandwidth,
        })
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.coords.row(i).iter().copied().collect()
    }
}

fn median_nonzero(d: &DMatrix<f64>) -> Option<f64> {
    let n = d.nrows();
    let mut v: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| d[(i, j)]).filter(|&x| x > 0.0).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len();
    Some(if m % 2 == 1 { v[m / 2] } else { 0.5 * (v[m / 2 - 1] + v[m / 2]) })
}

/// Minimum off-diagonal kernel mass per row below which a point counts as
/// disconnected from all others.
const CONNECTIVITY_FLOOR: f64 = 1e-12;

/// Diffusion-map embedding of a distance matrix.
pub fn diffusion_maps(dm: &DistanceMatrix, bandwidth: Bandwidth, n_coords: usize) -> Result<DiffusionEmbedding> {
    let n = dm.len();
    if n_coords == 0 {
        return Err(KoopmanError::input("n_coords must be at least 1"));
    }
    if n < n_coords + 1 {
        return Err(KoopmanError::input(format!("{n} points cannot support {n_coords} nontrivial coordinates")));
    }
    let eps = match bandwidth {
        Bandwidth::Fixed(e) if e.is_finite() && e > 0.0 => e,
        Bandwidth::Fixed(_) => return Err(KoopmanError::input("bandwidth must be positive")),
        Bandwidth::Auto => median_nonzero(&dm.entries)
            .ok_or_else(|| KoopmanError::DegenerateKernel("all pairwise distances are zero".into()))?,
    };
    if dm.entries.iter().all(|&x| x == 0.0) {
        return Err(KoopmanError::DegenerateKernel("all pairwise distances are zero".into()));
    }

    let kernel = dm.entries.map(|d| (-(d * d) / (eps * eps)).exp());
    let isolated = (0..n).filter(|&i| (0..n).filter(|&j| j != i).map(|j| kernel[(i, j)]).sum::<f64>() < CONNECTIVITY_FLOOR).count();
    if isolated == n {
        return Err(KoopmanError::DegenerateKernel(format!("kernel is numerically diagonal at bandwidth {eps:e}")));
    }

    // α = 1 density normalization, then the symmetric conjugate of the Markov matrix
    let q: Vec<f64> = (0..n).map(|i| kernel.row(i).sum()).collect();
    let normalized = DMatrix::from_fn(n, n, |i, j| kernel[(i, j)] / (q[i] * q[j]));
    let degree: Vec<f64> = (0..n).map(|i| normalized.row(i).sum()).collect();
    let total: f64 = degree.iter().sum();
    let root: Vec<f64> = degree.iter().map(|d| d.sqrt()).collect();
    let v0: Vec<f64> = degree.iter().map(|d| (d / total).sqrt()).collect();
    // deflate the stationary direction so the top eigenvectors are the nontrivial ones
    let sym = DMatrix::from_fn(n, n, |i, j| normalized[(i, j)] / (root[i] * root[j]) - v0[i] * v0[j]);

    let eig = symmetric_eigen(&sym)?;
    let mut coords = DMatrix::zeros(n, n_coords);
    let mut eigenvalues = Vec::with_capacity(n_coords);
    for c in 0..n_coords {
        let k = n - 1 - c;
        let lambda = eig.values[k].max(0.0);
        let mut psi: Vec<f64> = (0..n).map(|i| eig.vectors[(i, k)] / v0[i]).collect();
        let lead = psi.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if lead < 0.0 {
            psi.iter_mut().for_each(|x| *x = -*x);
        }
        for (i, p) in psi.iter().enumerate() {
            coords[(i, c)] = lambda * p;
        }
        eigenvalues.push(lambda);
    }
    Ok(DiffusionEmbedding { coords, eigenvalues, bandwidth: eps })
}

/// Absolute correlation between matching coordinates of two embeddings of
/// the same points; values near one mean the coordinate is stable.
pub fn coordinate_agreement(a: &DiffusionEmbedding, b: &DiffusionEmbedding) -> Result<Vec<f64>> {
    if a.coords.nrows() != b.coords.nrows() {
        return Err(KoopmanError::DimensionMismatch { expected: a.coords.nrows(), got: b.coords.nrows() });
    }
    let n = a.n_coords().min(b.n_coords());
    Ok((0..n)
        .map(|c| {
            let x: Vec<f64> = a.coords.column(c).iter().copied().collect();
            let y: Vec<f64> = b.coords.column(c).iter().copied().collect();
            crate::stats::pearson(&x, &y).abs()
        })
        .collect())
}

const KMEANS_MAX_ITER: usize = 100;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd k-means with farthest-point seeding from point 0. Ties go to the
/// lowest index. Label `c` is the cluster grown from the `c`-th seed.
pub fn kmeans(points: &[Vec<f64>], k: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(KoopmanError::input(format!("cluster count {k} outside 1..={n}")));
    }
    let mut centers: Vec<Vec<f64>> = vec![points[0].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[0])).collect();
    while centers.len() < k {
        let mut best = 0;
        for i in 1..n {
            if nearest[i] > nearest[best] {
                best = i;
            }
        }
        centers.push(points[best].clone());
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(p, &points[best]));
        }
    }

    let assign = |centers: &[Vec<f64>]| -> Vec<usize> {
        points
            .iter()
            .map(|p| {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (c, center) in centers.iter().enumerate() {
                    let d = sq_dist(p, center);
                    if d < best_d {
                        best = c;
                        best_d = d;
                    }
                }
                best
            })
            .collect()
    };
    let mut labels = assign(&centers);
    for _ in 0..KMEANS_MAX_ITER {
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next = assign(&centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    Ok(labels)
}

/// k-means labels in the diffusion coordinates of `embedding`.
pub fn extract_components(embedding: &DiffusionEmbedding, k_clusters: usize) -> Result<Vec<usize>> {
    let points: Vec<Vec<f64>> = (0..embedding.coords.nrows()).map(|i| embedding.point(i)).collect();
    kmeans(&points, k_clusters)
}
