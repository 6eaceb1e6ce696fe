//! Dynamic mode decomposition of snapshot sequences.
//!
//! Two variants are provided. [`companion_dmd`] fits the last snapshot as a
//! linear combination of the earlier ones and takes the roots of the
//! resulting companion polynomial as Ritz values; modes follow from a
//! Vandermonde solve. [`svd_dmd`] projects onto the leading left singular
//! vectors of the Krylov matrix first, which tolerates rank-deficient data.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{KoopmanError, Result};
use crate::linalg::{complex_eigen, least_squares_min_norm, polynomial_roots, solve_vandermonde, thin_svd};
use crate::observables::SnapshotMatrix;

/// Relative tolerance of the pivoted QR used for the companion coefficients.
pub const LEAST_SQUARES_RANK_TOL: f64 = 1e-12;
/// Ritz values closer than this are treated as repeated.
pub const RITZ_DISTINCT_TOL: f64 = 1e-10;
/// Default singular-value cut-off of [`svd_dmd`], relative to the largest.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Empirical Ritz value with its mode vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RitzPair {
    pub value: Complex64,
    pub mode: DVector<Complex64>,
    /// Euclidean norm of `mode`.
    pub energy: f64,
}

impl RitzPair {
    pub fn new(value: Complex64, mode: DVector<Complex64>) -> Self {
        let energy = mode.norm();
        RitzPair { value, mode, energy }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmdVariant {
    Companion,
    Svd,
}

impl DmdVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            DmdVariant::Companion => "companion",
            DmdVariant::Svd => "svd",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmdResult {
    /// Sorted by non-increasing energy.
    pub pairs: Vec<RitzPair>,
    /// For the companion variant `‖b_r − K_r c‖`; for the SVD variant the
    /// Frobenius norm of the part of `[b_1 … b_r]` not reproduced by the
    /// projected operator.
    pub residual_norm: f64,
    /// Minimum-norm least-squares coefficients `c` with `b_r ≈ K_r c`.
    pub companion_coeffs: Vec<Complex64>,
    pub variant: DmdVariant,
}

impl DmdResult {
    pub fn values(&self) -> Vec<Complex64> {
        self.pairs.iter().map(|p| p.value).collect()
    }

    /// Output dimension `m` of the modes.
    pub fn m(&self) -> usize {
        self.pairs.first().map(|p| p.mode.len()).unwrap_or(0)
    }
}

struct Krylov {
    basis: DMatrix<Complex64>,
    last: DVector<Complex64>,
}

fn split(snapshots: &SnapshotMatrix) -> Result<Krylov> {
    let data = snapshots.matrix();
    let r = snapshots.count() - 1;
    let basis = data.columns(0, r).into_owned();
    if basis.iter().all(|z| z.norm() == 0.0) {
        return Err(KoopmanError::EmptyData("snapshots b_0 … b_{r-1} are all zero".into()));
    }
    Ok(Krylov { basis, last: data.column(r).into_owned() })
}

fn companion_fit(k: &Krylov) -> (Vec<Complex64>, usize, f64) {
    let ls = least_squares_min_norm(&k.basis, &k.last, LEAST_SQUARES_RANK_TOL);
    (ls.x.iter().copied().collect(), ls.rank, ls.residual)
}

fn sort_by_energy(pairs: &mut [RitzPair]) {
    pairs.sort_by(|a, b| b.energy.total_cmp(&a.energy));
}

/// Companion-matrix decomposition of `b_0 … b_r`.
pub fn companion_dmd(snapshots: &SnapshotMatrix) -> Result<DmdResult> {
    let k = split(snapshots)?;
    let (m, r) = k.basis.shape();
    let (c, rank, residual) = companion_fit(&k);
    let required = m.min(r);
    if rank < required {
        return Err(KoopmanError::IllConditioned { rank, required });
    }

    // z^r − Σ c_j z^j, ascending coefficients
    let mut poly: Vec<Complex64> = c.iter().map(|cj| -cj).collect();
    poly.push(Complex64::new(1.0, 0.0));
    let values = polynomial_roots(&poly)?;

    // rows of E = K_r V⁻¹ solve Σ_i e_{p,i} λ_i^j = K[p, j]
    let mut modes = DMatrix::zeros(m, r);
    for p in 0..m {
        let row: Vec<Complex64> = k.basis.row(p).iter().copied().collect();
        let e = solve_vandermonde(&values, &row, RITZ_DISTINCT_TOL)?;
        for (i, v) in e.into_iter().enumerate() {
            modes[(p, i)] = v;
        }
    }
    let mut pairs: Vec<RitzPair> =
        values.iter().enumerate().map(|(i, &v)| RitzPair::new(v, modes.column(i).into_owned())).collect();
    sort_by_energy(&mut pairs);
    Ok(DmdResult { pairs, residual_norm: residual, companion_coeffs: c, variant: DmdVariant::Companion })
}

/// SVD-projected decomposition. Singular values below `rank_tol` times the
/// largest are discarded.
///
/// Modes are the projected eigenvectors lifted back to `m` dimensions and
/// scaled so that they sum to `b_0` in the least-squares sense.
pub fn svd_dmd(snapshots: &SnapshotMatrix, rank_tol: f64) -> Result<DmdResult> {
    if !(rank_tol.is_finite() && rank_tol >= 0.0) {
        return Err(KoopmanError::input("rank_tol must be a non-negative number"));
    }
    let data = snapshots.matrix();
    if data.iter().all(|z| z.norm() == 0.0) {
        return Err(KoopmanError::EmptyData("snapshot matrix is zero".into()));
    }
    let k = split(snapshots)?;
    let r = k.basis.ncols();
    let shifted = data.columns(1, r).into_owned();

    let svd = thin_svd(&k.basis);
    let rank = svd.rank(rank_tol);
    if rank == 0 {
        return Err(KoopmanError::EmptyData("all singular values below tolerance".into()));
    }
    let u = svd.u.columns(0, rank).into_owned();
    let w = svd.v.columns(0, rank).into_owned();
    let inv_sigma = DMatrix::from_fn(rank, rank, |i, j| {
        if i == j {
            Complex64::new(1.0 / svd.sigma[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let projected = u.adjoint() * &shifted * w * inv_sigma;
    let eig = complex_eigen(&projected)?;
    let lifted = &u * &eig.vectors;
    let amplitudes = least_squares_min_norm(&lifted, &k.basis.column(0).into_owned(), LEAST_SQUARES_RANK_TOL).x;

    let mut pairs: Vec<RitzPair> = eig
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| RitzPair::new(v, lifted.column(i) * amplitudes[i]))
        .collect();
    sort_by_energy(&mut pairs);

    let coords = u.adjoint() * &k.basis;
    let residual = (&shifted - &u * &projected * coords).norm();
    let (c, _, _) = companion_fit(&k);
    Ok(DmdResult { pairs, residual_norm: residual, companion_coeffs: c, variant: DmdVariant::Svd })
}

/// `Σ_i λ_i^k w_i`.
pub fn reconstruct(result: &DmdResult, k: u32) -> DVector<Complex64> {
    let mut out = DVector::zeros(result.m());
    for p in &result.pairs {
        out += &p.mode * p.value.powu(k);
    }
    out
}

/// Wraps an angle difference into `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        t + 2.0 * PI
    } else {
        t
    }
}

/// Partitions the output components `0..m` into coherent groups.
///
/// Components `a` and `b` are directly related when, for every selected
/// pair, their mode entries agree in modulus within `eps1` and in phase
/// within `eps2`. Groups are the connected components of that relation,
/// each sorted, listed by smallest member.
pub fn coherency_groups(result: &DmdResult, selected: &[usize], eps1: f64, eps2: f64) -> Result<Vec<Vec<usize>>> {
    if selected.is_empty() {
        return Err(KoopmanError::input("coherency needs at least one selected mode"));
    }
    if !(eps1 > 0.0 && eps2 > 0.0) {
        return Err(KoopmanError::input("coherency tolerances must be positive"));
    }
    if let Some(&bad) = selected.iter().find(|&&i| i >= result.pairs.len()) {
        return Err(KoopmanError::input(format!("mode index {bad} out of range 0..{}", result.pairs.len())));
    }
    let m = result.m();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for a in 0..m {
        for b in a + 1..m {
            let coherent = selected.iter().all(|&i| {
                let (ca, cb) = (result.pairs[i].mode[a], result.pairs[i].mode[b]);
                (ca.norm() - cb.norm()).abs() < eps1 && wrap_angle(ca.arg() - cb.arg()).abs() < eps2
            });
            if coherent {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; m];
    for j in 0..m {
        let root = find(&mut parent, j);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(j);
    }
    Ok(groups)
}
