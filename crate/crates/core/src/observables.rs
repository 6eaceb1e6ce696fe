//! Observables on state spaces and the snapshot matrices they produce.
//!
//! Harmonics are normalized as bare exponentials `e^{i2πk·u}` where `u` is
//! the state mapped onto the unit cube (`x / period` on periodic axes), so
//! every harmonic has unit modulus. Scaling conventions that other sources
//! put in front of the exponential are absorbed by the Sobolev weights.
//!
//! The grid returned by [`harmonic_grid`] is ordered lexicographically over
//! `[−kmax, kmax]^D` with the first axis most significant. Under that
//! ordering the wavevector at position `i` has its negative at `len − 1 − i`.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dynamics::{StateDomain, Trajectory};
use crate::error::{KoopmanError, Result};

/// Scalar or vector-valued function on a state space.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    /// `e^{i2πk·u}` for an integer wavevector `k`.
    Harmonic { k: Vec<i32> },
    /// The real coordinate `x_i`.
    Coordinate { index: usize },
    /// Indicator of the open ball `B(center, radius)` in the domain metric.
    BallIndicator { center: Vec<f64>, radius: f64 },
    /// Trigonometric polynomial `Σ w_j e^{i2πκ_j·u}` with real frequency
    /// vectors `κ_j`. Covers observables whose frequencies are not integers
    /// on the unit cell, e.g. `sin(πx − π/4) cos(6πp)`, see
    /// [`Observable::standard_map_probe`].
    TrigPolynomial { terms: Vec<(Complex64, Vec<f64>)> },
    /// Pointwise product of scalar observables.
    Product(Vec<Observable>),
    /// Stack of scalar observables, one output row each.
    Composite(Vec<Observable>),
}

impl Observable {
    pub fn harmonic(k: Vec<i32>) -> Self {
        Observable::Harmonic { k }
    }

    pub fn coordinate(index: usize) -> Self {
        Observable::Coordinate { index }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(KoopmanError::input("ball radius must be positive"));
        }
        Ok(Observable::BallIndicator { center, radius })
    }

    /// Stack of scalar observables; nested vector-valued members are rejected.
    pub fn composite(members: Vec<Observable>) -> Result<Self> {
        if members.is_empty() {
            return Err(KoopmanError::input("composite observable needs at least one member"));
        }
        if members.iter().any(|m| m.codomain_dim() != 1) {
            return Err(KoopmanError::input("composite members must be scalar"));
        }
        Ok(Observable::Composite(members))
    }

    pub fn product(factors: Vec<Observable>) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(|m| m.codomain_dim() != 1) {
            return Err(KoopmanError::input("product factors must be scalar and non-empty"));
        }
        Ok(Observable::Product(factors))
    }

    /// Identity observable `F(x) = x` on a `dim`-dimensional state.
    pub fn identity(dim: usize) -> Self {
        Observable::Composite((0..dim).map(Observable::coordinate).collect())
    }

    /// `sin(πx − π/4) cos(6πp)` on the unit torus, written as four
    /// exponentials with frequencies `(±½, ±3)`. The half-integer frequency
    /// in `x` is why this cannot be a combination of integer harmonics.
    pub fn standard_map_probe() -> Self {
        // sin(a) = (e^{ia} − e^{−ia}) / 2i,  cos(b) = (e^{ib} + e^{−ib}) / 2
        let phase = Complex64::from_polar(1.0, -PI / 4.0);
        let plus = phase / Complex64::new(0.0, 4.0);
        let minus = -phase.conj() / Complex64::new(0.0, 4.0);
        Observable::TrigPolynomial {
            terms: vec![
                (plus, vec![0.5, 3.0]),
                (plus, vec![0.5, -3.0]),
                (minus, vec![-0.5, 3.0]),
                (minus, vec![-0.5, -3.0]),
            ],
        }
    }

    pub fn codomain_dim(&self) -> usize {
        match self {
            Observable::Composite(members) => members.len(),
            _ => 1,
        }
    }

    /// Evaluates the observable at `x`.
    pub fn eval(&self, domain: &StateDomain, x: &[f64]) -> Result<Vec<Complex64>> {
        let mut out = Vec::with_capacity(self.codomain_dim());
        self.eval_into(domain, x, &mut out)?;
        Ok(out)
    }

    /// Appends the value at `x` to `out`.
    pub fn eval_into(&self, domain: &StateDomain, x: &[f64], out: &mut Vec<Complex64>) -> Result<()> {
        domain.check_dim(x)?;
        match self {
            Observable::Composite(members) => {
                for m in members {
                    out.push(m.eval_scalar(domain, x)?);
                }
            }
            other => out.push(other.eval_scalar(domain, x)?),
        }
        Ok(())
    }

    fn eval_scalar(&self, domain: &StateDomain, x: &[f64]) -> Result<Complex64> {
        match self {
            Observable::Harmonic { k } => {
                if k.len() != x.len() {
                    return Err(KoopmanError::DimensionMismatch { expected: x.len(), got: k.len() });
                }
                let mut phase = 0.0;
                for (i, (&ki, &xi)) in k.iter().zip(x).enumerate() {
                    if ki == 0 {
                        continue;
                    }
                    let u = unit_coordinate(domain, i, xi)?;
                    phase += ki as f64 * u;
                }
                Ok(cis_turns(phase))
            }
            Observable::TrigPolynomial { terms } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for (w, freq) in terms {
                    if freq.len() != x.len() {
                        return Err(KoopmanError::DimensionMismatch { expected: x.len(), got: freq.len() });
                    }
                    let mut phase = 0.0;
                    for (i, (&f, &xi)) in freq.iter().zip(x).enumerate() {
                        if f != 0.0 {
                            phase += f * unit_coordinate(domain, i, xi)?;
                        }
                    }
                    acc += w * cis_turns(phase);
                }
                Ok(acc)
            }
            Observable::Coordinate { index } => x
                .get(*index)
                .map(|&v| Complex64::new(v, 0.0))
                .ok_or(KoopmanError::DimensionMismatch { expected: index + 1, got: x.len() }),
            Observable::BallIndicator { center, radius } => {
                domain.check_dim(center)?;
                let inside = domain.distance(center, x) < *radius;
                Ok(Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0))
            }
            Observable::Product(factors) => {
                let mut acc = Complex64::new(1.0, 0.0);
                for f in factors {
                    acc *= f.eval_scalar(domain, x)?;
                }
                Ok(acc)
            }
            Observable::Composite(_) => Err(KoopmanError::input("composite observable is not scalar")),
        }
    }
}

fn unit_coordinate(domain: &StateDomain, i: usize, x: f64) -> Result<f64> {
    domain.coords[i]
        .to_unit(x)
        .ok_or_else(|| KoopmanError::input(format!("harmonic observable on non-periodic coordinate {i}")))
}

/// `e^{i2πt}`.
pub(crate) fn cis_turns(t: f64) -> Complex64 {
    let (s, c) = (2.0 * PI * t).sin_cos();
    Complex64::new(c, s)
}

/// Where a snapshot matrix came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Trace { system: String, observable: String },
    File(String),
    Synthetic(String),
}

/// Sequence `b_0, …, b_r` of observable values, stored as the columns of an
/// `m × (r+1)` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    data: DMatrix<Complex64>,
    pub source: Provenance,
}

impl SnapshotMatrix {
    pub fn new(data: DMatrix<Complex64>, source: Provenance) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(KoopmanError::EmptyData("snapshot matrix has no entries".into()));
        }
        if data.ncols() < 2 {
            return Err(KoopmanError::input("snapshot sequence needs at least two columns"));
        }
        Ok(SnapshotMatrix { data, source })
    }

    pub fn from_columns(columns: &[Vec<Complex64>], source: Provenance) -> Result<Self> {
        let m = columns.first().map(Vec::len).unwrap_or(0);
        if let Some((k, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != m) {
            return Err(KoopmanError::input(format!("column {k} has length {} instead of {m}", c.len())));
        }
        let data = DMatrix::from_fn(m, columns.len(), |i, j| columns[j][i]);
        Self::new(data, source)
    }

    /// Real-valued columns.
    pub fn from_real_columns(columns: &[Vec<f64>], source: Provenance) -> Result<Self> {
        let cols: Vec<Vec<Complex64>> =
            columns.iter().map(|c| c.iter().map(|&v| Complex64::new(v, 0.0)).collect()).collect();
        Self::from_columns(&cols, source)
    }

    /// Output dimension `m`.
    pub fn m(&self) -> usize {
        self.data.nrows()
    }

    /// Number of snapshots `r + 1`.
    pub fn count(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn column(&self, k: usize) -> DVector<Complex64> {
        self.data.column(k).into_owned()
    }

    /// Keeps only the snapshots in `range`, e.g. to drop a transient.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.count() {
            return Err(KoopmanError::input(format!(
                "column range {}..{} outside 0..{}",
                range.start,
                range.end,
                self.count()
            )));
        }
        let data = self.data.columns(range.start, range.end - range.start).into_owned();
        Self::new(data, self.source.clone())
    }

    /// Scales every entry by `alpha`.
    pub fn scaled(&self, alpha: Complex64) -> Self {
        SnapshotMatrix { data: &self.data * alpha, source: self.source.clone() }
    }

    /// Appends the rows of `other` below this matrix.
    pub fn stack(&self, other: &SnapshotMatrix) -> Result<Self> {
        if other.count() != self.count() {
            return Err(KoopmanError::DimensionMismatch { expected: self.count(), got: other.count() });
        }
        let (m1, m2) = (self.m(), other.m());
        let data = DMatrix::from_fn(m1 + m2, self.count(), |i, j| {
            if i < m1 {
                self.data[(i, j)]
            } else {
                other.data[(i - m1, j)]
            }
        });
        Self::new(data, self.source.clone())
    }
}

/// Evaluates `obs` along a trajectory: column `n` is `obs(states[n])`.
pub fn trace(obs: &Observable, traj: &Trajectory, domain: &StateDomain) -> Result<SnapshotMatrix> {
    let m = obs.codomain_dim();
    let mut values = Vec::with_capacity(m * traj.len());
    for (n, x) in traj.states.iter().enumerate() {
        obs.eval_into(domain, x, &mut values).map_err(|e| match e {
            KoopmanError::Input(msg) => KoopmanError::Input(format!("step {n}: {msg}")),
            other => other,
        })?;
    }
    let data = DMatrix::from_column_slice(m, traj.len(), &values);
    SnapshotMatrix::new(
        data,
        Provenance::Trace { system: traj.system_id.clone(), observable: format!("{obs:?}") },
    )
}

/// Integer wavevectors `k` with `‖k‖∞ ≤ kmax`, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WavevectorGrid {
    pub dims: usize,
    pub kmax: i32,
    vectors: Vec<Vec<i32>>,
}

impl WavevectorGrid {
    pub fn new(dims: usize, kmax: i32) -> Result<Self> {
        if dims == 0 {
            return Err(KoopmanError::input("wavevector grid needs at least one dimension"));
        }
        if kmax < 0 {
            return Err(KoopmanError::input("kmax must be non-negative"));
        }
        let side = (2 * kmax + 1) as usize;
        let count = side
            .checked_pow(dims as u32)
            .filter(|&c| c <= 1 << 24)
            .ok_or_else(|| KoopmanError::input("wavevector grid too large"))?;
        let mut vectors = Vec::with_capacity(count);
        for idx in 0..count {
            let mut k = vec![0i32; dims];
            let mut rest = idx;
            for slot in k.iter_mut().rev() {
                *slot = (rest % side) as i32 - kmax;
                rest /= side;
            }
            vectors.push(k);
        }
        Ok(WavevectorGrid { dims, kmax, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<i32>] {
        &self.vectors
    }

    pub fn index_of(&self, k: &[i32]) -> Option<usize> {
        if k.len() != self.dims || k.iter().any(|v| v.abs() > self.kmax) {
            return None;
        }
        let side = (2 * self.kmax + 1) as usize;
        Some(k.iter().fold(0usize, |acc, &v| acc * side + (v + self.kmax) as usize))
    }

    /// Position of the zero wavevector.
    pub fn zero_index(&self) -> usize {
        self.len() / 2
    }

    /// Position of `−k` given the position of `k`.
    pub fn negated_index(&self, i: usize) -> usize {
        self.len() - 1 - i
    }
}

/// Harmonic observables for every wavevector of [`WavevectorGrid`].
pub fn harmonic_grid(dims: usize, kmax: i32) -> Result<Vec<Observable>> {
    Ok(WavevectorGrid::new(dims, kmax)?.vectors().iter().cloned().map(Observable::harmonic).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::MapSystem;
    use approx::assert_abs_diff_eq;

    fn torus2() -> StateDomain {
        StateDomain::unit_torus(2)
    }

    #[test]
    fn zero_harmonic_is_one() {
        let v = Observable::harmonic(vec![0, 0]).eval(&torus2(), &[0.37, 0.81]).unwrap();
        assert_eq!(v, vec![Complex64::new(1.0, 0.0)]);
    }

    #[test]
    fn half_period_harmonic() {
        let v = Observable::harmonic(vec![1, 0]).eval(&torus2(), &[0.5, 0.3]).unwrap()[0];
        assert_abs_diff_eq!(v.re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ball_membership() {
        let ball = Observable::ball(vec![0.5, 0.5], 0.1).unwrap();
        assert_eq!(ball.eval(&torus2(), &[0.55, 0.5]).unwrap()[0].re, 1.0);
        assert_eq!(ball.eval(&torus2(), &[0.7, 0.5]).unwrap()[0].re, 0.0);
        // wrap-around
        let edge = Observable::ball(vec![0.02, 0.5], 0.1).unwrap();
        assert_eq!(edge.eval(&torus2(), &[0.97, 0.5]).unwrap()[0].re, 1.0);
        assert!(Observable::ball(vec![0.5, 0.5], 0.0).is_err());
    }

    #[test]
    fn harmonic_needs_periodic_coordinate() {
        let err = Observable::harmonic(vec![1]).eval(&StateDomain::unbounded(1), &[0.3]).unwrap_err();
        assert!(err.is_input_error());
    }

    #[test]
    fn probe_matches_closed_form() {
        let probe = Observable::standard_map_probe();
        for &(x, p) in &[(0.1, 0.2), (0.73, 0.05), (0.5, 0.9)] {
            let v = probe.eval(&torus2(), &[x, p]).unwrap()[0];
            let expect = (PI * x - PI / 4.0).sin() * (6.0 * PI * p).cos();
            assert_abs_diff_eq!(v.re, expect, epsilon = 1e-14);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn product_of_coordinates() {
        let f = Observable::product(vec![Observable::coordinate(0), Observable::coordinate(1)]).unwrap();
        let v = f.eval(&StateDomain::unbounded(2), &[3.0, -2.0]).unwrap()[0];
        assert_eq!(v, Complex64::new(-6.0, 0.0));
    }

    #[test]
    fn composite_of_constants_gives_identical_columns() {
        let f = Observable::composite(vec![
            Observable::harmonic(vec![0, 0]),
            Observable::TrigPolynomial { terms: vec![(Complex64::new(2.0, 1.0), vec![0.0, 0.0])] },
        ])
        .unwrap();
        let traj = MapSystem::standard_map(0.2).unwrap().orbit(&[0.1, 0.3], 6).unwrap();
        let s = trace(&f, &traj, &torus2()).unwrap();
        for k in 1..s.count() {
            assert_eq!(s.column(k), s.column(0));
        }
    }

    #[test]
    fn coordinate_trace_on_rotation() {
        let rot = MapSystem::circle_rotation(0.25).unwrap();
        let traj = rot.orbit(&[0.0], 6).unwrap();
        let s = trace(&Observable::coordinate(0), &traj, &rot.domain).unwrap();
        let got: Vec<f64> = (0..6).map(|k| s.matrix()[(0, k)].re).collect();
        assert_eq!(got, vec![0.0, 0.25, 0.5, 0.75, 0.0, 0.25]);
    }

    #[test]
    fn harmonic_trace_on_rotation_is_geometric() {
        let omega = 0.1234;
        let rot = MapSystem::circle_rotation(omega).unwrap();
        let traj = rot.orbit(&[0.3], 20).unwrap();
        let s = trace(&Observable::harmonic(vec![1]), &traj, &rot.domain).unwrap();
        let b0 = s.matrix()[(0, 0)];
        for n in 0..20 {
            let expect = cis_turns(n as f64 * omega) * b0;
            assert!((s.matrix()[(0, n)] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn trace_reports_step_of_failure() {
        let rot = MapSystem::circle_rotation(0.3).unwrap();
        let traj = rot.orbit(&[0.0], 3).unwrap();
        let err = trace(&Observable::harmonic(vec![1]), &traj, &StateDomain::unbounded(1)).unwrap_err();
        assert!(err.to_string().contains("step 0"), "{err}");
    }

    #[test]
    fn grid_counts_and_order() {
        assert_eq!(harmonic_grid(2, 5).unwrap().len(), 121);
        assert_eq!(harmonic_grid(1, 0).unwrap(), vec![Observable::harmonic(vec![0])]);
        let g = WavevectorGrid::new(2, 1).unwrap();
        let expect: Vec<Vec<i32>> = vec![
            vec![-1, -1],
            vec![-1, 0],
            vec![-1, 1],
            vec![0, -1],
            vec![0, 0],
            vec![0, 1],
            vec![1, -1],
            vec![1, 0],
            vec![1, 1],
        ];
        assert_eq!(g.vectors(), &expect[..]);
        assert_eq!(g.zero_index(), 4);
        for (i, k) in g.vectors().iter().enumerate() {
            assert_eq!(g.index_of(k), Some(i));
            let neg: Vec<i32> = k.iter().map(|v| -v).collect();
            assert_eq!(g.vectors()[g.negated_index(i)], neg);
        }
    }

    #[test]
    fn snapshot_matrix_needs_two_columns() {
        assert!(SnapshotMatrix::from_real_columns(&[vec![1.0]], Provenance::Synthetic("t".into())).is_err());
        assert!(matches!(
            SnapshotMatrix::from_real_columns(&[vec![1.0], vec![1.0, 2.0]], Provenance::Synthetic("t".into())),
            Err(KoopmanError::Input(_))
        ));
    }
}
