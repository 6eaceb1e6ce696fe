//! Projections onto Koopman eigenspaces by weighted time averages.
//!
//! [`fourier_projection`] demodulates a snapshot sequence at a frequency on
//! the unit circle. [`gla_modes`] handles an ordered list of eigenvalues by
//! subtracting the modes already found before averaging for the next one.
//! The continuous-time variants integrate uniformly sampled data with the
//! trapezoid rule.
//!
//! Averages against eigenvalues off the unit circle are numerically
//! unstable: the weight `λ^{−k}` grows geometrically for `|λ| < 1`, and any
//! error left in a dominant mode is amplified at later stages. The functions
//! here compute the formula as written and report a reconstruction residual
//! so callers can judge the result.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{KoopmanError, Result};
use crate::observables::{cis_turns, SnapshotMatrix};
use crate::stats::CompensatedSum;

/// Eigenvalues closer than this are treated as duplicates.
pub const DUPLICATE_TOL: f64 = 1e-12;
/// Largest weight magnitude accepted before reporting a range error.
const WEIGHT_LIMIT: f64 = 1e290;

/// Simple eigenvalues ordered by non-increasing modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueList {
    values: Vec<Complex64>,
}

impl EigenvalueList {
    /// Validates the ordering and distinctness of `values`.
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(KoopmanError::input("eigenvalue list is empty"));
        }
        if let Some(i) = values.iter().position(|z| !z.is_finite()) {
            return Err(KoopmanError::input(format!("eigenvalue {i} is not finite")));
        }
        for i in 1..values.len() {
            if values[i].norm() > values[i - 1].norm() {
                return Err(KoopmanError::input(format!("eigenvalue {i} has larger modulus than its predecessor")));
            }
        }
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                if (values[i] - values[j]).norm() <= DUPLICATE_TOL {
                    return Err(KoopmanError::input(format!("eigenvalues {i} and {j} coincide")));
                }
            }
        }
        Ok(EigenvalueList { values })
    }

    /// Sorts `values` by non-increasing modulus (stable), then validates.
    pub fn sorted(mut values: Vec<Complex64>) -> Result<Self> {
        values.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        Self::new(values)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The vector `φ_j(p) C_j(F)` recovered for one eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedMode {
    pub eigenvalue: Complex64,
    pub mode_at_p: DVector<Complex64>,
    /// Number of snapshots averaged.
    pub horizon: usize,
}

/// Modes from [`gla_modes`] with the residual `‖b_{K−1} − Σ λ_i^{K−1} mode_i‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlaOutput {
    pub modes: Vec<ProjectedMode>,
    pub residual: f64,
}

#[derive(Clone, Copy)]
enum Quadrature {
    /// Plain mean over `K` samples.
    Mean,
    /// Trapezoid rule over `[0, (K−1)·dt]`.
    Trapezoid,
}

impl Quadrature {
    fn weight(self, k: usize, count: usize) -> f64 {
        match self {
            Quadrature::Mean => 1.0,
            Quadrature::Trapezoid if k == 0 || k + 1 == count => 0.5,
            Quadrature::Trapezoid => 1.0,
        }
    }

    fn normalizer(self, count: usize) -> f64 {
        match self {
            Quadrature::Mean => count as f64,
            Quadrature::Trapezoid => (count - 1) as f64,
        }
    }
}

fn weighted_average(
    snapshots: &SnapshotMatrix,
    count: usize,
    rule: Quadrature,
    mut term: impl FnMut(usize, DVector<Complex64>) -> Result<DVector<Complex64>>,
) -> Result<DVector<Complex64>> {
    let m = snapshots.m();
    let mut sums = vec![CompensatedSum::new(); m];
    for k in 0..count {
        let t = term(k, snapshots.column(k))?;
        let w = rule.weight(k, count);
        for (s, v) in sums.iter_mut().zip(t.iter()) {
            s.add(v * w);
        }
    }
    let scale = rule.normalizer(count);
    Ok(DVector::from_iterator(m, sums.iter().map(|s| s.value() / scale)))
}

fn demodulate(snapshots: &SnapshotMatrix, omega: f64, rule: Quadrature, eigenvalue: Complex64) -> Result<ProjectedMode> {
    let count = snapshots.count();
    let mode = weighted_average(snapshots, count, rule, |k, b| {
        // reduce ωk modulo 1 before forming the phase
        let turns = (omega * k as f64).fract();
        Ok(b * cis_turns(-turns))
    })?;
    Ok(ProjectedMode { eigenvalue, mode_at_p: mode, horizon: count })
}

/// `(1/K) Σ_{k<K} e^{−i2πωk} b_k` over all `K` snapshots.
pub fn fourier_projection(snapshots: &SnapshotMatrix, omega: f64) -> Result<ProjectedMode> {
    if !omega.is_finite() {
        return Err(KoopmanError::input("frequency must be finite"));
    }
    demodulate(snapshots, omega, Quadrature::Mean, cis_turns(omega))
}

/// Continuous-time projection `(1/T) ∫₀ᵀ e^{−i2πνt} F(t) dt` for snapshots
/// sampled every `dt`; `frequency` `ν` is in cycles per unit time. The
/// eigenvalue field holds the exponent `i2πν`.
pub fn fourier_projection_continuous(snapshots: &SnapshotMatrix, frequency: f64, dt: f64) -> Result<ProjectedMode> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(KoopmanError::input("dt must be positive"));
    }
    if !frequency.is_finite() {
        return Err(KoopmanError::input("frequency must be finite"));
    }
    let eigenvalue = Complex64::new(0.0, 2.0 * std::f64::consts::PI * frequency);
    demodulate(snapshots, frequency * dt, Quadrature::Trapezoid, eigenvalue)
}

fn check_weight(z: Complex64, what: &str, horizon: usize) -> Result<Complex64> {
    if z.is_finite() && z.norm() < WEIGHT_LIMIT {
        Ok(z)
    } else {
        Err(KoopmanError::Range(format!("{what} overflows within horizon {horizon}; use a smaller horizon")))
    }
}

/// Generalized Laplace analysis over the first `horizon` snapshots.
///
/// Stage `j` averages `λ_j^{−k} [b_k − Σ_{i<j} λ_i^k mode_i]`.
pub fn gla_modes(snapshots: &SnapshotMatrix, eigs: &EigenvalueList, horizon: usize) -> Result<GlaOutput> {
    run_gla(snapshots, eigs.values(), horizon, Quadrature::Mean, |z, k| z.powi(k as i32))
}

/// Continuous-time analogue of [`gla_modes`] for exponents `μ_j` (so that
/// `U^t φ_j = e^{μ_j t} φ_j`) ordered by non-increasing real part, for
/// snapshots sampled every `dt`.
pub fn gla_modes_continuous(snapshots: &SnapshotMatrix, exponents: &[Complex64], dt: f64, horizon: usize) -> Result<GlaOutput> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(KoopmanError::input("dt must be positive"));
    }
    if horizon < 2 {
        return Err(KoopmanError::input("continuous averaging needs a horizon of at least 2"));
    }
    // ordering by Re μ is ordering by |e^{μ dt}|; validate through the discrete list
    let multipliers: Vec<Complex64> = exponents.iter().map(|mu| (mu * dt).exp()).collect();
    EigenvalueList::new(multipliers)?;
    let rescaled: Vec<Complex64> = exponents.iter().map(|mu| mu * dt).collect();
    let mut out = run_gla(snapshots, &rescaled, horizon, Quadrature::Trapezoid, |mu, k| (mu * k as f64).exp())?;
    for (m, mu) in out.modes.iter_mut().zip(exponents) {
        m.eigenvalue = *mu;
    }
    Ok(out)
}

fn run_gla(
    snapshots: &SnapshotMatrix,
    values: &[Complex64],
    horizon: usize,
    rule: Quadrature,
    power: impl Fn(Complex64, usize) -> Complex64,
) -> Result<GlaOutput> {
    if horizon == 0 || horizon > snapshots.count() {
        return Err(KoopmanError::input(format!("horizon {horizon} outside 1..={}", snapshots.count())));
    }
    if let Some(j) = values.iter().position(|z| power(*z, 1).norm() == 0.0) {
        return Err(KoopmanError::ZeroEigenvalue(j));
    }
    let mut modes: Vec<ProjectedMode> = Vec::with_capacity(values.len());
    for &lambda in values {
        let mode = weighted_average(snapshots, horizon, rule, |k, mut b| {
            for prev in &modes {
                let w = check_weight(power(prev.eigenvalue, k), "eigenvalue power", horizon)?;
                b -= &prev.mode_at_p * w;
            }
            let w = check_weight(power(lambda, k).inv(), "inverse eigenvalue power", horizon)?;
            Ok(b * w)
        })?;
        modes.push(ProjectedMode { eigenvalue: lambda, mode_at_p: mode, horizon });
    }
    let last = horizon - 1;
    let mut rebuilt = DVector::zeros(snapshots.m());
    for m in &modes {
        rebuilt += &m.mode_at_p * power(m.eigenvalue, last);
    }
    let residual = (snapshots.column(last) - rebuilt).norm();
    Ok(GlaOutput { modes, residual })
}
