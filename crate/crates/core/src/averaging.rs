//! Finite-horizon ergodic and Fourier averages along map orbits.
//!
//! All long sums use compensated summation. Harmonic coefficients for a
//! whole wavevector grid are accumulated in one pass: per state, the
//! phasors `e^{i2πk u_d}` for `k = 1..kmax` are formed once per axis and
//! negative wavevectors use their conjugates, so conjugate symmetry of the
//! result holds exactly and the zero coefficient is exactly one.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::{MapSystem, StateDomain};
use crate::error::{KoopmanError, Result};
use crate::observables::{cis_turns, Observable, WavevectorGrid};
use crate::stats::{linear_slope, CompensatedSum};

/// Default adaptive tolerance.
pub const DEFAULT_TOL: f64 = 1e-3;
/// Default number of iterates per convergence window.
pub const DEFAULT_CHECKPOINT: usize = 100;
/// Default iteration cap of the adaptive scheme.
pub const DEFAULT_N_MAX: usize = 1_000_000;

/// `e^{−i2πωn}` with `ωn` reduced modulo one first.
fn demodulation(omega: f64, n: usize) -> Complex64 {
    if omega == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    cis_turns(-(omega * n as f64).fract())
}

/// Running Fourier average of a vector-valued observable.
#[derive(Debug, Clone)]
pub struct ObservableAverager {
    obs: Observable,
    omega: f64,
    sums: Vec<CompensatedSum>,
    n: usize,
    scratch: Vec<Complex64>,
}

impl ObservableAverager {
    pub fn new(obs: Observable, omega: f64) -> Self {
        let m = obs.codomain_dim();
        ObservableAverager { obs, omega, sums: vec![CompensatedSum::new(); m], n: 0, scratch: Vec::with_capacity(m) }
    }

    /// Adds the next state of the orbit.
    pub fn push(&mut self, domain: &StateDomain, x: &[f64]) -> Result<()> {
        self.scratch.clear();
        self.obs.eval_into(domain, x, &mut self.scratch)?;
        let w = demodulation(self.omega, self.n);
        for (s, v) in self.sums.iter_mut().zip(&self.scratch) {
            s.add(v * w);
        }
        self.n += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn average(&self) -> Vec<Complex64> {
        let n = self.n.max(1) as f64;
        self.sums.iter().map(|s| s.value() / n).collect()
    }
}

/// `(1/N) Σ_{n<N} e^{−i2πωn} obs(Tⁿ x0)`.
pub fn fourier_average(system: &MapSystem, obs: &Observable, x0: &[f64], n: usize, omega: f64) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Err(KoopmanError::input("horizon must be at least 1"));
    }
    if !omega.is_finite() {
        return Err(KoopmanError::input("frequency must be finite"));
    }
    system.domain.check_dim(x0)?;
    let mut avg = ObservableAverager::new(obs.clone(), omega);
    let mut x = x0.to_vec();
    system.domain.wrap(&mut x);
    for step in 0..n {
        avg.push(&system.domain, &x)?;
        if step + 1 < n {
            system.advance(&mut x).map_err(|e| crate::dynamics::relabel_step(e, step + 1))?;
        }
    }
    Ok(avg.average())
}

/// Truncated Fourier coefficients of an empirical measure.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasureCoeffs {
    pub grid: WavevectorGrid,
    /// Indexed like `grid.vectors()`.
    pub coeffs: Vec<Complex64>,
    pub x0: Vec<f64>,
    /// Number of orbit points averaged.
    pub n: usize,
}

impl EmpiricalMeasureCoeffs {
    /// Restriction to the smaller grid `[−kmax, kmax]^D`.
    pub fn truncated(&self, kmax: i32) -> Result<Self> {
        if kmax > self.grid.kmax {
            return Err(KoopmanError::input(format!("cannot raise kmax from {} to {kmax}", self.grid.kmax)));
        }
        let grid = WavevectorGrid::new(self.grid.dims, kmax)?;
        let coeffs = grid.vectors().iter().map(|k| self.coeffs[self.grid.index_of(k).expect("subgrid")]).collect();
        Ok(EmpiricalMeasureCoeffs { grid, coeffs, x0: self.x0.clone(), n: self.n })
    }

    pub fn kmax(&self) -> i32 {
        self.grid.kmax
    }

    pub fn dims(&self) -> usize {
        self.grid.dims
    }
}

/// Running harmonic coefficients over a wavevector grid.
#[derive(Debug, Clone)]
pub struct CoeffAccumulator {
    grid: WavevectorGrid,
    omega: f64,
    sums: Vec<CompensatedSum>,
    n: usize,
    /// `phasors[d][k + kmax] = e^{i2πk u_d}`.
    phasors: Vec<Vec<Complex64>>,
}

impl CoeffAccumulator {
    pub fn new(grid: WavevectorGrid, omega: f64) -> Self {
        let side = (2 * grid.kmax + 1) as usize;
        CoeffAccumulator {
            sums: vec![CompensatedSum::new(); grid.len()],
            phasors: vec![vec![Complex64::new(1.0, 0.0); side]; grid.dims],
            grid,
            omega,
            n: 0,
        }
    }

    pub fn grid(&self) -> &WavevectorGrid {
        &self.grid
    }

    pub fn count(&self) -> usize {
        self.n
    }

    /// Harmonic values `e^{i2πk·u}` at `x`, in grid order.
    pub fn harmonics(&mut self, domain: &StateDomain, x: &[f64], out: &mut Vec<Complex64>) -> Result<()> {
        domain.check_dim(x)?;
        if self.grid.dims != x.len() {
            return Err(KoopmanError::DimensionMismatch { expected: x.len(), got: self.grid.dims });
        }
        let kmax = self.grid.kmax as usize;
        for (d, row) in self.phasors.iter_mut().enumerate() {
            let u = domain.coords[d]
                .to_unit(x[d])
                .ok_or_else(|| KoopmanError::input(format!("coordinate {d} is not periodic")))?;
            for k in 1..=kmax {
                let z = cis_turns((k as f64 * u).fract());
                row[kmax + k] = z;
                row[kmax - k] = z.conj();
            }
        }
        out.clear();
        for k in self.grid.vectors() {
            let mut z = Complex64::new(1.0, 0.0);
            for (d, &kd) in k.iter().enumerate() {
                if kd != 0 {
                    z *= self.phasors[d][(kd + self.grid.kmax) as usize];
                }
            }
            out.push(z);
        }
        Ok(())
    }

    /// Adds precomputed harmonic values for the next orbit point.
    pub fn push_values(&mut self, values: &[Complex64]) {
        let w = demodulation(self.omega, self.n);
        if self.omega == 0.0 {
            for (s, v) in self.sums.iter_mut().zip(values) {
                s.add(*v);
            }
        } else {
            for (s, v) in self.sums.iter_mut().zip(values) {
                s.add(v * w);
            }
        }
        self.n += 1;
    }

    pub fn push(&mut self, domain: &StateDomain, x: &[f64], scratch: &mut Vec<Complex64>) -> Result<()> {
        self.harmonics(domain, x, scratch)?;
        self.push_values(scratch);
        Ok(())
    }

    pub fn coeffs(&self) -> Vec<Complex64> {
        let n = self.n.max(1) as f64;
        self.sums.iter().map(|s| s.value() / n).collect()
    }

    pub fn coeff(&self, i: usize) -> Complex64 {
        self.sums[i].value() / self.n.max(1) as f64
    }

    /// Coefficients that would result from pushing `values` next, without
    /// changing the accumulator.
    pub fn preview(&self, values: &[Complex64]) -> Vec<Complex64> {
        let w = demodulation(self.omega, self.n);
        let n = (self.n + 1) as f64;
        self.sums.iter().zip(values).map(|(s, v)| (s.value() + v * w) / n).collect()
    }

    /// Pools another accumulator over the same grid into this one.
    pub fn merge(&mut self, other: &CoeffAccumulator) -> Result<()> {
        if self.grid != other.grid || self.omega != other.omega {
            return Err(KoopmanError::input("cannot pool accumulators over different grids or frequencies"));
        }
        for (s, o) in self.sums.iter_mut().zip(&other.sums) {
            s.add(o.value());
        }
        self.n += other.n;
        Ok(())
    }
}

fn check_harmonic_domain(domain: &StateDomain) -> Result<()> {
    if let Some(d) = domain.coords.iter().position(|c| c.extent().is_none()) {
        return Err(KoopmanError::input(format!("empirical coefficients need periodic coordinates; coordinate {d} is unbounded")));
    }
    Ok(())
}

/// Empirical-measure coefficients at frequency `omega`; `omega = 0` gives
/// the ergodic coefficients `(1/N) Σ e^{i2πk·Tⁿx0}`.
pub fn fourier_coeffs(system: &MapSystem, x0: &[f64], n: usize, grid: &WavevectorGrid, omega: f64) -> Result<EmpiricalMeasureCoeffs> {
    if n == 0 {
        return Err(KoopmanError::input("horizon must be at least 1"));
    }
    check_harmonic_domain(&system.domain)?;
    system.domain.check_dim(x0)?;
    let mut acc = CoeffAccumulator::new(grid.clone(), omega);
    let mut scratch = Vec::with_capacity(grid.len());
    let mut x = x0.to_vec();
    system.domain.wrap(&mut x);
    for step in 0..n {
        acc.push(&system.domain, &x, &mut scratch)?;
        if step + 1 < n {
            system.advance(&mut x).map_err(|e| crate::dynamics::relabel_step(e, step + 1))?;
        }
    }
    Ok(EmpiricalMeasureCoeffs { grid: grid.clone(), coeffs: acc.coeffs(), x0: x0.to_vec(), n })
}

/// Ergodic coefficients over the `[−kmax, kmax]^D` grid.
pub fn empirical_coeffs(system: &MapSystem, x0: &[f64], n: usize, kmax: i32) -> Result<EmpiricalMeasureCoeffs> {
    let grid = WavevectorGrid::new(system.dim(), kmax)?;
    fourier_coeffs(system, x0, n, &grid, 0.0)
}

/// Outcome of the adaptive horizon control.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub n_used: usize,
    /// Largest change observed within the last completed window.
    pub final_delta: f64,
    pub converged: bool,
    /// `(n, delta)` at every window end.
    pub history: Vec<(usize, f64)>,
}

/// Resumable adaptive averaging of harmonic coefficients.
///
/// Windows end at multiples of `checkpoint`. Within a window every running
/// coefficient is compared against its value at the window start (for the
/// first window, after the first orbit point); the window passes when the
/// largest deviation seen stays below `tol`. The run stops at the first
/// passing window or at the iteration cap.
#[derive(Debug, Clone)]
pub struct AdaptiveAverager {
    acc: CoeffAccumulator,
    x: Vec<f64>,
    x0: Vec<f64>,
    tol: f64,
    checkpoint: usize,
    anchor: Vec<Complex64>,
    window_max: f64,
    history: Vec<(usize, f64)>,
    converged: bool,
    scratch: Vec<Complex64>,
}

impl AdaptiveAverager {
    pub fn new(system: &MapSystem, x0: &[f64], grid: WavevectorGrid, tol: f64, checkpoint: usize) -> Result<Self> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(KoopmanError::input("tol must be positive"));
        }
        if checkpoint == 0 {
            return Err(KoopmanError::input("checkpoint must be at least 1"));
        }
        check_harmonic_domain(&system.domain)?;
        system.domain.check_dim(x0)?;
        let mut x = x0.to_vec();
        system.domain.wrap(&mut x);
        let len = grid.len();
        Ok(AdaptiveAverager {
            acc: CoeffAccumulator::new(grid, 0.0),
            x,
            x0: x0.to_vec(),
            tol,
            checkpoint,
            anchor: Vec::new(),
            window_max: 0.0,
            history: Vec::new(),
            converged: false,
            scratch: Vec::with_capacity(len),
        })
    }

    pub fn count(&self) -> usize {
        self.acc.count()
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Continues until convergence or until `n_max` orbit points have been
    /// averaged. Calling again with a larger cap resumes where it stopped.
    pub fn run(&mut self, system: &MapSystem, n_max: usize) -> Result<()> {
        let domain = &system.domain;
        while !self.converged && self.acc.count() < n_max {
            let n = self.acc.count();
            if n > 0 {
                system.advance(&mut self.x).map_err(|e| crate::dynamics::relabel_step(e, n))?;
            }
            self.acc.push(domain, &self.x, &mut self.scratch)?;
            let n = self.acc.count();
            if n == 1 {
                self.anchor = self.acc.coeffs();
                continue;
            }
            let delta = self
                .anchor
                .iter()
                .enumerate()
                .map(|(i, a)| (self.acc.coeff(i) - a).norm())
                .fold(0.0, f64::max);
            self.window_max = self.window_max.max(delta);
            if n.is_multiple_of(self.checkpoint) {
                self.history.push((n, self.window_max));
                if self.window_max < self.tol {
                    self.converged = true;
                } else {
                    self.anchor = self.acc.coeffs();
                    self.window_max = 0.0;
                }
            }
        }
        Ok(())
    }

    pub fn coeffs(&self) -> EmpiricalMeasureCoeffs {
        EmpiricalMeasureCoeffs { grid: self.acc.grid().clone(), coeffs: self.acc.coeffs(), x0: self.x0.clone(), n: self.acc.count() }
    }

    pub fn report(&self) -> ConvergenceReport {
        ConvergenceReport {
            n_used: self.acc.count(),
            final_delta: self.history.last().map(|h| h.1).unwrap_or(self.window_max),
            converged: self.converged,
            history: self.history.clone(),
        }
    }
}

/// Adaptive averaging of the harmonic grid from `x0`; see [`AdaptiveAverager`].
pub fn adaptive_average(
    system: &MapSystem,
    grid: &WavevectorGrid,
    x0: &[f64],
    tol: f64,
    checkpoint: usize,
    n_max: usize,
) -> Result<(EmpiricalMeasureCoeffs, ConvergenceReport)> {
    if n_max < checkpoint {
        return Err(KoopmanError::input("n_max must be at least the checkpoint window"));
    }
    let mut avg = AdaptiveAverager::new(system, x0, grid.clone(), tol, checkpoint)?;
    avg.run(system, n_max)?;
    Ok((avg.coeffs(), avg.report()))
}

/// Smallest `N` such that the running harmonic averages stay within `tol`
/// of their values at `n_ref` for every horizon from `N` to `n_ref`.
pub fn reference_convergence_time(system: &MapSystem, grid: &WavevectorGrid, x0: &[f64], n_ref: usize, tol: f64) -> Result<usize> {
    let reference = fourier_coeffs(system, x0, n_ref, grid, 0.0)?.coeffs;
    let mut acc = CoeffAccumulator::new(grid.clone(), 0.0);
    let mut scratch = Vec::with_capacity(grid.len());
    let mut x = x0.to_vec();
    system.domain.wrap(&mut x);
    let mut last_bad = 0;
    for n in 1..=n_ref {
        if n > 1 {
            system.advance(&mut x).map_err(|e| crate::dynamics::relabel_step(e, n - 1))?;
        }
        acc.push(&system.domain, &x, &mut scratch)?;
        let delta = reference.iter().enumerate().map(|(i, r)| (acc.coeff(i) - r).norm()).fold(0.0, f64::max);
        if delta >= tol {
            last_bad = n;
        }
    }
    Ok((last_bad + 1).min(n_ref))
}

/// Fitted convergence rate of an ergodic average.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeEstimate {
    /// Least-squares slope of `log error` against `log N`, or `−∞` when the
    /// average is exact at some horizon.
    pub slope: f64,
    pub exact: bool,
    /// `(N, max_i |A_N f_i − A_{N_ref} f_i|)`.
    pub errors: Vec<(usize, f64)>,
}

/// Slope of the ergodic-average error against the horizon, measured
/// against the average at `n_ref`.
pub fn convergence_slope(system: &MapSystem, obs: &Observable, x0: &[f64], n_list: &[usize], n_ref: usize) -> Result<SlopeEstimate> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] == 0 {
        return Err(KoopmanError::input("horizons must be positive and strictly increasing"));
    }
    if n_ref <= *n_list.last().unwrap() {
        return Err(KoopmanError::input("reference horizon must exceed every listed horizon"));
    }
    system.domain.check_dim(x0)?;
    let mut avg = ObservableAverager::new(obs.clone(), 0.0);
    let mut x = x0.to_vec();
    system.domain.wrap(&mut x);
    let mut snapshots = Vec::with_capacity(n_list.len());
    let mut next = 0;
    for n in 1..=n_ref {
        if n > 1 {
            system.advance(&mut x).map_err(|e| crate::dynamics::relabel_step(e, n - 1))?;
        }
        avg.push(&system.domain, &x)?;
        if next < n_list.len() && n == n_list[next] {
            snapshots.push(avg.average());
            next += 1;
        }
    }
    let reference = avg.average();
    let errors: Vec<(usize, f64)> = n_list
        .iter()
        .zip(&snapshots)
        .map(|(&n, a)| (n, a.iter().zip(&reference).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max)))
        .collect();
    if errors.iter().any(|e| e.1 == 0.0) {
        return Ok(SlopeEstimate { slope: f64::NEG_INFINITY, exact: true, errors });
    }
    let lx: Vec<f64> = errors.iter().map(|e| (e.0 as f64).ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.1.ln()).collect();
    Ok(SlopeEstimate { slope: linear_slope(&lx, &ly), exact: false, errors })
}

/// Rectangular seed grid: `counts.1` rows along the second axis, each with
/// `counts.0` points along the first axis, endpoints included. Seeds are
/// listed row by row.
pub fn seed_grid(x_range: (f64, f64), p_range: (f64, f64), counts: (usize, usize)) -> Result<Vec<Vec<f64>>> {
    if counts.0 == 0 || counts.1 == 0 {
        return Err(KoopmanError::input("seed grid counts must be positive"));
    }
    let axis = |(lo, hi): (f64, f64), n: usize, i: usize| {
        if n == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let mut seeds = Vec::with_capacity(counts.0 * counts.1);
    for j in 0..counts.1 {
        for i in 0..counts.0 {
            seeds.push(vec![axis(x_range, counts.0, i), axis(p_range, counts.1, j)]);
        }
    }
    Ok(seeds)
}

/// Applies `f` to every seed on the rayon pool; results keep seed order.
pub fn map_seeds<T, F>(seeds: &[Vec<f64>], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[f64]) -> Result<T> + Sync,
{
    seeds.par_iter().map(|s| f(s)).collect()
}
