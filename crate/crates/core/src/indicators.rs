//! Ergodicity and mixing indicators on the unit torus, plus a greedy
//! coverage controller driven by the ergodicity proxy.
//!
//! The proxy compares running empirical coefficients with a target measure
//! in a negative Sobolev norm. The ball oracle evaluates the defining
//! double integral over balls directly, by counting residence and
//! integrating the target density, with no Fourier machinery involved.
//!
//! The coverage controller is a one-step lookahead over a finite set of
//! headings. It is inspired by, not a reproduction of, feedback laws that
//! minimise the same metric over a continuous control set.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::averaging::{CoeffAccumulator, EmpiricalMeasureCoeffs};
use crate::dynamics::StateDomain;
use crate::error::{KoopmanError, Result};
use crate::observables::{cis_turns, WavevectorGrid};
use crate::quotient::{weighted_distance, SobolevIndex};

/// Candidates whose proxy is within this of the best one count as tied.
pub const TIE_TOL: f64 = 1e-12;
/// Image terms of a wrapped gaussian below this are dropped.
const IMAGE_TOL: f64 = 1e-12;
/// Quadrature cells per axis for ball measures of non-uniform densities.
const BALL_QUADRATURE_2D: usize = 128;
const BALL_QUADRATURE_1D: usize = 4096;

/// Probability density on the unit torus `[0, 1)^D`.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetDensity {
    Uniform { dims: usize },
    /// Isotropic gaussian wrapped onto the torus.
    WrappedGaussian { center: Vec<f64>, sigma: f64 },
    /// Cell-averaged values on a regular grid, row-major with the last axis
    /// fastest. Need not be normalized.
    Grid { shape: Vec<usize>, values: Vec<f64> },
}

impl TargetDensity {
    pub fn uniform(dims: usize) -> Self {
        TargetDensity::Uniform { dims }
    }

    pub fn wrapped_gaussian(center: Vec<f64>, sigma: f64) -> Result<Self> {
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(KoopmanError::input("gaussian center must be finite and nonempty"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(KoopmanError::input("gaussian width must be positive"));
        }
        Ok(TargetDensity::WrappedGaussian { center: center.iter().map(|c| c.rem_euclid(1.0)).collect(), sigma })
    }

    pub fn grid(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(KoopmanError::input("density grid shape must be nonempty"));
        }
        let len: usize = shape.iter().product();
        if values.len() != len {
            return Err(KoopmanError::DimensionMismatch { expected: len, got: values.len() });
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(KoopmanError::input("density values must be finite and nonnegative"));
        }
        if values.iter().sum::<f64>() <= 0.0 {
            return Err(KoopmanError::input("density grid has zero mass"));
        }
        Ok(TargetDensity::Grid { shape, values })
    }

    pub fn dims(&self) -> usize {
        match self {
            TargetDensity::Uniform { dims } => *dims,
            TargetDensity::WrappedGaussian { center, .. } => center.len(),
            TargetDensity::Grid { shape, .. } => shape.len(),
        }
    }

    /// Density at `u` in unit coordinates.
    pub fn eval(&self, u: &[f64]) -> f64 {
        match self {
            TargetDensity::Uniform { .. } => 1.0,
            TargetDensity::WrappedGaussian { center, sigma } => {
                center.iter().zip(u).map(|(c, x)| wrapped_gaussian_1d(x - c, *sigma)).product()
            }
            TargetDensity::Grid { shape, values } => {
                let total: f64 = values.iter().sum();
                let mut idx = 0;
                for (n, x) in shape.iter().zip(u) {
                    let i = ((x.rem_euclid(1.0) * *n as f64) as usize).min(n - 1);
                    idx = idx * n + i;
                }
                let cells: usize = shape.iter().product();
                values[idx] * cells as f64 / total
            }
        }
    }

    fn description(&self) -> String {
        match self {
            TargetDensity::Uniform { dims } => format!("uniform on the {dims}-torus"),
            TargetDensity::WrappedGaussian { center, sigma } => {
                format!("wrapped gaussian, center {center:?}, sigma {sigma}")
            }
            TargetDensity::Grid { shape, .. } => format!("density grid {shape:?}"),
        }
    }

    /// Cell centers and probability masses used for ball quadrature.
    fn quadrature(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let shape = match self {
            TargetDensity::Grid { shape, .. } => shape.clone(),
            _ => {
                let side = if self.dims() == 1 { BALL_QUADRATURE_1D } else { BALL_QUADRATURE_2D };
                vec![side; self.dims()]
            }
        };
        let centers = cell_centers(&shape);
        let mut masses: Vec<f64> = match self {
            TargetDensity::Grid { values, .. } => values.clone(),
            _ => centers.iter().map(|u| self.eval(u)).collect(),
        };
        let total: f64 = masses.iter().sum();
        masses.iter_mut().for_each(|m| *m /= total);
        (centers, masses)
    }
}

/// One-dimensional gaussian of width `sigma` wrapped onto the unit circle.
fn wrapped_gaussian_1d(x: f64, sigma: f64) -> f64 {
    let x = x.rem_euclid(1.0);
    let norm = 1.0 / (sigma * (2.0 * PI).sqrt());
    let term = |m: f64| norm * (-(x - m) * (x - m) / (2.0 * sigma * sigma)).exp();
    let mut total = term(0.0) + term(1.0);
    let mut m = 1.0;
    loop {
        let t = term(-m) + term(m + 1.0);
        total += t;
        if t < IMAGE_TOL * total {
            break;
        }
        m += 1.0;
    }
    total
}

/// Cell centers of a regular grid on the unit torus, row-major.
fn cell_centers(shape: &[usize]) -> Vec<Vec<f64>> {
    let len: usize = shape.iter().product();
    (0..len)
        .map(|mut flat| {
            let mut u = vec![0.0; shape.len()];
            for d in (0..shape.len()).rev() {
                u[d] = ((flat % shape[d]) as f64 + 0.5) / shape[d] as f64;
                flat /= shape[d];
            }
            u
        })
        .collect()
}

/// Fourier coefficients `μ̂(k) = ∫ e^{i2πk·u} dμ(u)` of a target measure.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMeasure {
    pub grid: WavevectorGrid,
    pub coeffs: Vec<Complex64>,
    pub description: String,
}

impl TargetMeasure {
    pub fn uniform(grid: WavevectorGrid) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
        coeffs[grid.zero_index()] = Complex64::new(1.0, 0.0);
        let description = TargetDensity::uniform(grid.dims).description();
        TargetMeasure { grid, coeffs, description }
    }

    /// Coefficients of `density`; a grid density is transformed by summing
    /// over its cell centers.
    pub fn from_density(density: &TargetDensity, grid: WavevectorGrid) -> Result<Self> {
        if density.dims() != grid.dims {
            return Err(KoopmanError::DimensionMismatch { expected: grid.dims, got: density.dims() });
        }
        let coeffs = match density {
            TargetDensity::Uniform { .. } => return Ok(Self::uniform(grid)),
            TargetDensity::WrappedGaussian { center, sigma } => grid
                .vectors()
                .iter()
                .map(|k| {
                    let phase: f64 = k.iter().zip(center).map(|(&kd, c)| kd as f64 * c).sum();
                    let k2: f64 = k.iter().map(|&kd| (kd as f64).powi(2)).sum();
                    cis_turns(phase.rem_euclid(1.0)) * (-2.0 * PI * PI * sigma * sigma * k2).exp()
                })
                .collect(),
            TargetDensity::Grid { .. } => {
                let (centers, masses) = density.quadrature();
                let mut acc = CoeffAccumulator::new(grid.clone(), 0.0);
                let torus = StateDomain::unit_torus(grid.dims);
                let mut h = Vec::with_capacity(grid.len());
                let mut sums = vec![Complex64::new(0.0, 0.0); grid.len()];
                for (u, m) in centers.iter().zip(&masses) {
                    acc.harmonics(&torus, u, &mut h)?;
                    for (s, z) in sums.iter_mut().zip(&h) {
                        *s += z * m;
                    }
                }
                sums[grid.zero_index()] = Complex64::new(1.0, 0.0);
                sums
            }
        };
        Ok(TargetMeasure { grid, coeffs, description: density.description() })
    }

    /// Explicit coefficients; the zero coefficient must be one.
    pub fn from_coeffs(grid: WavevectorGrid, coeffs: Vec<Complex64>, description: impl Into<String>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(KoopmanError::DimensionMismatch { expected: grid.len(), got: coeffs.len() });
        }
        if (coeffs[grid.zero_index()] - 1.0).norm() > 1e-12 {
            return Err(KoopmanError::input("zero coefficient of a probability measure must be 1"));
        }
        Ok(TargetMeasure { grid, coeffs, description: description.into() })
    }

    /// The empirical measure of an orbit as a target.
    pub fn from_empirical(emp: &EmpiricalMeasureCoeffs) -> Self {
        TargetMeasure {
            grid: emp.grid.clone(),
            coeffs: emp.coeffs.clone(),
            description: format!("empirical measure of {} points from {:?}", emp.n, emp.x0),
        }
    }

    pub fn kmax(&self) -> i32 {
        self.grid.kmax
    }

    pub fn dims(&self) -> usize {
        self.grid.dims
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorKind {
    ErgodicitySobolev,
    ErgodicityBall,
    Mixing,
}

impl IndicatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            IndicatorKind::ErgodicitySobolev => "ergodicity_sobolev",
            IndicatorKind::ErgodicityBall => "ergodicity_ball",
            IndicatorKind::Mixing => "mixing",
        }
    }
}

/// Indicator values indexed by horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSeries {
    pub values: Vec<(usize, f64)>,
    pub kind: IndicatorKind,
    /// Absent for the ball oracle.
    pub s: Option<SobolevIndex>,
}

impl IndicatorSeries {
    pub fn horizons(&self) -> Vec<usize> {
        self.values.iter().map(|v| v.0).collect()
    }

    pub fn series(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.1).collect()
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().map(|v| v.1)
    }
}

fn resolve_index(s: Option<SobolevIndex>, default: SobolevIndex, kind: IndicatorKind) -> SobolevIndex {
    match s {
        Some(s) if s != default => {
            log::warn!("{} uses s = {} instead of the default {}", kind.as_str(), s.value(), default.value());
            s
        }
        Some(s) => s,
        None => default,
    }
}

fn check_checkpoints(checkpoints: &[usize], len: usize) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(KoopmanError::input("at least one checkpoint is required"));
    }
    if checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(KoopmanError::input("checkpoints must be positive and strictly increasing"));
    }
    if *checkpoints.last().unwrap() > len {
        return Err(KoopmanError::input(format!(
            "checkpoint {} exceeds trajectory length {len}",
            checkpoints.last().unwrap()
        )));
    }
    Ok(())
}

/// About `count` distinct integers spaced geometrically in `[n_min, n_max]`.
pub fn log_checkpoints(n_min: usize, n_max: usize, count: usize) -> Vec<usize> {
    let n_min = n_min.max(1);
    if count < 2 || n_max <= n_min {
        return vec![n_max.max(n_min)];
    }
    let ratio = (n_max as f64 / n_min as f64).ln() / (count - 1) as f64;
    let mut out: Vec<usize> =
        (0..count).map(|i| ((n_min as f64) * (ratio * i as f64).exp()).round() as usize).collect();
    *out.last_mut().unwrap() = n_max;
    out.dedup();
    out
}

/// Sobolev distance between running empirical coefficients of `states` and
/// `target`, evaluated at each checkpoint in one pass over the states.
/// `s` defaults to `(D + 1) / 2`.
pub fn ergodicity_sobolev(
    domain: &StateDomain,
    states: &[Vec<f64>],
    target: &TargetMeasure,
    s: Option<SobolevIndex>,
    checkpoints: &[usize],
) -> Result<IndicatorSeries> {
    if domain.dim() != target.dims() {
        return Err(KoopmanError::DimensionMismatch { expected: domain.dim(), got: target.dims() });
    }
    check_checkpoints(checkpoints, states.len())?;
    let kind = IndicatorKind::ErgodicitySobolev;
    let s = resolve_index(s, SobolevIndex::for_dims(target.dims()), kind);
    let weights = s.weights(&target.grid);
    let mut acc = CoeffAccumulator::new(target.grid.clone(), 0.0);
    let mut scratch = Vec::with_capacity(target.grid.len());
    let mut values = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    for x in states {
        acc.push(domain, x, &mut scratch)?;
        if next.peek() == Some(&&acc.count()) {
            next.next();
            values.push((acc.count(), weighted_distance(&acc.coeffs(), &target.coeffs, &weights)));
            if next.peek().is_none() {
                break;
            }
        }
    }
    Ok(IndicatorSeries { values, kind, s: Some(s) })
}

/// The same series from precomputed coefficient vectors.
pub fn ergodicity_sobolev_from_coeffs(
    running: &[EmpiricalMeasureCoeffs],
    target: &TargetMeasure,
    s: Option<SobolevIndex>,
) -> Result<IndicatorSeries> {
    let kind = IndicatorKind::ErgodicitySobolev;
    let s = resolve_index(s, SobolevIndex::for_dims(target.dims()), kind);
    let weights = s.weights(&target.grid);
    let mut values = Vec::with_capacity(running.len());
    for c in running {
        if c.grid != target.grid {
            return Err(KoopmanError::input(format!(
                "truncation mismatch: coefficients have kmax {} in {} dims, target has kmax {} in {} dims",
                c.kmax(),
                c.dims(),
                target.kmax(),
                target.dims()
            )));
        }
        if values.last().is_some_and(|&(n, _)| n >= c.n) {
            return Err(KoopmanError::input("horizons must be strictly increasing"));
        }
        values.push((c.n, weighted_distance(&c.coeffs, &target.coeffs, &weights)));
    }
    Ok(IndicatorSeries { values, kind, s: Some(s) })
}

/// Center and radius resolution of the ball oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BallQuadrature {
    /// Centers per axis.
    pub n_centers: usize,
    pub n_radii: usize,
}

impl Default for BallQuadrature {
    fn default() -> Self {
        BallQuadrature { n_centers: 32, n_radii: 32 }
    }
}

/// Area of `{x ∈ [−½, ½]²: |x| < r}`, the uniform measure of a torus ball.
pub fn torus_disk_area(r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    if r <= 0.5 {
        return PI * r * r;
    }
    if r * r >= 0.5 {
        return 1.0;
    }
    let h = 0.5;
    let segment = r * r * (h / r).acos() - h * (r * r - h * h).sqrt();
    PI * r * r - 4.0 * segment
}

fn uniform_ball_measure(dims: usize, r: f64) -> f64 {
    match dims {
        1 => (2.0 * r).min(1.0),
        _ => torus_disk_area(r),
    }
}

fn torus_distance_unit(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).rem_euclid(1.0);
            let d = d.min(1.0 - d);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Radius bin `b` such that a point at distance `d` lies in every ball of
/// radius `r_j`, `j ≥ b`, where `r_j = R (j + 1) / n_radii`.
fn radius_bin(d: f64, big_r: f64, n_radii: usize) -> Option<usize> {
    let b = (d * n_radii as f64 / big_r).floor() as usize;
    (b < n_radii).then_some(b)
}

/// Ergodicity defect evaluated directly: the mean over a grid of ball
/// centers and radii in `(0, R]`, `R = √D / 2`, of the squared difference
/// between the fraction of the first `n` states inside each ball and the
/// target measure of that ball, square-rooted. Requires `D ≤ 2` and a
/// fully periodic domain.
pub fn ergodicity_ball_oracle(
    domain: &StateDomain,
    states: &[Vec<f64>],
    density: &TargetDensity,
    quad: BallQuadrature,
    checkpoints: &[usize],
) -> Result<IndicatorSeries> {
    let dims = domain.dim();
    if !(1..=2).contains(&dims) {
        return Err(KoopmanError::input("the ball oracle supports one or two dimensions"));
    }
    if density.dims() != dims {
        return Err(KoopmanError::DimensionMismatch { expected: dims, got: density.dims() });
    }
    if quad.n_centers == 0 || quad.n_radii == 0 {
        return Err(KoopmanError::input("ball quadrature needs at least one center and radius"));
    }
    check_checkpoints(checkpoints, states.len())?;
    let to_unit = |x: &[f64]| -> Result<Vec<f64>> {
        domain.check_dim(x)?;
        x.iter()
            .zip(&domain.coords)
            .enumerate()
            .map(|(d, (v, c))| c.to_unit(*v).ok_or_else(|| KoopmanError::input(format!("coordinate {d} is not periodic"))))
            .collect()
    };

    let big_r = (dims as f64).sqrt() / 2.0;
    let n_r = quad.n_radii;
    let centers = cell_centers(&vec![quad.n_centers; dims]);
    let radii: Vec<f64> = (1..=n_r).map(|j| big_r * j as f64 / n_r as f64).collect();

    let measures: Vec<Vec<f64>> = match density {
        TargetDensity::Uniform { .. } => {
            let row: Vec<f64> = radii.iter().map(|&r| uniform_ball_measure(dims, r)).collect();
            vec![row; centers.len()]
        }
        _ => {
            let (cells, masses) = density.quadrature();
            centers
                .par_iter()
                .map(|p| {
                    let mut hist = vec![0.0; n_r];
                    for (u, m) in cells.iter().zip(&masses) {
                        if let Some(b) = radius_bin(torus_distance_unit(p, u), big_r, n_r) {
                            hist[b] += m;
                        }
                    }
                    cumulative(&hist)
                })
                .collect()
        }
    };

    let weight = 1.0 / (centers.len() * n_r) as f64;
    let mut hist = vec![vec![0.0f64; n_r]; centers.len()];
    let mut values = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    for (i, x) in states.iter().enumerate() {
        let u = to_unit(x)?;
        for (h, p) in hist.iter_mut().zip(&centers) {
            if let Some(b) = radius_bin(torus_distance_unit(p, &u), big_r, n_r) {
                h[b] += 1.0;
            }
        }
        let n = i + 1;
        if next.peek() == Some(&&n) {
            next.next();
            let total: f64 = hist
                .iter()
                .zip(&measures)
                .map(|(h, mu)| {
                    cumulative(h).iter().zip(mu).map(|(c, m)| (c / n as f64 - m).powi(2)).sum::<f64>()
                })
                .sum();
            values.push((n, (total * weight).sqrt()));
            if next.peek().is_none() {
                break;
            }
        }
    }
    Ok(IndicatorSeries { values, kind: IndicatorKind::ErgodicityBall, s: None })
}

fn cumulative(hist: &[f64]) -> Vec<f64> {
    hist.iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// Sobolev distance of each instantaneous coefficient vector to the target;
/// entry `n` of the series is history element `n`. `s` defaults to `1/2`.
pub fn mixing_norm(history: &[Vec<Complex64>], target: &TargetMeasure, s: Option<SobolevIndex>) -> Result<IndicatorSeries> {
    let kind = IndicatorKind::Mixing;
    let s = resolve_index(s, SobolevIndex::new(0.5).expect("positive"), kind);
    let weights = s.weights(&target.grid);
    let values = history
        .iter()
        .enumerate()
        .map(|(n, c)| {
            if c.len() != target.coeffs.len() {
                return Err(KoopmanError::input(format!(
                    "truncation mismatch at step {n}: {} coefficients, target has {}",
                    c.len(),
                    target.coeffs.len()
                )));
            }
            Ok((n, weighted_distance(c, &target.coeffs, &weights)))
        })
        .collect::<Result<_>>()?;
    Ok(IndicatorSeries { values, kind, s: Some(s) })
}

/// A point agent moving at constant speed on a two-dimensional torus.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub position: Vec<f64>,
    pub speed: f64,
}

impl Agent {
    /// Position after moving for `dt` along `heading` (radians).
    pub fn moved(&self, domain: &StateDomain, heading: f64, dt: f64) -> Vec<f64> {
        let step = self.speed * dt;
        let mut x = vec![self.position[0] + step * heading.cos(), self.position[1] + step * heading.sin()];
        domain.wrap(&mut x);
        x
    }
}

/// Proxy value after a virtual step along each heading, in control order.
pub fn candidate_proxies(
    agent: &Agent,
    running: &CoeffAccumulator,
    domain: &StateDomain,
    target: &TargetMeasure,
    controls: &[f64],
    dt: f64,
    s: SobolevIndex,
) -> Result<Vec<f64>> {
    let weights = s.weights(&target.grid);
    controls
        .par_iter()
        .map(|&heading| {
            let x = agent.moved(domain, heading, dt);
            let mut probe = CoeffAccumulator::new(running.grid().clone(), 0.0);
            let mut h = Vec::with_capacity(target.grid.len());
            probe.harmonics(domain, &x, &mut h)?;
            Ok(weighted_distance(&running.preview(&h), &target.coeffs, &weights))
        })
        .collect()
}

/// Lowest index whose value is within [`TIE_TOL`] of the minimum.
fn argmin_lowest(values: &[f64]) -> usize {
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    values.iter().position(|&v| v <= best + TIE_TOL).unwrap_or(0)
}

/// One greedy coverage step. Agents are processed in order; each picks the
/// heading that minimises the ergodicity proxy of the pooled history after
/// its move, then moves and is added to `running` before the next agent
/// chooses. Returns the chosen control indices.
pub fn greedy_coverage_step(
    agents: &mut [Agent],
    running: &mut CoeffAccumulator,
    domain: &StateDomain,
    target: &TargetMeasure,
    controls: &[f64],
    dt: f64,
    s: Option<SobolevIndex>,
) -> Result<Vec<usize>> {
    check_coverage_inputs(agents, running, domain, target, controls, dt)?;
    let s = resolve_index(s, SobolevIndex::for_dims(2), IndicatorKind::ErgodicitySobolev);
    let mut scratch = Vec::with_capacity(target.grid.len());
    let mut chosen = Vec::with_capacity(agents.len());
    for agent in agents.iter_mut() {
        let proxies = candidate_proxies(agent, running, domain, target, controls, dt, s)?;
        let best = argmin_lowest(&proxies);
        agent.position = agent.moved(domain, controls[best], dt);
        running.push(domain, &agent.position, &mut scratch)?;
        chosen.push(best);
    }
    Ok(chosen)
}

fn check_coverage_inputs(
    agents: &[Agent],
    running: &CoeffAccumulator,
    domain: &StateDomain,
    target: &TargetMeasure,
    controls: &[f64],
    dt: f64,
) -> Result<()> {
    if controls.is_empty() || controls.iter().any(|c| !c.is_finite()) {
        return Err(KoopmanError::input("control set must be nonempty and finite"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(KoopmanError::input("time step must be positive"));
    }
    if domain.dim() != 2 || !domain.coords.iter().all(|c| c.is_periodic()) {
        return Err(KoopmanError::input("coverage runs on a two-dimensional torus"));
    }
    if running.grid() != &target.grid {
        return Err(KoopmanError::input("running coefficients and target use different truncations"));
    }
    for a in agents {
        domain.check_dim(&a.position)?;
        if !(a.speed.is_finite() && a.speed >= 0.0) {
            return Err(KoopmanError::input("agent speed must be finite and nonnegative"));
        }
    }
    Ok(())
}

/// Result of a multi-step coverage run.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRun {
    /// `paths[a][t]` is agent `a` after `t` steps.
    pub paths: Vec<Vec<Vec<f64>>>,
    pub headings: Vec<Vec<usize>>,
    /// Proxy of the pooled history after each step (step 0: start points).
    pub proxy: IndicatorSeries,
}

/// Runs `steps` greedy steps from the agents' current positions, which
/// seed the pooled history.
pub fn coverage_rollout(
    agents: &[Agent],
    domain: &StateDomain,
    target: &TargetMeasure,
    controls: &[f64],
    dt: f64,
    steps: usize,
    s: Option<SobolevIndex>,
) -> Result<CoverageRun> {
    if agents.is_empty() {
        return Err(KoopmanError::input("at least one agent is required"));
    }
    let mut running = CoeffAccumulator::new(target.grid.clone(), 0.0);
    check_coverage_inputs(agents, &running, domain, target, controls, dt)?;
    let s = resolve_index(s, SobolevIndex::for_dims(2), IndicatorKind::ErgodicitySobolev);
    let weights = s.weights(&target.grid);
    let mut agents = agents.to_vec();
    let mut scratch = Vec::new();
    for a in &mut agents {
        domain.wrap(&mut a.position);
        running.push(domain, &a.position, &mut scratch)?;
    }
    let mut paths: Vec<Vec<Vec<f64>>> = agents.iter().map(|a| vec![a.position.clone()]).collect();
    let mut values = vec![(0, weighted_distance(&running.coeffs(), &target.coeffs, &weights))];
    let mut headings = Vec::with_capacity(steps);
    for t in 1..=steps {
        headings.push(greedy_coverage_step(&mut agents, &mut running, domain, target, controls, dt, Some(s))?);
        for (p, a) in paths.iter_mut().zip(&agents) {
            p.push(a.position.clone());
        }
        values.push((t, weighted_distance(&running.coeffs(), &target.coeffs, &weights)));
    }
    Ok(CoverageRun { paths, headings, proxy: IndicatorSeries { values, kind: IndicatorKind::ErgodicitySobolev, s: Some(s) } })
}

/// Evenly spaced headings `2πj / count`.
pub fn compass_headings(count: usize) -> Vec<f64> {
    (0..count).map(|j| 2.0 * PI * j as f64 / count as f64).collect()
}
