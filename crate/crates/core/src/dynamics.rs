//! Reference dynamical systems and the trajectories they generate.
//!
//! Discrete maps live in [`MapSystem`], continuous flows in [`FlowSystem`].
//! Flows are sampled with a classical fixed-step fourth-order Runge–Kutta
//! scheme; [`poincare_section`] turns a periodically forced flow into a map.
//!
//! Coordinate conventions:
//! * the standard map lives on `[0,1)²` and uses `sin(2πx)` for its kick;
//! * circle rotation lives on `[0,1)`;
//! * the kicked torus × ℤ₃ system uses radians on `[0,2π)²` and `{0,1,2}`
//!   for the group coordinate;
//! * Hill's vortex uses `(R, z, θ)` with `θ ∈ [0,2π)`.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{KoopmanError, Result};

const TWO_PI: f64 = 2.0 * PI;
const MAX_FLOW_DIM: usize = 3;

/// Per-coordinate descriptor of a state space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coordinate {
    /// Circle coordinate, reported in `[0, period)`.
    Periodic { period: f64 },
    /// Real coordinate known to stay inside `[lo, hi]`. Never wrapped, but
    /// harmonic observables may use the window as their fundamental period.
    Interval { lo: f64, hi: f64 },
    /// Unbounded real coordinate.
    Unbounded,
}

impl Coordinate {
    pub fn wrap(&self, x: f64) -> f64 {
        match *self {
            Coordinate::Periodic { period } => {
                let r = x.rem_euclid(period);
                // rem_euclid can round up to `period` for tiny negative inputs
                if r >= period {
                    0.0
                } else {
                    r
                }
            }
            _ => x,
        }
    }

    /// Maps the coordinate onto the unit interval used by harmonics.
    pub fn to_unit(&self, x: f64) -> Option<f64> {
        match *self {
            Coordinate::Periodic { period } => Some(x / period),
            Coordinate::Interval { lo, hi } => Some((x - lo) / (hi - lo)),
            Coordinate::Unbounded => None,
        }
    }

    /// Length of the fundamental cell; `None` for unbounded coordinates.
    pub fn extent(&self) -> Option<f64> {
        match *self {
            Coordinate::Periodic { period } => Some(period),
            Coordinate::Interval { lo, hi } => Some(hi - lo),
            Coordinate::Unbounded => None,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Coordinate::Periodic { .. })
    }
}

/// Ordered list of coordinate descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDomain {
    pub coords: Vec<Coordinate>,
}

impl StateDomain {
    pub fn new(coords: Vec<Coordinate>) -> Self {
        StateDomain { coords }
    }

    /// `dim` copies of the unit circle.
    pub fn unit_torus(dim: usize) -> Self {
        StateDomain::new(vec![Coordinate::Periodic { period: 1.0 }; dim])
    }

    pub fn unbounded(dim: usize) -> Self {
        StateDomain::new(vec![Coordinate::Unbounded; dim])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn wrap(&self, x: &mut [f64]) {
        for (xi, c) in x.iter_mut().zip(&self.coords) {
            *xi = c.wrap(*xi);
        }
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(KoopmanError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// Euclidean distance with the shortest periodic image on periodic axes.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.coords)
            .map(|((x, y), c)| {
                let mut d = (x - y).abs();
                if let Coordinate::Periodic { period } = *c {
                    d = d.rem_euclid(period);
                    d = d.min(period - d);
                }
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Ordered sequence of states sampled from a system.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    /// Sampling interval; 1 for maps.
    pub dt: f64,
    pub x0: Vec<f64>,
    pub system_id: String,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one state")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlowKind {
    /// `ṗ₁ = p₂, ṗ₂ = −ω² p₁`.
    HarmonicOscillator { omega: f64 },
    /// Hamiltonian `H = p²/2 − k(q²/2 − b q⁴/4)`.
    DoubleWell { k: f64, b: f64 },
    /// Hill's spherical vortex with swirl `c`, forced by `ε sin(2πt)`.
    HillVortex { swirl: f64, forcing: f64 },
}

/// Continuous-time system `ẋ = A(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSystem {
    pub kind: FlowKind,
    pub domain: StateDomain,
}

impl FlowSystem {
    pub fn harmonic_oscillator(omega: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(KoopmanError::input("oscillator frequency must be positive"));
        }
        Ok(FlowSystem { kind: FlowKind::HarmonicOscillator { omega }, domain: StateDomain::unbounded(2) })
    }

    pub fn double_well(k: f64, b: f64) -> Result<Self> {
        if !(k.is_finite() && b.is_finite() && k > 0.0 && b > 0.0) {
            return Err(KoopmanError::input("double-well parameters k, b must be positive"));
        }
        Ok(FlowSystem { kind: FlowKind::DoubleWell { k, b }, domain: StateDomain::unbounded(2) })
    }

    pub fn hill_vortex(swirl: f64, forcing: f64) -> Result<Self> {
        if !(swirl.is_finite() && forcing.is_finite()) {
            return Err(KoopmanError::input("Hill's vortex parameters must be finite"));
        }
        let domain = StateDomain::new(vec![
            Coordinate::Unbounded,
            Coordinate::Unbounded,
            Coordinate::Periodic { period: TWO_PI },
        ]);
        Ok(FlowSystem { kind: FlowKind::HillVortex { swirl, forcing }, domain })
    }

    /// Replaces the coordinate descriptors, e.g. to declare an analysis
    /// window for an otherwise unbounded coordinate.
    pub fn with_domain(mut self, domain: StateDomain) -> Result<Self> {
        if domain.dim() != self.dim() {
            return Err(KoopmanError::DimensionMismatch { expected: self.dim(), got: domain.dim() });
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            FlowKind::HarmonicOscillator { .. } | FlowKind::DoubleWell { .. } => 2,
            FlowKind::HillVortex { .. } => 3,
        }
    }

    pub fn time_dependent(&self) -> bool {
        matches!(self.kind, FlowKind::HillVortex { .. })
    }

    /// Forcing period of a time-dependent flow.
    pub fn period(&self) -> Option<f64> {
        match self.kind {
            FlowKind::HillVortex { .. } => Some(1.0),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match self.kind {
            FlowKind::HarmonicOscillator { omega } => format!("harmonic_oscillator(omega={omega})"),
            FlowKind::DoubleWell { k, b } => format!("double_well(k={k},b={b})"),
            FlowKind::HillVortex { swirl, forcing } => format!("hill_vortex(c={swirl},eps={forcing})"),
        }
    }

    /// Evaluates the vector field. Fails outside the domain of definition
    /// (Hill's vortex requires `R > 0`).
    pub fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) -> std::result::Result<(), String> {
        match self.kind {
            FlowKind::HarmonicOscillator { omega } => {
                dx[0] = x[1];
                dx[1] = -omega * omega * x[0];
            }
            FlowKind::DoubleWell { k, b } => {
                dx[0] = x[1];
                dx[1] = k * (x[0] - b * x[0] * x[0] * x[0]);
            }
            FlowKind::HillVortex { swirl, forcing } => {
                let (r, z, theta) = (x[0], x[1], x[2]);
                if r.is_nan() || r <= 0.0 {
                    return Err(format!("Hill's vortex left the half-space R > 0 (R = {r})"));
                }
                let root = (2.0 * r).sqrt();
                let drive = forcing * (TWO_PI * t).sin();
                let (s, c) = theta.sin_cos();
                dx[0] = 2.0 * r * z + drive * root * s;
                dx[1] = 1.0 - 4.0 * r - z * z + drive * z / root * s;
                dx[2] = swirl / (2.0 * r) + drive * 2.0 * c;
            }
        }
        Ok(())
    }

    /// Conserved energy of the Hamiltonian built-ins.
    pub fn hamiltonian(&self, x: &[f64]) -> Option<f64> {
        match self.kind {
            FlowKind::HarmonicOscillator { omega } => Some(0.5 * x[1] * x[1] + 0.5 * omega * omega * x[0] * x[0]),
            FlowKind::DoubleWell { k, b } => {
                let q = x[0];
                Some(0.5 * x[1] * x[1] - k * (0.5 * q * q - 0.25 * b * q * q * q * q))
            }
            FlowKind::HillVortex { .. } => None,
        }
    }

    /// Stokes streamfunction `ψ = R(z² + 2R − 1)` of the unforced vortex;
    /// constant along unforced trajectories.
    pub fn streamfunction(&self, x: &[f64]) -> Option<f64> {
        match self.kind {
            FlowKind::HillVortex { .. } => Some(x[0] * (x[1] * x[1] + 2.0 * x[0] - 1.0)),
            _ => None,
        }
    }

    /// One RK4 step of size `dt` starting at time `t`, in place.
    fn rk4_step(&self, t: f64, dt: f64, x: &mut [f64]) -> std::result::Result<(), String> {
        let n = x.len();
        let mut k1 = [0.0; MAX_FLOW_DIM];
        let mut k2 = [0.0; MAX_FLOW_DIM];
        let mut k3 = [0.0; MAX_FLOW_DIM];
        let mut k4 = [0.0; MAX_FLOW_DIM];
        let mut tmp = [0.0; MAX_FLOW_DIM];

        self.rhs(t, x, &mut k1[..n])?;
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        self.rhs(t + 0.5 * dt, &tmp[..n], &mut k2[..n])?;
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        self.rhs(t + 0.5 * dt, &tmp[..n], &mut k3[..n])?;
        for i in 0..n {
            tmp[i] = x[i] + dt * k3[i];
        }
        self.rhs(t + dt, &tmp[..n], &mut k4[..n])?;
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        self.domain.wrap(x);
        if x.iter().any(|v| !v.is_finite()) {
            return Err("non-finite state".to_string());
        }
        Ok(())
    }

    /// Advances `x` in place by `n_steps` RK4 steps of size `dt` from time `t0`.
    pub fn advance(&self, t0: f64, dt: f64, n_steps: usize, x: &mut [f64]) -> Result<()> {
        for i in 0..n_steps {
            let t = t0 + i as f64 * dt;
            self.rk4_step(t, dt, x)
                .map_err(|reason| KoopmanError::Divergence { step: i + 1, reason })?;
        }
        Ok(())
    }
}

/// Fixed-step RK4 sampling of a flow: `n_steps + 1` states spaced by `dt`,
/// starting at time zero.
pub fn integrate_flow(system: &FlowSystem, x0: &[f64], dt: f64, n_steps: usize) -> Result<Trajectory> {
    system.domain.check_dim(x0)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(KoopmanError::input("time step must be positive"));
    }
    if n_steps == 0 {
        return Err(KoopmanError::input("n_steps must be at least 1"));
    }
    let mut x = x0.to_vec();
    system.domain.wrap(&mut x);
    if let FlowKind::HillVortex { .. } = system.kind {
        if x[0].is_nan() || x[0] <= 0.0 {
            return Err(KoopmanError::Divergence { step: 0, reason: "initial R must be positive".into() });
        }
    }
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(x.clone());
    for i in 0..n_steps {
        system
            .rk4_step(i as f64 * dt, dt, &mut x)
            .map_err(|reason| KoopmanError::Divergence { step: i + 1, reason })?;
        states.push(x.clone());
    }
    Ok(Trajectory { states, dt, x0: x0.to_vec(), system_id: system.name() })
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapKind {
    /// Chirikov standard map on `[0,1)²`:
    /// `x' = x + p + ε sin 2πx`, `p' = p + ε sin 2πx`.
    StandardMap { epsilon: f64 },
    /// `x' = x + ω mod 1`.
    CircleRotation { omega: f64 },
    /// `x'_i = μ_i x_i`.
    DiagonalLinear { multipliers: Vec<f64> },
    /// `s' = s + 1 mod 3`.
    CyclicGroup3,
    /// Standard map on `[0,2π)²` whose kick strength `(s/2)K` is driven by a
    /// ℤ₃ group coordinate `s`.
    KickedGroup { kick: f64 },
    /// Galerkin-truncated periodic heat equation advanced by `h`:
    /// `a_j' = exp(−4π²c²‖j‖²h) a_j`.
    HeatGalerkin { diffusivity: f64, step: f64, wavevectors: Vec<[i32; 2]>, multipliers: Vec<f64> },
    /// Time-`period` map of a flow, integrated with `substeps` RK4 steps.
    FlowMap { flow: FlowSystem, period: f64, substeps: usize },
}

/// Discrete-time system `x ↦ T(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSystem {
    pub kind: MapKind,
    pub domain: StateDomain,
}

impl MapSystem {
    pub fn standard_map(epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() {
            return Err(KoopmanError::input("standard map epsilon must be finite"));
        }
        Ok(MapSystem { kind: MapKind::StandardMap { epsilon }, domain: StateDomain::unit_torus(2) })
    }

    pub fn circle_rotation(omega: f64) -> Result<Self> {
        if !omega.is_finite() {
            return Err(KoopmanError::input("rotation number must be finite"));
        }
        Ok(MapSystem { kind: MapKind::CircleRotation { omega }, domain: StateDomain::unit_torus(1) })
    }

    pub fn diagonal_linear(multipliers: Vec<f64>) -> Result<Self> {
        if multipliers.is_empty() || multipliers.iter().any(|m| !m.is_finite()) {
            return Err(KoopmanError::input("diagonal map needs at least one finite multiplier"));
        }
        let dim = multipliers.len();
        Ok(MapSystem { kind: MapKind::DiagonalLinear { multipliers }, domain: StateDomain::unbounded(dim) })
    }

    pub fn cyclic_group3() -> Self {
        MapSystem {
            kind: MapKind::CyclicGroup3,
            domain: StateDomain::new(vec![Coordinate::Periodic { period: 3.0 }]),
        }
    }

    pub fn kicked_group(kick: f64) -> Result<Self> {
        if !(kick.is_finite() && kick > 0.0) {
            return Err(KoopmanError::input("kick strength must be positive"));
        }
        let domain = StateDomain::new(vec![
            Coordinate::Periodic { period: TWO_PI },
            Coordinate::Periodic { period: TWO_PI },
            Coordinate::Periodic { period: 3.0 },
        ]);
        Ok(MapSystem { kind: MapKind::KickedGroup { kick }, domain })
    }

    /// Truncated heat map on the wavevector set `wavevectors`.
    pub fn heat_galerkin(diffusivity: f64, step: f64, wavevectors: Vec<[i32; 2]>) -> Result<Self> {
        if !(diffusivity.is_finite() && diffusivity >= 0.0 && step.is_finite() && step > 0.0) {
            return Err(KoopmanError::input("heat map needs c >= 0 and h > 0"));
        }
        if wavevectors.is_empty() {
            return Err(KoopmanError::input("heat map needs at least one wavevector"));
        }
        let multipliers = wavevectors.iter().map(|j| heat_multiplier(diffusivity, step, *j)).collect();
        let dim = wavevectors.len();
        Ok(MapSystem {
            kind: MapKind::HeatGalerkin { diffusivity, step, wavevectors, multipliers },
            domain: StateDomain::unbounded(dim),
        })
    }

    /// Time-`period` map of `flow`. For time-dependent flows `period` must be
    /// a multiple of the forcing period so every application starts at the
    /// same forcing phase.
    pub fn time_map(flow: FlowSystem, period: f64, substeps: usize) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(KoopmanError::input("section period must be positive"));
        }
        if substeps == 0 {
            return Err(KoopmanError::input("section needs at least one integration step"));
        }
        if let Some(forcing) = flow.period() {
            let ratio = period / forcing;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
                return Err(KoopmanError::input(format!(
                    "period {period} is not a multiple of the forcing period {forcing}"
                )));
            }
        }
        let domain = flow.domain.clone();
        Ok(MapSystem { kind: MapKind::FlowMap { flow, period, substeps }, domain })
    }

    pub fn with_domain(mut self, domain: StateDomain) -> Result<Self> {
        if domain.dim() != self.dim() {
            return Err(KoopmanError::DimensionMismatch { expected: self.dim(), got: domain.dim() });
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn name(&self) -> String {
        match &self.kind {
            MapKind::StandardMap { epsilon } => format!("standard_map(eps={epsilon})"),
            MapKind::CircleRotation { omega } => format!("circle_rotation(omega={omega})"),
            MapKind::DiagonalLinear { multipliers } => format!("diagonal_linear({multipliers:?})"),
            MapKind::CyclicGroup3 => "cyclic_group3".to_string(),
            MapKind::KickedGroup { kick } => format!("kicked_group(K={kick})"),
            MapKind::HeatGalerkin { diffusivity, step, wavevectors, .. } => {
                format!("heat_galerkin(c={diffusivity},h={step},modes={})", wavevectors.len())
            }
            MapKind::FlowMap { flow, period, substeps } => {
                format!("time_map({},T={period},steps={substeps})", flow.name())
            }
        }
    }

    /// Applies the map once, in place.
    pub fn advance(&self, x: &mut [f64]) -> Result<()> {
        self.domain.check_dim(x)?;
        match &self.kind {
            MapKind::StandardMap { epsilon } => {
                let kick = epsilon * (TWO_PI * x[0]).sin();
                let p = x[1] + kick;
                x[0] += p;
                x[1] = p;
            }
            MapKind::CircleRotation { omega } => x[0] += omega,
            MapKind::DiagonalLinear { multipliers } => {
                for (xi, m) in x.iter_mut().zip(multipliers) {
                    *xi *= m;
                }
            }
            MapKind::HeatGalerkin { multipliers, .. } => {
                for (xi, m) in x.iter_mut().zip(multipliers) {
                    *xi *= m;
                }
            }
            MapKind::CyclicGroup3 => x[0] = (x[0].round() + 1.0).rem_euclid(3.0),
            MapKind::KickedGroup { kick } => {
                let s = x[2].round().rem_euclid(3.0);
                let action = x[0] + 0.5 * s * kick * x[1].sin();
                x[0] = action;
                x[1] += action;
                x[2] = s + 1.0;
            }
            MapKind::FlowMap { flow, period, substeps } => {
                let dt = period / *substeps as f64;
                flow.advance(0.0, dt, *substeps, x)?;
            }
        }
        self.domain.wrap(x);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(KoopmanError::Divergence { step: 1, reason: "non-finite state".into() });
        }
        Ok(())
    }

    /// One forward application of the map.
    pub fn step(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = x.to_vec();
        self.advance(&mut y)?;
        Ok(y)
    }

    /// The first `len` points of the orbit of `x0` (`x0` itself included).
    pub fn orbit(&self, x0: &[f64], len: usize) -> Result<Trajectory> {
        self.domain.check_dim(x0)?;
        if len == 0 {
            return Err(KoopmanError::input("orbit length must be at least 1"));
        }
        let mut x = x0.to_vec();
        self.domain.wrap(&mut x);
        let mut states = Vec::with_capacity(len);
        states.push(x.clone());
        for n in 1..len {
            self.advance(&mut x).map_err(|e| relabel_step(e, n))?;
            states.push(x.clone());
        }
        let dt = match &self.kind {
            MapKind::FlowMap { period, .. } => *period,
            _ => 1.0,
        };
        Ok(Trajectory { states, dt, x0: x0.to_vec(), system_id: self.name() })
    }
}

impl fmt::Display for MapSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

pub(crate) fn relabel_step(e: KoopmanError, step: usize) -> KoopmanError {
    match e {
        KoopmanError::Divergence { reason, .. } => KoopmanError::Divergence { step, reason },
        other => other,
    }
}

/// `exp(−4π²c²‖j‖²h)`.
pub fn heat_multiplier(diffusivity: f64, step: f64, j: [i32; 2]) -> f64 {
    let norm2 = (j[0] * j[0] + j[1] * j[1]) as f64;
    (-4.0 * PI * PI * diffusivity * diffusivity * norm2 * step).exp()
}

/// All `j ∈ ℤ²` with `‖j‖∞ ≤ max`, lexicographic.
pub fn heat_wavevectors(max: i32) -> Vec<[i32; 2]> {
    let mut out = Vec::new();
    for a in -max..=max {
        for b in -max..=max {
            out.push([a, b]);
        }
    }
    out
}

/// Jacobian of one standard-map step at `x`; its determinant is identically 1.
pub fn standard_map_jacobian(epsilon: f64, x: f64) -> [[f64; 2]; 2] {
    let a = TWO_PI * epsilon * (TWO_PI * x).cos();
    [[1.0 + a, 1.0], [a, 1.0]]
}

/// Time-`period` return map of a periodically forced flow.
pub fn poincare_section(system: &FlowSystem, period: f64, substeps: usize) -> Result<MapSystem> {
    if period.is_nan() || period <= 0.0 {
        return Err(KoopmanError::input("section period must be positive"));
    }
    MapSystem::time_map(system.clone(), period, substeps)
}
