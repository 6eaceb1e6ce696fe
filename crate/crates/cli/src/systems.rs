//! Built-in systems, their parameters, and seed/observable helpers.

use koopman_core::averaging::seed_grid;
use koopman_core::dynamics::{
    heat_wavevectors, integrate_flow, Coordinate, FlowSystem, MapSystem, StateDomain, Trajectory,
};
use koopman_core::observables::{harmonic_grid, Observable};

use crate::error::{CliError, CliResult, Context};
use crate::params::Params;

/// Harmonic truncation used when `kmax` is not given.
pub const DEFAULT_KMAX: usize = 5;

/// Names accepted by `--system`.
pub const SYSTEMS: &[&str] = &[
    "standard_map",
    "circle_rotation",
    "diagonal_linear",
    "cyclic_group3",
    "kicked_group",
    "heat_galerkin",
    "harmonic_oscillator",
    "double_well",
    "hill_vortex",
];

#[derive(Debug, Clone)]
pub enum Dynamics {
    Map(MapSystem),
    Flow(FlowSystem),
}

#[derive(Debug, Clone)]
pub struct SystemSetup {
    pub name: String,
    pub dynamics: Dynamics,
    default_x0: Vec<f64>,
}

fn golden() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

fn core<T>(r: koopman_core::Result<T>, name: &str) -> CliResult<T> {
    r.within("dynamics", &format!("system={name}"))
}

/// Builds `name` from its parameters. An analysis window `window=lo:hi`
/// turns every unbounded coordinate into an interval so harmonics can be
/// evaluated on it; the double well defaults to `[-1.6, 1.6]`.
pub fn build_system(name: &str, p: &mut Params) -> CliResult<SystemSetup> {
    let (dynamics, default_x0) = match name {
        "standard_map" => (Dynamics::Map(core(MapSystem::standard_map(p.f64("eps", 0.15)?), name)?), vec![0.1, 0.2]),
        "circle_rotation" => {
            (Dynamics::Map(core(MapSystem::circle_rotation(p.f64("rotation", golden())?), name)?), vec![0.0])
        }
        "diagonal_linear" => {
            let lambdas = p.f64_list("lambdas", &[0.9, 0.5])?;
            let x0 = vec![1.0; lambdas.len()];
            (Dynamics::Map(core(MapSystem::diagonal_linear(lambdas), name)?), x0)
        }
        "cyclic_group3" => (Dynamics::Map(MapSystem::cyclic_group3()), vec![0.0]),
        "kicked_group" => {
            (Dynamics::Map(core(MapSystem::kicked_group(p.positive("kick", 1.0)?), name)?), vec![1.0, 1.0, 0.0])
        }
        "heat_galerkin" => {
            let c = p.f64("c", 1.0)?;
            let h = p.positive("h", 0.01)?;
            let jmax = p.usize_at_least("jmax", 2, 0)?;
            let waves = heat_wavevectors(jmax as i32);
            let x0 = vec![1.0; waves.len()];
            (Dynamics::Map(core(MapSystem::heat_galerkin(c, h, waves), name)?), x0)
        }
        "harmonic_oscillator" => {
            (Dynamics::Flow(core(FlowSystem::harmonic_oscillator(p.positive("w", 1.0)?), name)?), vec![1.0, 0.0])
        }
        "double_well" => {
            let k = p.positive("k", 1.0)?;
            let b = p.positive("b", 2.0)?;
            (Dynamics::Flow(core(FlowSystem::double_well(k, b), name)?), vec![0.5, 0.0])
        }
        "hill_vortex" => {
            let swirl = p.f64("swirl", 0.0)?;
            let forcing = p.f64("forcing", 0.0)?;
            (Dynamics::Flow(core(FlowSystem::hill_vortex(swirl, forcing), name)?), vec![0.5, 0.1, 0.0])
        }
        other => {
            return Err(CliError::input(format!("unknown system '{other}'; expected one of {}", SYSTEMS.join(", "))))
        }
    };
    let mut setup = SystemSetup { name: name.to_string(), dynamics, default_x0 };
    let default_window = (name == "double_well").then_some((-1.6, 1.6));
    let window = match p.opt_range("window")? {
        Some(w) => Some(w),
        None => default_window,
    };
    if let Some((lo, hi)) = window {
        p.note("window", format!("{lo:?}:{hi:?}"));
        setup.apply_window(lo, hi)?;
    }
    Ok(setup)
}

impl SystemSetup {
    pub fn domain(&self) -> &StateDomain {
        match &self.dynamics {
            Dynamics::Map(m) => &m.domain,
            Dynamics::Flow(f) => &f.domain,
        }
    }

    pub fn dim(&self) -> usize {
        self.domain().dim()
    }

    fn apply_window(&mut self, lo: f64, hi: f64) -> CliResult<()> {
        let coords = self
            .domain()
            .coords
            .iter()
            .map(|c| match c {
                Coordinate::Unbounded => Coordinate::Interval { lo, hi },
                other => *other,
            })
            .collect();
        let domain = StateDomain::new(coords);
        let name = self.name.clone();
        self.dynamics = match self.dynamics.clone() {
            Dynamics::Map(m) => Dynamics::Map(core(m.with_domain(domain), &name)?),
            Dynamics::Flow(f) => Dynamics::Flow(core(f.with_domain(domain), &name)?),
        };
        Ok(())
    }

    /// Initial condition `x0`, checked against the state dimension.
    pub fn x0(&self, p: &mut Params) -> CliResult<Vec<f64>> {
        let x0 = p.f64_list("x0", &self.default_x0)?;
        if x0.len() != self.dim() {
            return Err(CliError::input(format!("x0 has {} components, {} needs {}", x0.len(), self.name, self.dim())));
        }
        Ok(x0)
    }

    /// Sampling interval of trajectories: 1 for maps, `dt` for flows.
    pub fn sample_dt(&self, p: &mut Params) -> CliResult<f64> {
        match self.dynamics {
            Dynamics::Map(_) => Ok(1.0),
            Dynamics::Flow(_) => p.positive("dt", 0.01),
        }
    }

    /// `len` samples starting at `x0`.
    pub fn trajectory(&self, x0: &[f64], len: usize, dt: f64) -> CliResult<Trajectory> {
        match &self.dynamics {
            Dynamics::Map(m) => core(m.orbit(x0, len), &self.name),
            Dynamics::Flow(f) => core(integrate_flow(f, x0, dt, len - 1), &self.name),
        }
    }

    /// Discrete-time view. Flows become their time-`tau` map with
    /// `substeps` RK4 steps per application.
    pub fn into_map(self, p: &mut Params) -> CliResult<MapSystem> {
        match self.dynamics {
            Dynamics::Map(m) => Ok(m),
            Dynamics::Flow(f) => {
                let forced = f.time_dependent();
                let tau = p.positive("tau", if forced { 1.0 } else { 0.1 })?;
                let substeps = p.usize_at_least("substeps", if forced { 100 } else { 10 }, 1)?;
                core(MapSystem::time_map(f, tau, substeps), &self.name)
            }
        }
    }
}

/// Observable selected by `obs`: `identity`, `probe` (the standard-map test
/// function) or `harmonics` (explicit `waves`, or the full grid up to
/// `kmax`).
pub fn observable(p: &mut Params, domain: &StateDomain) -> CliResult<Observable> {
    let dim = domain.dim();
    match p.choice("obs", &["identity", "probe", "harmonics"])?.as_str() {
        "identity" => Ok(Observable::identity(dim)),
        "probe" => {
            if dim != 2 {
                return Err(CliError::input("obs=probe needs a two-dimensional state"));
            }
            Ok(Observable::standard_map_probe())
        }
        _ => {
            if let Some(c) = domain.coords.iter().position(|c| c.extent().is_none()) {
                return Err(CliError::input(format!(
                    "coordinate {c} is unbounded, so harmonics need window=lo:hi"
                )));
            }
            let members = match p.opt_wavevectors("waves", dim)? {
                Some(waves) => waves.into_iter().map(Observable::harmonic).collect(),
                None => {
                    let kmax = p.usize_at_least("kmax", DEFAULT_KMAX, 0)?;
                    harmonic_grid(dim, kmax as i32).within("observables", "obs=harmonics")?
                }
            };
            Observable::composite(members).within("observables", "obs=harmonics")
        }
    }
}

/// Names of the state coordinates in output tables.
pub fn coordinate_names(dim: usize) -> Vec<String> {
    match dim {
        1 => vec!["x".to_string()],
        2 => vec!["x".to_string(), "p".to_string()],
        _ => (1..=dim).map(|i| format!("x{i}")).collect(),
    }
}

/// A single `x0`, or a row-major grid over `x_range × p_range` with
/// `counts` points. Grid ranges default to the unit cell on periodic axes
/// and to the middle three quarters of an analysis window.
pub fn seeds(setup: &SystemSetup, p: &mut Params, default_counts: (usize, usize)) -> CliResult<Vec<Vec<f64>>> {
    let grid_keys = ["x_range", "p_range", "counts"];
    if p.contains("x0") {
        if let Some(k) = grid_keys.iter().find(|k| p.contains(k)) {
            return Err(CliError::input(format!("give either x0 or a seed grid, not both ({k})")));
        }
        return Ok(vec![setup.x0(p)?]);
    }
    if setup.dim() != 2 {
        return Err(CliError::input(format!("seed grids need a two-dimensional state; give x0 for {}", setup.name)));
    }
    let default_range = |c: &Coordinate| match *c {
        Coordinate::Periodic { period } => Some((0.0, period)),
        Coordinate::Interval { lo, hi } => Some((lo + 0.125 * (hi - lo), hi - 0.125 * (hi - lo))),
        Coordinate::Unbounded => None,
    };
    let mut ranges = Vec::new();
    for (key, c) in ["x_range", "p_range"].iter().zip(&setup.domain().coords) {
        let r = match default_range(c) {
            Some(d) => p.range(key, d)?,
            None => p
                .opt_range(key)?
                .ok_or_else(|| CliError::input(format!("{key} is required for an unbounded coordinate")))?,
        };
        ranges.push(r);
    }
    let counts = p.counts("counts", default_counts)?;
    seed_grid(ranges[0], ranges[1], counts).within("averaging", "seed grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_system_builds_with_defaults() {
        for name in SYSTEMS {
            let mut p = Params::parse("").unwrap();
            let s = build_system(name, &mut p).unwrap();
            let x0 = s.x0(&mut p).unwrap();
            let dt = s.sample_dt(&mut p).unwrap();
            let traj = s.trajectory(&x0, 5, dt).unwrap();
            assert_eq!(traj.len(), 5, "{name}");
            p.finish().unwrap();
        }
        assert!(build_system("lorenz", &mut Params::parse("").unwrap()).is_err());
    }

    #[test]
    fn window_bounds_unbounded_coordinates() {
        let mut p = Params::parse("window=-2:2").unwrap();
        let s = build_system("harmonic_oscillator", &mut p).unwrap();
        assert_eq!(s.domain().coords[0], Coordinate::Interval { lo: -2.0, hi: 2.0 });
        let mut p = Params::parse("").unwrap();
        let s = build_system("double_well", &mut p).unwrap();
        assert_eq!(p.finish().unwrap()["window"], "-1.6:1.6");
        let seeds = seeds(&s, &mut p, (3, 3)).unwrap();
        assert!(seeds[0].iter().all(|v| (v + 1.2).abs() < 1e-12), "{:?}", seeds[0]);
    }

    #[test]
    fn harmonics_refuse_unbounded_axes() {
        let mut p = Params::parse("obs=harmonics").unwrap();
        let s = build_system("diagonal_linear", &mut p).unwrap();
        assert!(observable(&mut p, s.domain()).is_err());
    }

    #[test]
    fn seeds_are_single_or_grid() {
        let mut p = Params::parse("x0=0.1:0.2").unwrap();
        let s = build_system("standard_map", &mut p).unwrap();
        assert_eq!(seeds(&s, &mut p, (45, 45)).unwrap().len(), 1);
        let mut p = Params::parse("counts=4:3").unwrap();
        assert_eq!(seeds(&s, &mut p, (45, 45)).unwrap().len(), 12);
        let mut p = Params::parse("x0=0.1:0.2,counts=2:2").unwrap();
        assert!(seeds(&s, &mut p, (45, 45)).is_err());
    }
}
