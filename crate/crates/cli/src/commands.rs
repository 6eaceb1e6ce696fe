//! One function per command. Each reads all of its parameters and calls
//! [`Params::finish`] before doing any numerical work, so typos and range
//! errors never cost a long computation.

use std::path::{Path, PathBuf};

use koopman_core::averaging::{adaptive_average, empirical_coeffs, fourier_average, map_seeds, ConvergenceReport};
use koopman_core::dmd::{coherency_groups, companion_dmd, svd_dmd, DmdResult, DEFAULT_RANK_TOL};
use koopman_core::dynamics::{MapSystem, StateDomain};
use koopman_core::gla::{fourier_projection, fourier_projection_continuous, gla_modes, gla_modes_continuous, EigenvalueList, ProjectedMode};
use koopman_core::indicators::{
    compass_headings, coverage_rollout, ergodicity_ball_oracle, ergodicity_sobolev, log_checkpoints, mixing_norm,
    Agent, BallQuadrature, IndicatorSeries, TargetDensity, TargetMeasure,
};
use koopman_core::observables::{trace, Observable, SnapshotMatrix, WavevectorGrid};
use koopman_core::quotient::{diffusion_maps, distance_matrix, extract_components, Bandwidth, SobolevIndex};
use num_complex::Complex64;

use crate::bundle::{Cell, ColumnKind, Table};
use crate::error::{CliError, CliResult, Context};
use crate::io::ingest_snapshots;
use crate::params::{fmt_f64, Params};
use crate::systems::{build_system, coordinate_names, observable, seeds, SystemSetup, DEFAULT_KMAX};
use crate::{Command, RunConfig, Source};

/// Payload and diagnostics of one command.
#[derive(Debug, Default)]
pub struct Output {
    pub tables: Vec<Table>,
    pub snapshots: Option<SnapshotMatrix>,
    pub diagnostics: Vec<(String, Cell)>,
    /// False when some adaptive average stopped at its limit.
    pub converged: bool,
}

impl Output {
    fn new() -> Self {
        Output { converged: true, ..Default::default() }
    }

    fn diag(&mut self, key: &str, value: impl Into<Cell>) {
        self.diagnostics.push((key.to_string(), value.into()));
    }
}

pub fn dispatch(cfg: &RunConfig, p: &mut Params) -> CliResult<Output> {
    let ctx = cfg.context();
    match cfg.command {
        Command::Simulate => simulate(cfg, p, &ctx),
        Command::Dmd => dmd(cfg, p, &ctx),
        Command::Gla => gla(cfg, p, &ctx),
        Command::Average => average(cfg, p, &ctx),
        Command::Quotient => quotient(cfg, p, &ctx),
        Command::Indicator => indicator(cfg, p, &ctx),
        Command::Search => search(cfg, p, &ctx),
    }
}

fn require_system(cfg: &RunConfig, p: &mut Params) -> CliResult<SystemSetup> {
    match &cfg.source {
        Source::System(name) => build_system(name, p),
        _ => Err(CliError::input(format!("{} needs --system", cfg.command.as_str()))),
    }
}

fn coord_columns(dim: usize) -> Vec<(String, ColumnKind)> {
    coordinate_names(dim).into_iter().map(|n| (n, ColumnKind::Real)).collect()
}

fn seed_cells(i: usize, x0: &[f64]) -> Vec<Cell> {
    let mut row = vec![Cell::from(i)];
    row.extend(x0.iter().map(|&x| Cell::Real(x)));
    row
}

fn series_table(name: &str, series: &IndicatorSeries) -> Table {
    let mut t = Table::new(name, &[("n", ColumnKind::Int), ("value", ColumnKind::Real)]);
    for &(n, v) in &series.values {
        t.push(vec![n.into(), v.into()]);
    }
    t
}

fn simulate(cfg: &RunConfig, p: &mut Params, ctx: &str) -> CliResult<Output> {
    let setup = require_system(cfg, p)?;
    let x0 = setup.x0(p)?;
    let n = p.usize_at_least("n", 1000, 1)?;
    let dt = setup.sample_dt(p)?;
    let obs = if p.contains("obs") { Some(observable(p, setup.domain())?) } else { None };
    p.finish()?;

    let traj = setup.trajectory(&x0, n, dt)?;
    let mut cols = vec![("step".to_string(), ColumnKind::Int), ("t".to_string(), ColumnKind::Real)];
    cols.extend(coord_columns(setup.dim()));
    let mut table = Table::with_columns("trajectory", cols);
    for (k, x) in traj.states.iter().enumerate() {
        let mut row = vec![Cell::from(k), Cell::Real(k as f64 * traj.dt)];
        row.extend(x.iter().map(|&v| Cell::Real(v)));
        table.push(row);
    }
    let mut out = Output::new();
    if let Some(obs) = obs {
        out.snapshots = Some(trace(&obs, &traj, setup.domain()).within("observables", ctx)?);
    }
    out.tables.push(table);
    out.diag("system", traj.system_id.clone());
    out.diag("samples", traj.len());
    Ok(out)
}

enum Origin {
    File(PathBuf),
    Trace { setup: Box<SystemSetup>, obs: Observable, x0: Vec<f64> },
}

/// Where snapshots come from and which columns to keep.
struct SnapshotPlan {
    origin: Origin,
    slice: Option<(usize, usize)>,
    count: Option<usize>,
    dt: f64,
}

/// `krylov` selects `r` (count `r + 1`, default `m + 1`) over `n` (default
/// 1000) as the length parameter.
fn plan_snapshots(cfg: &RunConfig, p: &mut Params, krylov: bool) -> CliResult<SnapshotPlan> {
    let slice = match p.opt_usize_list("slice")?.as_deref() {
        None => None,
        Some(&[a, b]) if b >= a + 2 => Some((a, b)),
        Some(_) => return Err(CliError::input("slice must be a:b covering at least two columns")),
    };
    let mut count = if krylov { p.opt_usize("r")?.map(|r| r + 1) } else { p.opt_usize("n")? };
    if let Some(c) = count {
        if c < 2 {
            return Err(CliError::input("at least two snapshots are needed"));
        }
        if let Some((a, b)) = slice {
            if c > b - a {
                return Err(CliError::input(format!("slice {a}:{b} holds fewer than {c} snapshots")));
            }
        }
    }
    match &cfg.source {
        Source::Input(path) => {
            let dt = p.positive("dt", 1.0)?;
            Ok(SnapshotPlan { origin: Origin::File(path.clone()), slice, count, dt })
        }
        Source::System(name) => {
            let setup = build_system(name, p)?;
            let obs = observable(p, setup.domain())?;
            let x0 = setup.x0(p)?;
            let dt = setup.sample_dt(p)?;
            if count.is_none() {
                let c = match slice {
                    Some((a, b)) => b - a,
                    None if krylov => obs.codomain_dim() + 1,
                    None => 1000,
                };
                count = Some(c);
                if krylov {
                    p.note("r", (c - 1).to_string());
                } else {
                    p.note("n", c.to_string());
                }
            }
            Ok(SnapshotPlan { origin: Origin::Trace { setup: Box::new(setup), obs, x0 }, slice, count, dt })
        }
        Source::Neither => Err(CliError::input(format!("{} needs --system or --input", cfg.command.as_str()))),
    }
}

fn materialize(plan: &SnapshotPlan, ctx: &str) -> CliResult<SnapshotMatrix> {
    let mut s = match &plan.origin {
        Origin::File(path) => ingest_snapshots(path, None).within("cli_io", ctx)?,
        Origin::Trace { setup, obs, x0 } => {
            let len = match plan.slice {
                Some((_, b)) => b,
                None => plan.count.expect("planned"),
            };
            let traj = setup.trajectory(x0, len, plan.dt)?;
            trace(obs, &traj, setup.domain()).within("observables", ctx)?
        }
    };
    if let Some((a, b)) = plan.slice {
        if b > s.count() {
            return Err(CliError::input(format!("slice {a}:{b} exceeds the {} available snapshots", s.count())));
        }
        s = s.slice(a..b).within("observables", ctx)?;
    }
    if let Some(c) = plan.count {
        if c > s.count() {
            return Err(CliError::input(format!("{c} snapshots requested, {} available", s.count())));
        }
        s = s.slice(0..c).within("observables", ctx)?;
    }
    Ok(s)
}

fn ritz_tables(res: &DmdResult) -> (Table, Table) {
    let mut ritz = Table::new(
        "ritz",
        &[
            ("pair", ColumnKind::Int),
            ("lambda", ColumnKind::Complex),
            ("modulus", ColumnKind::Real),
            ("angle", ColumnKind::Real),
            ("energy", ColumnKind::Real),
        ],
    );
    let mut modes =
        Table::new("modes", &[("pair", ColumnKind::Int), ("component", ColumnKind::Int), ("mode", ColumnKind::Complex)]);
    for (i, pair) in res.pairs.iter().enumerate() {
        ritz.push(vec![i.into(), pair.value.into(), pair.value.norm().into(), pair.value.arg().into(), pair.energy.into()]);
        for (c, v) in pair.mode.iter().enumerate() {
            modes.push(vec![i.into(), c.into(), (*v).into()]);
        }
    }
    (ritz, modes)
}

fn dmd(cfg: &RunConfig, p: &mut Params, ctx: &str) -> CliResult<Output> {
    let plan = plan_snapshots(cfg, p, true)?;
    let variant = p.choice("variant", &["companion", "svd"])?;
    let rank_tol = if variant == "svd" { Some(p.positive("rank_tol", DEFAULT_RANK_TOL)?) } else { None };
    let coherency = match (p.opt_f64("eps1")?, p.opt_f64("eps2")?) {
        (Some(e1), Some(e2)) => Some((e1, e2, p.opt_usize_list("select")?)),
        (None, None) => None,
        _ => return Err(CliError::input("coherency grouping needs both eps1 and eps2")),
    };
    p.finish()?;

    let s = materialize(&plan, ctx)?;
    let res = match rank_tol {
        None => companion_dmd(&s),
        Some(tol) => svd_dmd(&s, tol),
    }
    .within("spectral_dmd", ctx)?;

    let mut out = Output::new();
    let (ritz, modes) = ritz_tables(&res);
    out.tables.push(ritz);
    out.tables.push(modes);
    if !res.companion_coeffs.is_empty() {
        let mut t = Table::new("companion", &[("index", ColumnKind::Int), ("coeff", ColumnKind::Complex)]);
        for (i, c) in res.companion_coeffs.iter().enumerate() {
            t.push(vec![i.into(), (*c).into()]);
        }
        out.tables.push(t);
    }
    if let Some((eps1, eps2, select)) = coherency {
        let selected = select.unwrap_or_else(|| (0..res.pairs.len()).collect());
        let groups = coherency_groups(&res, &selected, eps1, eps2).within("spectral_dmd", ctx)?;
        let mut t = Table::new("groups", &[("component", ColumnKind::Int), ("group", ColumnKind::Int)]);
        let mut rows: Vec<(usize, usize)> =
            groups.iter().enumerate().flat_map(|(g, members)| members.iter().map(move |&c| (c, g))).collect();
        rows.sort_unstable();
        for (c, g) in rows {
            t.push(vec![c.into(), g.into()]);
        }
        out.tables.push(t);
    }
    out.diag("variant", res.variant.as_str());
    out.diag("residual_norm", res.residual_norm);
    out.diag("m", s.m());
    out.diag("snapshots", s.count());
    out.diag("ritz_pairs", res.pairs.len());
    Ok(out)
}

fn mode_table(modes: &[ProjectedMode]) -> Table {
    let mut t = Table::new(
        "modes",
        &[
            ("pair", ColumnKind::Int),
            ("eigenvalue", ColumnKind::Complex),
            ("horizon", ColumnKind::Int),
            ("component", ColumnKind::Int),
            ("mode", ColumnKind::Complex),
        ],
    );
    for (i, m) in modes.iter().enumerate() {
        for (c, v) in m.mode_at_p.iter().enumerate() {
            t.push(vec![i.into(), m.eigenvalue.into(), m.horizon.into(), c.into(), (*v).into()]);
        }
    }
    t
}

enum GlaMethod {
    Fourier(f64),
    FourierContinuous(f64),
    Modes(Vec<Complex64>, Option<usize>),
    ModesContinuous(Vec<Complex64>, Option<usize>),
}

fn gla(cfg: &RunConfig, p: &mut Params, ctx: &str) -> CliResult<Output> {
    let plan = plan_snapshots(cfg, p, false)?;
    let omega = p.opt_f64("omega")?;
    let frequency = p.opt_f64("frequency")?;
    let eigs = p.opt_complex_list("eigs")?;
    let exponents = p.opt_complex_list("exponents")?;
    let given = [omega.is_some(), frequency.is_some(), eigs.is_some(), exponents.is_some()];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(CliError::input("gla needs exactly one of omega, frequency, eigs, exponents"));
    }
    let method = if let Some(w) = omega {
        GlaMethod::Fourier(w)
    } else if let Some(f) = frequency {
        GlaMethod::FourierContinuous(f)
    } else if let Some(e) = eigs {
        GlaMethod::Modes(e, p.opt_usize("horizon")?)
    } else {
        GlaMethod::ModesContinuous(exponents.expect("checked above"), p.opt_usize("horizon")?)
    };
    p.finish()?;

    let s = materialize(&plan, ctx)?;
    let dt = plan.dt;
    let mut out = Output::new();
    let modes = match method {
        GlaMethod::Fourier(w) => vec![fourier_projection(&s, w).within("gla", ctx)?],
        GlaMethod::FourierContinuous(f) => vec![fourier_projection_continuous(&s, f, dt).within("gla", ctx)?],
        GlaMethod::Modes(e, h) => {
            let list = EigenvalueList::new(e).within("gla", ctx)?;
            let res = gla_modes(&s, &list, h.unwrap_or(s.count())).within("gla", ctx)?;
            out.diag("residual", res.residual);
            res.modes
        }
        GlaMethod::ModesContinuous(e, h) => {
            let res = gla_modes_continuous(&s, &e, dt, h.unwrap_or(s.count())).within("gla", ctx)?;
            out.diag("residual", res.residual);
            res.modes
        }
    };
    out.tables.push(mode_table(&modes));
    out.diag("m", s.m());
    out.diag("snapshots", s.count());
    out.diag("dt", dt);
    Ok(out)
}

/// `adaptive=true` settings shared by `average` and `quotient`.
struct AdaptiveSettings {
    tol: f64,
    checkpoint: usize,
    n_max: usize,
}

fn adaptive_settings(p: &mut Params) -> CliResult<Option<AdaptiveSettings>> {
    if !p.bool("adaptive", false)? {
        return Ok(None);
    }
    let tol = p.positive("tol", koopman_core::averaging::DEFAULT_TOL)?;
    let checkpoint = p.usize_at_least("checkpoint", koopman_core::averaging::DEFAULT_CHECKPOINT, 1)?;
    let n_max = p.usize_at_least("n_max", koopman_core::averaging::DEFAULT_N_MAX, checkpoint)?;
    Ok(Some(AdaptiveSettings { tol, checkpoint, n_max }))
}

fn convergence_table(seeds: &[Vec<f64>], reports: &[ConvergenceReport], dim: usize) -> Table {
    let mut cols = vec![("seed".to_string(), ColumnKind::Int)];
    cols.extend(coord_columns(dim));
    cols.push(("n_used".to_string(), ColumnKind::Int));
    cols.push(("final_delta".to_string(), ColumnKind::Real));
    cols.push(("converged".to_string(), ColumnKind::Text));
    let mut t = Table::with_columns("convergence", cols);
    for (i, (x0, r)) in seeds.iter().zip(reports).enumerate() {
        let mut row = seed_cells(i, x0);
        row.extend([r.n_used.into(), r.final_delta.into(), r.converged.into()]);
        t.push(row);
    }
    t
}

fn kmax_param(p: &mut Params) -> CliResult<i32> {
    let k = p.usize_at_least("kmax", DEFAULT_KMAX, 0)?;
    i32::try_from(k).map_err(|_| CliError::input("kmax is too large"))
}

fn wavevector_grid(dims: usize, kmax: i32, ctx: &str) -> CliResult<WavevectorGrid> {
    WavevectorGrid::new(dims, kmax).within("observables", ctx)
}

fn average(cfg: &RunConfig, p: &mut Params, ctx: &str) -> CliResult<Output> {
    let setup = require_system(cfg, p)?;
    let seeds = seeds(&setup, p, (45, 45))?;
    let dim = setup.dim();
    let adaptive = adaptive_settings(p)?;
    let fixed = match adaptive {
        Some(_) => None,
        None => {
            let obs = observable(p, setup.domain())?;
            let n = p.usize_at_least("n", 10_000, 1)?;
            let omega = p.f64("omega", 0.0)?;
            Some((obs, n, omega))
        }
    };
    let kmax = if adaptive.is_some() { kmax_param(p)? } else { 0 };
    let map = setup.into_map(p)?;
    p.finish()?;

    let mut out = Output::new();
    out.diag("system", map.name());
    out.diag("seeds", seeds.len());
    if let Some((obs, n, omega)) = fixed {
        let values = map_seeds(&seeds, |x0| fourier_average(&map, &obs, x0, n, omega)).within("averaging", ctx)?;
        let mut cols = vec![("seed".to_string(), ColumnKind::Int)];
        cols.extend(coord_columns(dim));
        cols.push(("component".to_string(), ColumnKind::Int));
        cols.push(("value".to_string(), ColumnKind::Complex));
        cols.push(("modulus".to_string(), ColumnKind::Real));
        let mut t = Table::with_columns("averages", cols);
        for (i, (x0, v)) in seeds.iter().zip(&values).enumerate() {
            for (c, z) in v.iter().enumerate() {
                let mut row = seed_cells(i, x0);
                row.extend([c.into(), (*z).into(), z.norm().into()]);
                t.push(row);
            }
        }
        out.tables.push(t);
        return Ok(out);
    }

    let cfg_a = adaptive.expect("adaptive branch");
    let grid = wavevector_grid(dim, kmax, ctx)?;
    let results = map_seeds(&seeds, |x0| adaptive_average(&map, &grid, x0, cfg_a.tol, cfg_a.checkpoint, cfg_a.n_max))
        .within("averaging", ctx)?;
    let mut cols = vec![("seed".to_string(), ColumnKind::Int)];
    cols.extend(coord_columns(dim));
    cols.extend((1..=dim).map(|i| (format!("k{i}"), ColumnKind::Int)));
    cols.push(("coeff".to_string(), ColumnKind::Complex));
    let mut t = Table::with_columns("coefficients", cols);
    for (i, (x0, (coeffs, _))) in seeds.iter().zip(&results).enumerate() {
        for (k, z) in grid.vectors().iter().zip(&coeffs.coeffs) {
            let mut row = seed_cells(i, x0);
            row.extend(k.iter().map(|&c| Cell::Int(c as i64)));
            row.push((*z).into());
            t.push(row);
        }
    }
    let reports: Vec<ConvergenceReport> = results.into_iter().map(|(_, r)| r).collect();
    out.converged = reports.iter().all(|r| r.converged);
    out.diag("converged_seeds", reports.iter().filter(|r| r.converged).count());
    out.tables.push(t);
    out.tables.push(convergence_table(&seeds, &reports, dim));
    Ok(out)
}

fn quotient(cfg: &RunConfig, p: &mut Params, ctx: &str) -> CliResult<Output> {
    let setup = require_system(cfg, p)?;
    let dim = setup.dim();
    let seeds = seeds(&setup, p, (45, 45))?;
    let kmax = kmax_param(p)?;
    let s = match p.opt_f64("s")? {
        Some(s) => SobolevIndex::new(s).within("quotient", ctx)?,
        None => SobolevIndex::for_dims(dim),
    };
    p.note("s", fmt_f64(s.value()));
    let adaptive = adaptive_settings(p)?;
    let n = if adaptive.is_none() { p.usize_at_least("n", 10_000, 1)? } else { 0 };
    let bandwidth = match p.opt_text("bandwidth").as_deref() {
        None | Some("auto") => Bandwidth::Auto,
        Some(v) => match v.parse::<f64>() {
            Ok(e) if e.is_finite() && e > 0.0 => Bandwidth::Fixed(e),
            _ => return Err(CliError::input(format!("bandwidth must be 'auto' or a positive number, got '{v}'"))),
        },
    };
    let n_coords = p.usize_at_least("n_coords", 2, 1)?;
    let cluster_coords = p.usize_at_least("cluster_coords", n_coords, 1)?;
    if cluster_coords > n_coords {
        return Err(CliError::input("cluster_coords cannot exceed n_coords"));
    }
    let k_clusters = p.usize_at_least("k_clusters", 2, 1)?;
    if k_clusters > seeds.len() {
        return Err(CliError::input(format!("k_clusters={k_clusters} exceeds the {} seeds", seeds.len())));
    }
    let with_distances = p.bool("distances", false)?;
    let map = setup.into_map(p)?;
    p.finish()?;

    let mut out = Output::new();
    let coeffs = match &adaptive {
        None => map_seeds(&seeds, |x0| empirical_coeffs(&map, x0, n, kmax)).within("averaging", ctx)?,
        Some(a) => {
            let grid = wavevector_grid(dim, kmax, ctx)?;
            let results = map_seeds(&seeds, |x0| adaptive_average(&map, &grid, x0, a.tol, a.checkpoint, a.n_max))
                .within("averaging", ctx)?;
            let (coeffs, reports): (Vec<_>, Vec<_>) = results.into_iter().unzip();
            out.converged = reports.iter().all(|r| r.converged);
            out.diag("converged_seeds", reports.iter().filter(|r| r.converged).count());
            out.tables.push(convergence_table(&seeds, &reports, dim));
            coeffs
        }
    };
    let dm = distance_matrix(&coeffs, s).within("quotient", ctx)?;
    let emb = diffusion_maps(&dm, bandwidth, n_coords).within("quotient", ctx)?;
    let labels = extract_components(&emb.truncated(cluster_coords).within("quotient", ctx)?, k_clusters)
        .within("quotient", ctx)?;

    let mut cols = vec![("seed".to_string(), ColumnKind::Int)];
    cols.extend(coord_columns(dim));
    cols.extend((1..=n_coords).map(|i| (format!("chi_{i}"), ColumnKind::Real)));
    cols.push(("label".to_string(), ColumnKind::Int));
    let mut t = Table::with_columns("embedding", cols);
    for (i, x0) in seeds.iter().enumerate() {
        let mut row = seed_cells(i, x0);
        row.extend(emb.point(i).into_iter().map(Cell::Real));
        row.push(labels[i].into());
        t.push(row);
    }
    out.tables.insert(0, t);
    let mut ev = Table::new("eigenvalues", &[("index", ColumnKind::Int), ("value", ColumnKind::Real)]);
    for (i, v) in emb.eigenvalues.iter().enumerate() {
        ev.push(vec![(i + 1).into(), (*v).into()]);
    }
    out.tables.push(ev);
    if with_distances {
        let mut d = Table::new("distances", &[("i", ColumnKind::Int), ("j", ColumnKind::Int), ("distance", ColumnKind::Real)]);
        for i in 0..dm.len() {
            for j in 0..dm.len() {
                d.push(vec![i.into(), j.into(), dm.entries[(i, j)].into()]);
            }
        }
        out.tables.push(d);
    }
    out.diag("system", map.name());
    out.diag("seeds", seeds.len());
    out.diag("bandwidth", emb.bandwidth);
    out.diag("s", s.value());
    out.diag("kmax", kmax as usize);
    Ok(out)
}

/// `target=uniform` or `target=gaussian` with `center` and `sigma`.
fn target_density(p: &mut Params, dims: usize, ctx: &str) -> CliResult<TargetDensity> {
    match p.choice("target", &["uniform", "gaussian"])?.as_str() {
        "uniform" => Ok(TargetDensity::uniform(dims)),
        _ => {
            let center = p.f64_list("center", &vec![0.5; dims])?;
            if center.len() != dims {
                return Err(CliError::input(format!("center needs {dims} components")));
            }
            let sigma = p.positive("sigma", 0.1)?;
            TargetDensity::wrapped_gaussian(center, sigma).within("indicators", ctx)
        }
    }
}

fn sobolev_override(p: &mut Params, ctx: &str) -> CliResult<Option<SobolevIndex>> {
    p.opt_f64("s")?.map(|s| SobolevIndex::new(s).within("indicators", ctx)).transpose()
}

fn check_torus(domain: &StateDomain) -> CliResult<()> {
    if domain.coords.iter().all(|c| c.is_periodic()) {
        Ok(())
    } else {
        Err(CliError::input("indicators need a system whose coordinates are all periodic"))
    }
}

fn indicator(cfg: &RunConfig, p: &mut Params, ctx: &str) -> CliResult<Output> {
    let kind = p.choice("kind", &["sobolev", "ball", "mixing"])?;
    if kind == "mixing" {
        return mixing(cfg, p, ctx);
    }
    let setup = require_system(cfg, p)?;
    check_torus(setup.domain())?;
    let dims = setup.dim();
    let x0 = setup.x0(p)?;
    let n = p.usize_at_least("n", 10_000, 1)?;
    let n_min = p.usize_at_least("n_min", 10.min(n), 1)?;
    if n_min > n {
        return Err(CliError::input("n_min cannot exceed n"));
    }
    let count = p.usize_at_least("checkpoints", 20, 1)?;
    let density = target_density(p, dims, ctx)?;
    let sobolev = if kind == "sobolev" { Some((kmax_param(p)?, sobolev_override(p, ctx)?)) } else { None };
    let quad = if kind == "ball" {
        BallQuadrature {
            n_centers: p.usize_at_least("n_centers", BallQuadrature::default().n_centers, 1)?,
            n_radii: p.usize_at_least("n_radii", BallQuadrature::default().n_radii, 1)?,
        }
    } else {
        BallQuadrature::default()
    };
    let map: MapSystem = setup.into_map(p)?;
    p.finish()?;

    let checkpoints = log_checkpoints(n_min, n, count);
    let traj = map.orbit(&x0, n).within("dynamics", ctx)?;
    let mut out = Output::new();
    let series = match sobolev {
        Some((kmax, s)) => {
            let target = TargetMeasure::from_density(&density, wavevector_grid(dims, kmax, ctx)?).within("indicators", ctx)?;
            out.diag("target", target.description.clone());
            ergodicity_sobolev(&map.domain, &traj.states, &target, s, &checkpoints).within("indicators", ctx)?
        }
        None => ergodicity_ball_oracle(&map.domain, &traj.states, &density, quad, &checkpoints).within("indicators", ctx)?,
    };
    out.tables.push(series_table("series", &series));
    out.diag("kind", series.kind.as_str());
    if let Some(s) = series.s {
        out.diag("s", s.value());
    }
    out.diag("system", map.name());
    Ok(out)
}

/// Mixing norm of a coefficient history read from `--input`: one row per
/// wavevector of the `dims`/`kmax` grid, one column per time.
fn mixing(cfg: &RunConfig, p: &mut Params, ctx: &str) -> CliResult<Output> {
    let Source::Input(path) = &cfg.source else {
        return Err(CliError::input("kind=mixing reads a coefficient history with --input"));
    };
    let dims = p.usize_at_least("dims", 2, 1)?;
    let kmax = kmax_param(p)?;
    let density = target_density(p, dims, ctx)?;
    let s = sobolev_override(p, ctx)?;
    p.finish()?;

    let grid = wavevector_grid(dims, kmax, ctx)?;
    let target = TargetMeasure::from_density(&density, grid.clone()).within("indicators", ctx)?;
    let history = ingest_snapshots(path, None).within("cli_io", ctx)?;
    if history.m() != grid.len() {
        return Err(CliError::input(format!(
            "{} has {} rows; dims={dims}, kmax={kmax} needs {}",
            path.display(),
            history.m(),
            grid.len()
        )));
    }
    let columns: Vec<Vec<Complex64>> = (0..history.count()).map(|k| history.column(k).iter().copied().collect()).collect();
    let series = mixing_norm(&columns, &target, s).within("indicators", ctx)?;
    let mut out = Output::new();
    out.tables.push(series_table("series", &series));
    out.diag("kind", series.kind.as_str());
    if let Some(s) = series.s {
        out.diag("s", s.value());
    }
    out.diag("target", target.description);
    Ok(out)
}

fn parse_agents(text: &str) -> CliResult<Vec<Vec<f64>>> {
    text.split(':')
        .map(|a| {
            let xy = a.split('/').map(|v| v.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>();
            match xy {
                Ok(v) if v.len() == 2 && v.iter().all(|x| x.is_finite()) => Ok(v),
                _ => Err(CliError::input(format!("agent '{a}' is not of the form x/p"))),
            }
        })
        .collect()
}

/// Target density from a real grid file: rows along the first axis.
fn density_from_file(path: &Path, ctx: &str) -> CliResult<TargetDensity> {
    let m = ingest_snapshots(path, None).within("cli_io", ctx)?;
    let data = m.matrix();
    if data.iter().any(|z| z.im != 0.0) {
        return Err(CliError::input(format!("{}: density values must be real", path.display())));
    }
    let values = (0..data.nrows()).flat_map(|i| (0..data.ncols()).map(move |j| data[(i, j)].re)).collect();
    TargetDensity::grid(vec![data.nrows(), data.ncols()], values).within("indicators", ctx)
}

fn search(cfg: &RunConfig, p: &mut Params, ctx: &str) -> CliResult<Output> {
    let agents_text = p.opt_text("agents").unwrap_or_else(|| {
        p.note("agents", "0.25/0.25");
        "0.25/0.25".to_string()
    });
    let positions = parse_agents(&agents_text)?;
    let speed = p.f64("speed", 0.02)?;
    if speed < 0.0 {
        return Err(CliError::input("speed must be nonnegative"));
    }
    let dt = p.positive("dt", 1.0)?;
    let steps = p.usize_at_least("steps", 200, 0)?;
    let n_headings = p.usize_at_least("headings", 8, 1)?;
    let kmax = kmax_param(p)?;
    let s = sobolev_override(p, ctx)?;
    let density = match &cfg.source {
        Source::Input(path) => density_from_file(path, ctx)?,
        _ => target_density(p, 2, ctx)?,
    };
    p.finish()?;

    let domain = StateDomain::unit_torus(2);
    let target = TargetMeasure::from_density(&density, wavevector_grid(2, kmax, ctx)?).within("indicators", ctx)?;
    let agents: Vec<Agent> = positions.into_iter().map(|position| Agent { position, speed }).collect();
    let controls = compass_headings(n_headings);
    let run = coverage_rollout(&agents, &domain, &target, &controls, dt, steps, s).within("indicators", ctx)?;

    let mut paths = Table::new(
        "paths",
        &[("step", ColumnKind::Int), ("agent", ColumnKind::Int), ("x", ColumnKind::Real), ("p", ColumnKind::Real)],
    );
    for t in 0..=steps {
        for (a, path) in run.paths.iter().enumerate() {
            paths.push(vec![t.into(), a.into(), path[t][0].into(), path[t][1].into()]);
        }
    }
    let mut headings = Table::new(
        "headings",
        &[("step", ColumnKind::Int), ("agent", ColumnKind::Int), ("control", ColumnKind::Int), ("angle", ColumnKind::Real)],
    );
    for (t, chosen) in run.headings.iter().enumerate() {
        for (a, &c) in chosen.iter().enumerate() {
            headings.push(vec![(t + 1).into(), a.into(), c.into(), controls[c].into()]);
        }
    }
    let mut out = Output::new();
    out.tables.push(paths);
    out.tables.push(headings);
    out.tables.push(series_table("proxy", &run.proxy));
    out.diag("target", target.description);
    if let Some(s) = run.proxy.s {
        out.diag("s", s.value());
    }
    out.diag("agents", agents.len());
    Ok(out)
}
