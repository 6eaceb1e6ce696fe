//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use koopman_core::averaging::{convergence_slope, empirical_coeffs, fourier_average, map_seeds, seed_grid};
use koopman_core::dmd::{companion_dmd, svd_dmd, DEFAULT_RANK_TOL};
use koopman_core::dynamics::{
    heat_multiplier, heat_wavevectors, integrate_flow, Coordinate, FlowSystem, MapSystem, StateDomain,
};
use koopman_core::gla::fourier_projection_continuous;
use koopman_core::indicators::{
    ergodicity_ball_oracle, ergodicity_sobolev, log_checkpoints, BallQuadrature, TargetDensity, TargetMeasure,
};
use koopman_core::observables::{trace, Observable, Provenance, SnapshotMatrix, WavevectorGrid};
use koopman_core::quotient::{diffusion_maps, distance_matrix, kmeans, Bandwidth, SobolevIndex};
use koopman_core::stats::spearman;
use koopman_core::Result;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn nearest(values: &[Complex64], target: Complex64) -> f64 {
    values.iter().map(|z| (z - target).norm()).fold(f64::INFINITY, f64::min)
}

fn snapshots(map: &MapSystem, obs: &Observable, x0: &[f64], count: usize) -> Result<SnapshotMatrix> {
    trace(obs, &map.orbit(x0, count)?, &map.domain)
}

fn linear_spectrum() -> Result<Outcome> {
    let map = MapSystem::diagonal_linear(vec![0.9, 0.5])?;
    let s = snapshots(&map, &Observable::identity(2), &[1.0, -0.7], 3)?;
    let mut worst_err: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for res in [companion_dmd(&s)?, svd_dmd(&s, DEFAULT_RANK_TOL)?] {
        for lambda in [0.9, 0.5] {
            worst_err = worst_err.max(nearest(&res.values(), Complex64::new(lambda, 0.0)));
        }
        worst_res = worst_res.max(res.residual_norm);
    }
    outcome(worst_err <= 1e-8 && worst_res <= 1e-10, format!("max eigenvalue error {worst_err:.1e}, max residual {worst_res:.1e}"))
}

fn rotation_spectrum() -> Result<Outcome> {
    let omega = (5f64.sqrt() - 1.0) / 2.0;
    let map = MapSystem::circle_rotation(omega)?;
    let obs = Observable::composite(vec![Observable::harmonic(vec![1]), Observable::harmonic(vec![2])])?;
    let res = companion_dmd(&snapshots(&map, &obs, &[0.2], 3)?)?;
    let values = res.values();
    let err = [1.0, 2.0]
        .iter()
        .map(|n| nearest(&values, Complex64::from_polar(1.0, 2.0 * PI * n * omega)))
        .fold(0.0, f64::max);
    let modulus = values.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
    outcome(err <= 1e-6 && modulus <= 1e-6, format!("max eigenvalue error {err:.1e}, max |1 - |z|| {modulus:.1e}"))
}

fn heat_spectrum() -> Result<Outcome> {
    let (c, h) = (1.0, 0.01);
    let modes = heat_wavevectors(2);
    let map = MapSystem::heat_galerkin(c, h, modes.clone())?;
    let x0: Vec<f64> = (0..modes.len()).map(|i| 1.0 + 0.1 * i as f64).collect();
    let identity = Observable::identity(modes.len());
    // Six distinct decay rates, so six steps span the Krylov space.
    let comp = companion_dmd(&snapshots(&map, &identity, &x0, 7)?)?;
    let svd = svd_dmd(&snapshots(&map, &identity, &x0, 12)?, DEFAULT_RANK_TOL)?;
    let mut worst: f64 = 0.0;
    for j in &modes {
        let lambda = Complex64::new((-4.0 * PI * PI * c * c * ((j[0] * j[0] + j[1] * j[1]) as f64) * h).exp(), 0.0);
        assert!((lambda.re - heat_multiplier(c, h, *j)).abs() < 1e-15);
        worst = worst.max(nearest(&comp.values(), lambda)).max(nearest(&svd.values(), lambda));
    }
    outcome(worst <= 1e-6, format!("{} wavevectors, max eigenvalue error {worst:.1e}", modes.len()))
}

fn oscillator_mode() -> Result<Outcome> {
    let omega = 2.0;
    let flow = FlowSystem::harmonic_oscillator(omega)?;
    let period = 2.0 * PI / omega;
    let steps_per_period = 400;
    let dt = period / steps_per_period as f64;
    let traj = integrate_flow(&flow, &[0.8, 0.3], dt, 20 * steps_per_period)?;
    let snap = trace(&Observable::identity(2), &traj, &flow.domain)?;
    let mode = fourier_projection_continuous(&snap, omega / (2.0 * PI), dt)?.mode_at_p;
    let expected = [Complex64::new(1.0, 0.0), Complex64::new(0.0, omega)];
    let inner: Complex64 = expected.iter().zip(mode.iter()).map(|(a, b)| a.conj() * b).sum();
    let norm_e = expected.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let cosine = inner.norm() / (norm_e * mode.norm());
    outcome(cosine > 1.0 - 1e-4, format!("cosine similarity {cosine:.10}"))
}

fn period3_islands() -> Result<Outcome> {
    let map = MapSystem::standard_map(0.15)?;
    // Elliptic period-3 point on the x = 1/2 symmetry line.
    let center = [0.5, 0.369_820_371_759_281_4];
    let mut x = center.to_vec();
    for _ in 0..3 {
        map.advance(&mut x)?;
    }
    let gap = map.domain.distance(&x, &center);
    // The islands are narrow in p, so seeds are spread mostly along x.
    let offsets = [
        (0.0, 0.0),
        (0.01, 0.0),
        (-0.01, 0.0),
        (0.02, 0.0),
        (-0.02, 0.0),
        (0.03, 0.0),
        (-0.03, 0.0),
        (0.0, 0.005),
        (0.0, -0.005),
        (0.0, 0.01),
        (0.0, -0.01),
    ];
    let island: Vec<Vec<f64>> = offsets.iter().map(|(dx, dy)| vec![center[0] + dx, center[1] + dy]).collect();
    // Rotational circles between the rotation-1/3 and rotation-2/3 chains.
    let plain: Vec<Vec<f64>> = (0..10).map(|i| vec![0.1, 0.42 + 0.02 * i as f64]).collect();
    let probe = Observable::standard_map_probe();
    let modulus = |s: &[f64]| -> Result<f64> { Ok(fourier_average(&map, &probe, s, 100_000, 1.0 / 3.0)?[0].norm()) };
    let inside = map_seeds(&island, modulus)?;
    let outside = map_seeds(&plain, modulus)?;
    let min_in = inside.iter().copied().fold(f64::INFINITY, f64::min);
    let max_out = outside.iter().copied().fold(0.0, f64::max);
    let ratio = min_in / max_out;
    outcome(
        gap < 1e-10 && ratio >= 4.0,
        format!(
            "{} island seeds min {min_in:.3e}, {} plain seeds max {max_out:.3e}, ratio {ratio:.1}",
            island.len(),
            plain.len()
        ),
    )
}

fn convergence_rates() -> Result<Outcome> {
    let map = MapSystem::standard_map(0.18)?;
    let grid = WavevectorGrid::new(2, 5)?;
    let harmonics = Observable::composite(
        grid.vectors().iter().filter(|k| k.iter().any(|&v| v != 0)).map(|k| Observable::harmonic(k.clone())).collect(),
    )?;
    let n_ref = 1_000_000;
    let horizons = log_checkpoints(100, 100_000, 31);
    // The period-2 orbit through (0, 1/2) averages exactly at even horizons,
    // so the error is sampled at odd ones.
    let odd: Vec<usize> = horizons.iter().map(|n| n | 1).collect();
    let periodic = convergence_slope(&map, &harmonics, &[0.0, 0.5], &odd, n_ref)?;
    let chaotic = convergence_slope(&map, &harmonics, &[3.0 / 44.0, 7.0 / 44.0], &horizons, n_ref)?;
    let ok = (periodic.slope + 1.0).abs() <= 0.2 && (chaotic.slope + 0.5).abs() <= 0.2;
    outcome(ok, format!("periodic slope {:.3}, chaotic slope {:.3}", periodic.slope, chaotic.slope))
}

fn double_well_quotient() -> Result<Outcome> {
    let flow = FlowSystem::double_well(1.0, 2.0)?;
    let window = StateDomain::new(vec![Coordinate::Interval { lo: -1.6, hi: 1.6 }; 2]);
    let map = MapSystem::time_map(flow.clone(), 0.1, 2)?.with_domain(window)?;
    let seeds = seed_grid((-1.2, 1.2), (-0.8, 0.8), (45, 45))?;
    let set = map_seeds(&seeds, |s| empirical_coeffs(&map, s, 10_000, 3))?;
    let embedding = diffusion_maps(&distance_matrix(&set, SobolevIndex::for_dims(2))?, Bandwidth::Auto, 2)?;
    let chi = |c: usize| -> Vec<f64> { (0..seeds.len()).map(|i| embedding.point(i)[c]).collect() };
    let (chi1, chi2) = (chi(0), chi(1));

    let energy: Vec<f64> = seeds.iter().map(|s| flow.hamiltonian(s).expect("hamiltonian")).collect();
    let below: Vec<usize> = (0..seeds.len()).filter(|&i| energy[i] < 0.0).collect();
    let labels = kmeans(&chi1.iter().map(|&v| vec![v]).collect::<Vec<_>>(), 3)?;
    let majority: usize = (0..3)
        .map(|c| {
            let left = below.iter().filter(|&&i| labels[i] == c && seeds[i][0] < 0.0).count();
            let right = below.iter().filter(|&&i| labels[i] == c && seeds[i][0] > 0.0).count();
            left.max(right)
        })
        .sum();
    let purity = majority as f64 / below.len() as f64;

    let mut rho = Vec::new();
    for side in [-1.0, 1.0] {
        let well: Vec<usize> = below.iter().copied().filter(|&i| seeds[i][0] * side > 0.0).collect();
        let x: Vec<f64> = well.iter().map(|&i| chi2[i]).collect();
        let y: Vec<f64> = well.iter().map(|&i| energy[i].abs()).collect();
        rho.push(spearman(&x, &y));
    }
    let ok = purity >= 0.95 && rho.iter().all(|r| r.abs() > 0.9);
    outcome(
        ok,
        format!("{} seeds below separatrix, chi1 purity {purity:.4}, chi2 rank correlation per well {:.4} / {:.4}", below.len(), rho[0], rho[1]),
    )
}

fn norm_equivalence() -> Result<Outcome> {
    let torus = StateDomain::unit_torus(2);
    let n = 10_000;
    let alpha = [(5f64.sqrt() - 1.0) / 2.0, 2f64.sqrt() - 1.0];
    let trajectories = [
        MapSystem::standard_map(0.18)?.orbit(&[3.0 / 44.0, 7.0 / 44.0], n)?.states,
        MapSystem::standard_map(0.5)?.orbit(&[0.1, 0.2], n)?.states,
        (0..n).map(|i| vec![(i as f64 * alpha[0]).fract(), (i as f64 * alpha[1]).fract()]).collect(),
    ];
    let checkpoints = log_checkpoints(10, n, 20);
    let target = TargetMeasure::uniform(WavevectorGrid::new(2, 10)?);
    let mut rho = Vec::new();
    for states in &trajectories {
        let proxy = ergodicity_sobolev(&torus, states, &target, None, &checkpoints)?;
        let oracle =
            ergodicity_ball_oracle(&torus, states, &TargetDensity::uniform(2), BallQuadrature::default(), &checkpoints)?;
        rho.push(spearman(&proxy.series(), &oracle.series()));
    }
    let text: Vec<String> = rho.iter().map(|r| format!("{r:.4}")).collect();
    outcome(rho.iter().all(|&r| r > 0.95), format!("rank correlations {}", text.join(", ")))
}

fn residual_vanishing() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let m = rng.random_range(1..=6);
        let r = m + rng.random_range(1..=4);
        let columns: Vec<Vec<Complex64>> = (0..=r)
            .map(|_| (0..m).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
            .collect();
        let snap = SnapshotMatrix::from_columns(&columns, Provenance::Synthetic("random".into()))?;
        let scale = (0..=r).map(|k| snap.column(k).norm()).fold(0.0, f64::max);
        worst = worst.max(companion_dmd(&snap)?.residual_norm / scale);
    }
    outcome(worst <= 1e-10, format!("max relative residual over 20 instances {worst:.1e}"))
}

fn product_semigroup() -> Result<Outcome> {
    let map = MapSystem::diagonal_linear(vec![0.9, 0.5])?;
    let obs = Observable::composite(vec![
        Observable::coordinate(0),
        Observable::coordinate(1),
        Observable::product(vec![Observable::coordinate(0), Observable::coordinate(1)])?,
    ])?;
    let res = companion_dmd(&snapshots(&map, &obs, &[1.0, 0.8], 4)?)?;
    let err = nearest(&res.values(), Complex64::new(0.45, 0.0));
    outcome(err <= 1e-8, format!("distance to product eigenvalue {err:.1e}"))
}

type Criterion = fn() -> Result<Outcome>;

fn main() -> ExitCode {
    let criteria: [(&str, Criterion, u64); 10] = [
        ("linear spectrum", linear_spectrum, 1),
        ("rotation spectrum", rotation_spectrum, 1),
        ("heat spectrum", heat_spectrum, 5),
        ("oscillator normal mode", oscillator_mode, 5),
        ("period-3 islands", period3_islands, 120),
        ("convergence rates", convergence_rates, 300),
        ("double-well quotient", double_well_quotient, 600),
        ("Sobolev/ball equivalence", norm_equivalence, 120),
        ("residual vanishing", residual_vanishing, 1),
        ("product semigroup", product_semigroup, 1),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*limit);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} AC{} {name}: {detail} [{:.2}s, limit {limit}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
