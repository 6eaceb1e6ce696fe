use koopman_core::averaging::CoeffAccumulator;
use koopman_core::dynamics::{MapSystem, StateDomain};
use koopman_core::indicators::{
    candidate_proxies, compass_headings, ergodicity_sobolev, greedy_coverage_step, log_checkpoints, mixing_norm, Agent,
    TargetDensity, TargetMeasure,
};
use koopman_core::observables::WavevectorGrid;
use koopman_core::quotient::SobolevIndex;
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ergodicity_values_are_nonnegative(eps in 0.0f64..1.0, x in 0.0f64..1.0, y in 0.0f64..1.0, cx in 0.0f64..1.0, sigma in 0.05f64..0.5) {
        let map = MapSystem::standard_map(eps).unwrap();
        let orbit = map.orbit(&[x, y], 300).unwrap();
        let density = TargetDensity::wrapped_gaussian(vec![cx, 0.5], sigma).unwrap();
        let target = TargetMeasure::from_density(&density, WavevectorGrid::new(2, 3).unwrap()).unwrap();
        let s = ergodicity_sobolev(&map.domain, &orbit.states, &target, None, &log_checkpoints(1, 300, 10)).unwrap();
        prop_assert!(s.values.iter().all(|&(_, v)| v >= 0.0));
        prop_assert!(s.values.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn mixing_norm_is_zero_only_on_the_target(re in -0.5f64..0.5, im in -0.5f64..0.5, idx in 0usize..25) {
        let grid = WavevectorGrid::new(2, 2).unwrap();
        let target = TargetMeasure::uniform(grid);
        let mut moved = target.coeffs.clone();
        moved[idx] += Complex64::new(re, im);
        let m = mixing_norm(&[target.coeffs.clone(), moved], &target, None).unwrap();
        prop_assert_eq!(m.values[0].1, 0.0);
        prop_assert_eq!(m.values[1].1 == 0.0, re == 0.0 && im == 0.0);
    }

    #[test]
    fn greedy_choice_attains_the_exhaustive_minimum(
        px in 0.0f64..1.0, py in 0.0f64..1.0, cx in 0.0f64..1.0, cy in 0.0f64..1.0, speed in 0.01f64..0.2, headings in 3usize..12,
    ) {
        let torus = StateDomain::unit_torus(2);
        let density = TargetDensity::wrapped_gaussian(vec![cx, cy], 0.1).unwrap();
        let target = TargetMeasure::from_density(&density, WavevectorGrid::new(2, 4).unwrap()).unwrap();
        let controls = compass_headings(headings);
        let mut running = CoeffAccumulator::new(target.grid.clone(), 0.0);
        let mut scratch = Vec::new();
        running.push(&torus, &[px, py], &mut scratch).unwrap();
        let agent = Agent { position: vec![px, py], speed };
        let proxies = candidate_proxies(&agent, &running, &torus, &target, &controls, 1.0, SobolevIndex::for_dims(2)).unwrap();
        let best = proxies.iter().copied().fold(f64::INFINITY, f64::min);
        let mut agents = vec![agent];
        let chosen = greedy_coverage_step(&mut agents, &mut running, &torus, &target, &controls, 1.0, None).unwrap();
        prop_assert!(proxies[chosen[0]] <= best + 1e-12);
        prop_assert!(proxies[..chosen[0]].iter().all(|&p| p > best + 1e-12));
    }
}
