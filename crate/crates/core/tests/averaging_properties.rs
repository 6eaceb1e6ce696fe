use koopman_core::averaging::{adaptive_average, empirical_coeffs, fourier_average, AdaptiveAverager};
use koopman_core::dynamics::MapSystem;
use koopman_core::observables::{Observable, WavevectorGrid};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn zero_coefficient_is_one_and_coefficients_are_conjugate_symmetric(
        eps in 0.0f64..1.0, x in 0.0f64..1.0, y in 0.0f64..1.0, n in 1usize..400, kmax in 0i32..4,
    ) {
        let map = MapSystem::standard_map(eps).unwrap();
        let c = empirical_coeffs(&map, &[x, y], n, kmax).unwrap();
        prop_assert_eq!(c.coeffs[c.grid.zero_index()].re, 1.0);
        prop_assert_eq!(c.coeffs[c.grid.zero_index()].im, 0.0);
        for i in 0..c.grid.len() {
            prop_assert_eq!(c.coeffs[i], c.coeffs[c.grid.negated_index(i)].conj());
        }
    }

    #[test]
    fn resumed_adaptive_run_matches_a_fresh_one(x in 0.0f64..1.0, y in 0.0f64..1.0, first in 1usize..10, second in 10usize..20) {
        let map = MapSystem::standard_map(0.3).unwrap();
        let grid = WavevectorGrid::new(2, 2).unwrap();
        let mut resumed = AdaptiveAverager::new(&map, &[x, y], grid.clone(), 1e-12, 50).unwrap();
        resumed.run(&map, first * 50).unwrap();
        resumed.run(&map, second * 50).unwrap();
        let (fresh, report) = adaptive_average(&map, &grid, &[x, y], 1e-12, 50, second * 50).unwrap();
        prop_assert_eq!(resumed.coeffs(), fresh);
        prop_assert_eq!(resumed.report(), report);
    }

    #[test]
    fn average_is_bounded_by_the_observable(eps in 0.0f64..1.0, x in 0.0f64..1.0, y in 0.0f64..1.0, n in 1usize..300, omega in -0.5f64..0.5) {
        let map = MapSystem::standard_map(eps).unwrap();
        let obs = Observable::standard_map_probe();
        let orbit = map.orbit(&[x, y], n).unwrap();
        let bound = orbit.states.iter().map(|s| obs.eval(&map.domain, s).unwrap()[0].norm()).fold(0.0, f64::max);
        let avg = fourier_average(&map, &obs, &[x, y], n, omega).unwrap()[0];
        prop_assert!(avg.norm() <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn time_shift_changes_average_by_at_most_two_max_over_n(eps in 0.0f64..1.0, x in 0.0f64..1.0, y in 0.0f64..1.0, n in 1usize..300) {
        let map = MapSystem::standard_map(eps).unwrap();
        let obs = Observable::standard_map_probe();
        let shifted = map.step(&[x, y]).unwrap();
        let orbit = map.orbit(&[x, y], n + 1).unwrap();
        let max = orbit.states.iter().map(|s| obs.eval(&map.domain, s).unwrap()[0].norm()).fold(0.0, f64::max);
        let a = fourier_average(&map, &obs, &[x, y], n, 0.0).unwrap()[0];
        let b = fourier_average(&map, &obs, &shifted, n, 0.0).unwrap()[0];
        prop_assert!((a - b).norm() <= 2.0 * max / n as f64 + 1e-12);
    }
}
