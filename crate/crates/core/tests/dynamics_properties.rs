use koopman_core::dynamics::{integrate_flow, standard_map_jacobian, FlowSystem, MapSystem};
use proptest::prelude::*;

proptest! {
    #[test]
    fn standard_map_jacobian_has_unit_determinant(eps in -2.0f64..2.0, x in 0.0f64..1.0) {
        let j = standard_map_jacobian(eps, x);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        prop_assert!((det - 1.0).abs() <= 4.0 * f64::EPSILON * (1.0 + j[0][1].abs() * j[1][0].abs()));
    }

    #[test]
    fn standard_map_stays_on_the_torus(eps in -1.0f64..1.0, x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let map = MapSystem::standard_map(eps).unwrap();
        let orbit = map.orbit(&[x, y], 200).unwrap();
        for s in &orbit.states {
            prop_assert!(s.iter().all(|v| (0.0..1.0).contains(v)), "{:?}", s);
        }
    }

    #[test]
    fn orbits_are_bit_identical(eps in 0.0f64..1.0, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let map = MapSystem::standard_map(eps).unwrap();
        let a = map.orbit(&[x, y], 500).unwrap();
        let b = map.orbit(&[x, y], 500).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn rotation_wraps_into_unit_interval(omega in -5.0f64..5.0, x in -2.0f64..2.0) {
        let map = MapSystem::circle_rotation(omega).unwrap();
        for s in &map.orbit(&[x], 100).unwrap().states {
            prop_assert!((0.0..1.0).contains(&s[0]));
        }
    }
}

#[test]
fn double_well_energy_drift_is_small() {
    let flow = FlowSystem::double_well(1.0, 2.0).unwrap();
    for x0 in [[0.3, 0.2], [-0.9, 0.1], [1.1, -0.6], [0.05, 0.01]] {
        let traj = integrate_flow(&flow, &x0, 1e-3, 10_000).unwrap();
        let h0 = flow.hamiltonian(&x0).unwrap();
        let h1 = flow.hamiltonian(traj.last()).unwrap();
        assert!((h1 - h0).abs() <= 1e-8 * h0.abs().max(1e-3), "{x0:?}: {h0} -> {h1}");
    }
}

#[test]
fn flow_sampling_is_deterministic() {
    let flow = FlowSystem::hill_vortex(0.5, 0.1).unwrap();
    let a = integrate_flow(&flow, &[0.3, 0.1, 0.0], 0.01, 500).unwrap();
    let b = integrate_flow(&flow, &[0.3, 0.1, 0.0], 0.01, 500).unwrap();
    assert_eq!(a, b);
    assert!(a.states.iter().all(|s| (0.0..2.0 * std::f64::consts::PI).contains(&s[2])));
}
