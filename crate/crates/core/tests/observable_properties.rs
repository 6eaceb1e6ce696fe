use koopman_core::dynamics::{MapSystem, StateDomain};
use koopman_core::observables::{trace, Observable};
use proptest::prelude::*;

proptest! {
    #[test]
    fn harmonics_have_unit_modulus(k in prop::collection::vec(-8i32..=8, 2), x in prop::collection::vec(-10.0f64..10.0, 2)) {
        let torus = StateDomain::unit_torus(2);
        let z = Observable::harmonic(k).eval(&torus, &x).unwrap()[0];
        prop_assert!((z.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn negated_wavevector_gives_conjugate(k in prop::collection::vec(-8i32..=8, 2), x in prop::collection::vec(0.0f64..1.0, 2)) {
        let torus = StateDomain::unit_torus(2);
        let neg: Vec<i32> = k.iter().map(|v| -v).collect();
        let a = Observable::harmonic(k).eval(&torus, &x).unwrap()[0];
        let b = Observable::harmonic(neg).eval(&torus, &x).unwrap()[0];
        prop_assert!((a - b.conj()).norm() < 1e-14);
    }

    #[test]
    fn trace_matches_pointwise_evaluation(eps in 0.0f64..1.0, x in 0.0f64..1.0, y in 0.0f64..1.0, len in 2usize..60) {
        let map = MapSystem::standard_map(eps).unwrap();
        let traj = map.orbit(&[x, y], len).unwrap();
        let obs = Observable::composite(vec![
            Observable::harmonic(vec![1, -2]),
            Observable::coordinate(1),
            Observable::standard_map_probe(),
        ]).unwrap();
        let snap = trace(&obs, &traj, &map.domain).unwrap();
        prop_assert_eq!(snap.count(), traj.len());
        for (n, s) in traj.states.iter().enumerate() {
            let direct = obs.eval(&map.domain, s).unwrap();
            for (i, z) in direct.iter().enumerate() {
                prop_assert_eq!(snap.matrix()[(i, n)], *z);
            }
        }
    }
}
