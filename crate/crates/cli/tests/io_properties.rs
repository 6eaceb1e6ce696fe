use koopman_cli::io::{emit_snapshots_csv, format_complex, format_complex17, parse_complex, parse_snapshots_csv};
use koopman_core::observables::{Provenance, SnapshotMatrix};
use num_complex::Complex64;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), -1e3..1e3f64, Just(0.0), Just(-0.0)]
}

fn complex() -> impl Strategy<Value = Complex64> {
    (finite(), finite()).prop_map(|(re, im)| Complex64::new(re, im))
}

fn same(a: Complex64, b: Complex64) -> bool {
    a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
}

proptest! {
    #[test]
    fn complex_text_round_trips(z in complex()) {
        prop_assert!(same(parse_complex(&format_complex(z)).unwrap(), z));
        prop_assert!(same(parse_complex(&format_complex17(z)).unwrap(), z));
    }

    #[test]
    fn emitted_snapshots_ingest_identically(
        m in 1usize..5,
        count in 2usize..8,
        seed in proptest::collection::vec(complex(), 40),
    ) {
        let cols: Vec<Vec<Complex64>> =
            (0..count).map(|j| (0..m).map(|i| seed[(i * count + j) % seed.len()]).collect()).collect();
        let s = SnapshotMatrix::from_columns(&cols, Provenance::Synthetic("prop".into())).unwrap();
        let back = parse_snapshots_csv(&emit_snapshots_csv(&s), Provenance::Synthetic("prop".into())).unwrap();
        prop_assert_eq!((back.m(), back.count()), (m, count));
        for (a, b) in back.matrix().iter().zip(s.matrix().iter()) {
            prop_assert!(same(*a, *b));
        }
    }
}
