mod common;

use lifshitz::fdt::{conjugate, max_line_difference, FdtError, QuantumSystem};
use lifshitz::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fdt_holds_for_random_systems(seed in any::<u64>()) {
        let s = common::random_system(&mut ChaCha8Rng::seed_from_u64(seed), 1);
        let r = s.fdt_verify(0).unwrap();
        prop_assert!(r.abs_error < 1e-10, "{:?}", r);
    }

    #[test]
    fn green_symmetries(seed in any::<u64>(), t in 0.0f64..30.0, re in -5.0f64..5.0, im in 0.001f64..3.0) {
        let s = common::random_system(&mut ChaCha8Rng::seed_from_u64(seed), 2);
        let gr = s.retarded_green_time(0, 1, t).unwrap();
        let ga = s.advanced_green_time(1, 0, -t).unwrap();
        let scale = gr.norm().max(1e-3);
        prop_assert!((gr - ga).norm() < 1e-10 * scale);
        prop_assert!(gr.im.abs() < 1e-10 * scale);
        let w = Complex64::new(re, im);
        let fr = s.retarded_green(0, 1, w).unwrap();
        prop_assert!((fr - s.advanced_green(1, 0, -w).unwrap()).norm() < 1e-10 * fr.norm());
        prop_assert!((fr.conj() - s.retarded_green(0, 1, -w.conj()).unwrap()).norm() < 1e-10 * fr.norm());
    }

    #[test]
    fn spectral_relations(seed in any::<u64>()) {
        let s = common::random_system(&mut ChaCha8Rng::seed_from_u64(seed), 2);
        let j01 = s.correlator_line_spectrum(0, 1).unwrap();
        let j10 = s.correlator_line_spectrum(1, 0).unwrap();
        prop_assert!(max_line_difference(&j01, &conjugate(&j10), 1e-9) < 1e-12 * j01.scale().max(1e-300));
        prop_assert!(s.kms_check(0, 1).unwrap().max_ratio_error < 1e-10);
    }
}

#[test]
fn static_part_is_surfaced() {
    // σ_z commutes with H = ½σ_z: all its weight sits at ω = 0
    let h = lifshitz::fdt::parse_complex_matrix("0.5 0 0 0\n0 0 -0.5 0").unwrap();
    let sz = lifshitz::fdt::parse_complex_matrix("1 0 0 0\n0 0 -1 0").unwrap();
    let s = QuantumSystem::new(h, vec![("sz".into(), sz)], 1.0).unwrap();
    assert!(matches!(s.fdt_verify(0), Err(FdtError::ZeroFrequencyLine { .. })));
}

#[test]
fn oscillator_converges_with_dimension() {
    let exact = 0.5 / (0.25f64).tanh();
    let dev = |dim| (QuantumSystem::oscillator(dim, 1.0, 1.0, 0.5).unwrap().fdt_verify(0).unwrap().lhs - exact).abs();
    assert!(dev(40) < dev(20));
    assert!(dev(80) < 1e-12, "{}", dev(80));
    assert!(dev(40) <= lifshitz::fdt::oscillator_truncation_bound(40, 1.0, 1.0, 0.5));
}

#[test]
fn matrix_parser_rejects_malformed_input() {
    assert!(lifshitz::fdt::parse_complex_matrix("1 0 2\n").is_err());
    assert!(lifshitz::fdt::parse_complex_matrix("1 0 2 0\n1 0\n").is_err());
    assert!(lifshitz::fdt::parse_complex_matrix("# only a comment\n").is_err());
    assert!(lifshitz::fdt::parse_complex_matrix("1 0 x 0\n0 0 1 0").is_err());
}
