//! Permittivity and toy Green function properties.

use lifshitz::response::{PoleClass, ToyGreenModel};
use lifshitz::{Complex64, DispersionModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn probes(seed: u64, n: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| c(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0))).collect()
}

#[test]
fn plasma_even_and_drude_reflection_symmetric() {
    let p = probes(21, 1000);
    let plasma = DispersionModel::plasma(1.3).unwrap();
    let r = plasma.symmetry_report(&p, 1e-12).unwrap();
    assert_eq!(r.even_violation, 0.0);
    assert!(r.reflection_symmetric && r.real_on_imaginary_axis);
    for gamma in [0.01, 0.1, 1.0] {
        let drude = DispersionModel::drude(1.0, gamma).unwrap();
        let r = drude.symmetry_report(&p, 1e-12).unwrap();
        assert!(r.reflection_symmetric, "{r:?}");
        assert!(r.real_on_imaginary_axis);
        assert!(!r.even_in_omega);
    }
}

#[test]
fn drude_converges_to_plasma_linearly() {
    let w = c(0.7, 0.2);
    let plasma = DispersionModel::plasma(1.0).unwrap().permittivity(w).unwrap();
    let dist = |g: f64| (DispersionModel::drude(1.0, g).unwrap().permittivity(w).unwrap() - plasma).norm();
    let ratios: Vec<f64> = [1e-2, 5e-3, 2.5e-3, 1.25e-3].windows(2).map(|g| dist(g[0]) / dist(g[1])).collect();
    for q in ratios {
        assert!((q - 2.0).abs() < 0.02, "{q}");
    }
}

#[test]
fn drude_poles_approach_plasma_poles() {
    let g = 2.0;
    for gamma in [0.1, 0.05, 0.01, 0.001] {
        let drude = ToyGreenModel::new(g, DispersionModel::drude(1.0, gamma).unwrap()).unwrap();
        for p in drude.pole_catalog().poles.iter().filter(|p| p.class != PoleClass::Origin) {
            let target = c(p.location.re.signum(), 0.0);
            let d = (p.location - target).norm();
            assert!(d <= gamma + gamma * gamma, "gamma {gamma}: distance {d}");
        }
    }
}

#[test]
fn plasma_lines_odd_and_kms() {
    let beta = 1.7;
    let g = ToyGreenModel::new(0.8, DispersionModel::plasma(1.4).unwrap()).unwrap();
    let (im, _) = g.green_plasma_lines().unwrap();
    let lines = im.lines();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].frequency, -lines[1].frequency);
    assert_eq!(lines[0].weight, -lines[1].weight);
    let j = g.plasma_correlator_spectrum(beta).unwrap();
    let (neg, pos) = (j.weight_at(-1.4, 0.0).re, j.weight_at(1.4, 0.0).re);
    assert!((neg / pos - (-beta * 1.4f64).exp()).abs() < 1e-14);
}

proptest! {
    #[test]
    fn drude_real_and_above_one_on_imaginary_axis(zeta in 1e-6f64..1e3, gamma in 0.0f64..10.0, wp in 0.1f64..10.0) {
        let m = DispersionModel::drude(wp, gamma).unwrap();
        let e = m.permittivity(c(0.0, zeta)).unwrap();
        prop_assert!(e.im.abs() <= 1e-12 * e.re.abs());
        prop_assert!(e.re > 1.0);
    }

    #[test]
    fn partial_fractions(re in -4.0f64..4.0, im in -4.0f64..4.0, gamma in 0.001f64..0.9) {
        let w = c(re, im);
        let g = ToyGreenModel::new(1.0, DispersionModel::drude(1.0, gamma).unwrap()).unwrap();
        if let (Ok((d, _)), Ok(direct)) = (g.drude_decomposition(w), g.green_function(w)) {
            prop_assert!((d.total - direct).norm() <= 1e-12 * direct.norm().max(1e-300) * (1.0 + 1.0 / w.norm()));
        }
    }
}
