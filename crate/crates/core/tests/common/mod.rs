#![allow(dead_code)]

use lifshitz::fdt::{CMatrix, QuantumSystem};
use lifshitz::Complex64;
use rand::Rng;

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Random system of dimension 2..=8 whose observables carry no part
/// commuting with H.
pub fn random_system<R: Rng>(rng: &mut R, observables: usize) -> QuantumSystem {
    let n = rng.gen_range(2..=8);
    let h = random_hermitian(rng, n);
    let beta = rng.gen_range(0.1..5.0);
    let raw: Vec<(String, CMatrix)> = (0..observables).map(|i| (format!("A{i}"), random_hermitian(rng, n))).collect();
    let bare = QuantumSystem::new(h.clone(), raw.clone(), beta).unwrap();
    let obs = raw.into_iter().map(|(name, a)| (name, bare.without_static_part(&a))).collect();
    QuantumSystem::new(h, obs, beta).unwrap()
}
