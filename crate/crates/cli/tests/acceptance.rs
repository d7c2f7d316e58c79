//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use lifshitz::casimir::{
    casimir_pressure, default_omega_cut, drude_anomaly, energy_imaginary_axis, energy_real_axis_per_k, free_energy_matsubara, ideal_metal_energy,
    ideal_metal_pressure, MatsubaraGrid,
};
use lifshitz::cavity::{dispersion_function, uhp_winding_number, CavityConfig, KPoint, Polarization};
use lifshitz::fdt::{conjugate, max_line_difference, CMatrix, Coupling, DrivingProtocol, QuantumSystem};
use lifshitz::response::{ToyGreenModel, Verdict};
use lifshitz::{Complex64, DispersionModel, LineSpectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&m + m.adjoint()) * c(0.5, 0.0)
}

/// Random system with observables stripped of the part commuting with H.
fn random_system(rng: &mut ChaCha8Rng, observables: usize) -> QuantumSystem {
    let n = rng.gen_range(2..=8);
    let h = random_hermitian(rng, n);
    let beta = rng.gen_range(0.1..5.0);
    let raw: Vec<(String, CMatrix)> = (0..observables).map(|i| (format!("A{i}"), random_hermitian(rng, n))).collect();
    let bare = QuantumSystem::new(h.clone(), raw.clone(), beta).unwrap();
    let obs = raw.into_iter().map(|(name, a)| (name, bare.without_static_part(&a))).collect();
    QuantumSystem::new(h, obs, beta).unwrap()
}

fn lines_scale(s: &LineSpectrum) -> f64 {
    s.lines().iter().fold(0.0_f64, |m, l| m.max(l.weight.norm())).max(1e-300)
}

fn fdt_exactness() -> Outcome {
    let two = QuantumSystem::two_level(1.0, 1.0).unwrap().fdt_verify(0).unwrap();
    let anchor = (two.lhs - 1.0).abs() < 1e-12 && (two.rhs - 1.0).abs() < 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = two.abs_error;
    for _ in 0..100 {
        let s = random_system(&mut rng, 1);
        match s.fdt_verify(0) {
            Ok(r) => worst = worst.max(r.abs_error),
            Err(e) => return outcome(false, format!("random system rejected: {e}")),
        }
    }
    outcome(anchor && worst < 1e-10, format!("two-level lhs {} rhs {}, worst |lhs-rhs| over 100 random systems {worst:.2e}", two.lhs, two.rhs))
}

fn oscillator_oracle() -> Outcome {
    let mut worst = 0.0_f64;
    let mut parts = Vec::new();
    for beta in [0.5, 1.0, 5.0] {
        let s = QuantumSystem::oscillator(40, 1.0, 1.0, beta).unwrap();
        let r = s.fdt_verify(0).unwrap();
        let exact = 0.5 / (0.5 * beta).tanh();
        let dev = (r.lhs - exact).abs();
        worst = worst.max(dev);
        parts.push(format!("beta {beta}: {dev:.2e}"));
    }
    outcome(worst < 1e-8, format!("|<x^2> - coth oracle| {}", parts.join(", ")))
}

fn kms_and_symmetries() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = [0.0_f64; 7];
    for _ in 0..100 {
        let s = random_system(&mut rng, 2);
        let kms = s.kms_check(0, 1).unwrap().max_ratio_error.max(s.kms_check(0, 0).unwrap().max_ratio_error);
        worst[0] = worst[0].max(kms);

        let ts: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..20.0)).collect();
        let gt: Vec<Complex64> = ts.iter().map(|&t| s.retarded_green_time(0, 1, t).unwrap()).collect();
        let scale_t = gt.iter().fold(1e-300_f64, |m, g| m.max(g.norm()));
        for (&t, g) in ts.iter().zip(&gt) {
            let adv = s.advanced_green_time(1, 0, -t).unwrap();
            worst[1] = worst[1].max((g - adv).norm() / scale_t);
            worst[3] = worst[3].max(g.im.abs() / scale_t);
            worst[3] = worst[3].max(adv.im.abs() / scale_t);
        }

        for _ in 0..8 {
            let w = c(rng.gen_range(-5.0..5.0), rng.gen_range(0.01..3.0));
            let gr = s.retarded_green(0, 1, w).unwrap();
            let ga = s.advanced_green(1, 0, -w).unwrap();
            let scale = gr.norm().max(1e-300);
            worst[2] = worst[2].max((gr - ga).norm() / scale);
            let mirrored = s.retarded_green(0, 1, -w.conj()).unwrap();
            worst[6] = worst[6].max((gr.conj() - mirrored).norm() / scale);
        }

        let j01 = s.correlator_line_spectrum(0, 1).unwrap();
        let j10 = s.correlator_line_spectrum(1, 0).unwrap();
        let tol = 1e-9;
        let sc = lines_scale(&j01);
        worst[4] = worst[4].max(max_line_difference(&j01, &conjugate(&j10), tol) / sc);

        let beta = s.beta();
        let weighted = |f: &dyn Fn(f64) -> f64| {
            let lines = j01.lines().iter().map(|l| lifshitz::SpectralLine { frequency: l.frequency, weight: l.weight * f(l.frequency) }).collect();
            LineSpectrum::from_lines(lines, 0.0)
        };
        let sym = weighted(&|w| 0.5 * (1.0 + (-beta * w).exp()));
        let com = weighted(&|w| -(-beta * w).exp_m1());
        worst[5] = worst[5].max(max_line_difference(&s.symmetrized_spectrum(0, 1).unwrap(), &sym, tol) / sc);
        worst[5] = worst[5].max(max_line_difference(&s.commutator_spectrum(0, 1).unwrap(), &com, tol) / sc);
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    outcome(
        max < 1e-10,
        format!(
            "max violation {max:.2e} (kms {:.1e}, time {:.1e}, freq {:.1e}, real kernel {:.1e}, J conj {:.1e}, sym/comm {:.1e}, reflection {:.1e}) over 100 draws",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5], worst[6]
        ),
    )
}

fn linear_response_scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ratios = Vec::new();
    let mut ok = true;
    let drive = |obs: usize| DrivingProtocol { amplitude: 0.005, switch_rate: 0.2, frequency: 0.7, couplings: vec![Coupling { observable: obs, phase: 0.0 }] };
    let mut systems = vec![QuantumSystem::two_level(1.0, 1.0).unwrap()];
    for _ in 0..3 {
        systems.push(random_system(&mut rng, 1));
    }
    for s in &systems {
        match s.response_scaling_check(0, &drive(0), 10.0, 11) {
            Ok(r) => ratios.extend(r.ratios),
            Err(e) => {
                ok = false;
                ratios.push(f64::NAN);
                eprintln!("  scaling check failed: {e}");
            }
        }
    }
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome(ok && min >= 3.5, format!("smallest error ratio per halving of F0: {min:.3} over {} halvings", ratios.len()))
}

fn pole_structure() -> Outcome {
    let plasma = ToyGreenModel::new(1.0, DispersionModel::plasma(1.0).unwrap()).unwrap();
    let pc = plasma.pole_catalog();
    let mut locs: Vec<Complex64> = pc.poles.iter().map(|p| p.location).collect();
    locs.sort_by(|a, b| a.re.total_cmp(&b.re));
    let plasma_ok = locs.len() == 2 && (locs[0] - c(-1.0, 0.0)).norm() < 1e-12 && (locs[1] - c(1.0, 0.0)).norm() < 1e-12;

    let gamma = 0.1;
    let drude = ToyGreenModel::new(1.0, DispersionModel::drude(1.0, gamma).unwrap()).unwrap();
    let wt = (1.0 - gamma * gamma).sqrt();
    let mut dl: Vec<Complex64> = drude.pole_catalog().poles.iter().map(|p| p.location).collect();
    dl.sort_by(|a, b| a.re.total_cmp(&b.re));
    let expected = [c(-wt, -gamma), c(0.0, 0.0), c(wt, -gamma)];
    let drude_ok = dl.len() == 3 && dl.iter().zip(&expected).all(|(a, b)| (a - b).norm() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pf = 0.0_f64;
    for _ in 0..100 {
        let w = c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let (d, _) = drude.drude_decomposition(w).unwrap();
        let direct = drude.green_function(w).unwrap();
        pf = pf.max((d.total - direct).norm() / direct.norm());
    }
    let verdicts = plasma.fdt_compatibility_report(1.0).unwrap().verdict == Verdict::Compatible
        && drude.fdt_compatibility_report(1.0).unwrap().verdict == Verdict::Incompatible;
    outcome(
        plasma_ok && drude_ok && pf < 1e-12 && verdicts,
        format!("plasma poles {plasma_ok}, Drude poles {drude_ok}, partial fractions {pf:.2e}, verdicts {verdicts}"),
    )
}

fn contour_rotation() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut worst_rel = 0.0_f64;
    let mut worst_abs = 0.0_f64;
    let model = DispersionModel::plasma(1.0).unwrap();
    for a in [0.5, 1.0, 2.0] {
        for k in [0.5, 1.0, 2.0] {
            for sigma in Polarization::BOTH {
                let cfg = CavityConfig::new(a, model, sigma).unwrap();
                let kp = KPoint::new(k, &model).unwrap();
                let cut = default_omega_cut(&cfg, &kp, 1e-12);
                match energy_real_axis_per_k(&cfg, &kp, cut) {
                    Ok(r) => {
                        ok &= r.within_bounds();
                        worst_abs = worst_abs.max(r.mismatch);
                        worst_rel = worst_rel.max(r.mismatch / r.imaginary_axis_part.abs());
                    }
                    Err(e) => {
                        ok = false;
                        eprintln!("  a {a} k {k} {sigma:?}: {e}");
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(ok && worst_rel <= 1e-3 && secs < 600.0, format!("18 cases, worst mismatch {worst_abs:.2e} (relative {worst_rel:.2e}), {secs:.1}s"))
}

/// ∫₀^∞ k ln(1 − r_TE(0,k)² e^{−4ak}) dk for the plasma model, ω_p = 1, by
/// composite Simpson.
fn te_static_term(a: f64) -> f64 {
    let f = |k: f64| {
        if k == 0.0 {
            return 0.0;
        }
        let q = (k * k + 1.0).sqrt();
        let r = (k - q) / (k + q);
        k * (-(r * r) * (-4.0 * a * k).exp()).ln_1p()
    };
    let (hi, n) = (40.0 / a, 200_000);
    let h = hi / n as f64;
    let mut s = f(0.0) + f(hi);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn matsubara_route() -> Outcome {
    let cfg = CavityConfig::new(1.0, DispersionModel::plasma(1.0).unwrap(), Polarization::TM).unwrap();
    let e = energy_imaginary_axis(&cfg).unwrap().value;
    let mut errs = Vec::new();
    for x in [50.0, 100.0, 200.0] {
        let grid = MatsubaraGrid::new(1.0 / x).unwrap();
        let f = free_energy_matsubara(&cfg, &grid).unwrap().value;
        errs.push(((f - e) / e).abs());
    }
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    let t = 0.5;
    let a = 1.0;
    let f_high = free_energy_matsubara(&cfg, &MatsubaraGrid::new(t).unwrap()).unwrap().value;
    let zeta3 = 1.202_056_903_159_594_2;
    let single = t / (4.0 * PI) * (-zeta3 / (16.0 * a * a) + te_static_term(a));
    let high_dev = ((f_high - single) / single).abs();
    outcome(
        monotone && errs[2] <= 1e-3 && high_dev < 0.01,
        format!(
            "relative error {:.2e}, {:.2e}, {:.2e} at x = 50, 100, 200; high-T single term off by {:.2e}",
            errs[0], errs[1], errs[2], high_dev
        ),
    )
}

fn ideal_metal_limit() -> Outcome {
    let model = DispersionModel::plasma(1.0).unwrap();
    let cfg = CavityConfig::new(50.0, model, Polarization::TM).unwrap();
    let e = energy_imaginary_axis(&cfg).unwrap().value / ideal_metal_energy(100.0);
    let p = casimir_pressure(&cfg, None).unwrap().value / ideal_metal_pressure(100.0);
    let scaled: Vec<f64> = [50.0, 100.0, 200.0]
        .iter()
        .map(|&a| energy_imaginary_axis(&cfg.with_half_gap(a)).unwrap().value * (2.0 * a).powi(3))
        .collect();
    let hi = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = (hi - lo) / hi.abs().max(lo.abs());
    outcome(
        (e - 1.0).abs() < 0.05 && (p - 1.0).abs() < 0.05 && spread < 0.05,
        format!("E/E_ideal {e:.4}, P/P_ideal {p:.4}, E(2a)^3 spread {spread:.4} over a in [50, 200]"),
    )
}

fn analyticity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let plasma = DispersionModel::plasma(1.0).unwrap();
    let drude = DispersionModel::drude(1.0, 0.1).unwrap();
    let mut ok = true;
    let mut notes = Vec::new();

    // i) decay of D − 1 on rays of the closed upper half-plane
    for model in [plasma, drude] {
        for sigma in Polarization::BOTH {
            let cfg = CavityConfig::new(1.0, model, sigma).unwrap();
            let kp = KPoint::new(0.5, &model).unwrap();
            let mut prev = f64::INFINITY;
            for r in [10.0, 30.0, 100.0] {
                let m = (0..=16)
                    .map(|j| {
                        let th = PI * j as f64 / 16.0;
                        let d = dispersion_function(c(r * th.cos(), r * th.sin()), &cfg, &kp).unwrap();
                        (d - 1.0).norm()
                    })
                    .fold(0.0, f64::max);
                ok &= m < prev;
                prev = m;
            }
            ok &= prev < 1e-3;
        }
    }
    notes.push(format!("decay {ok}"));

    // ii) ω → −ω
    let mut sym = [0.0_f64; 2];
    for (slot, model) in [plasma, drude].into_iter().enumerate() {
        for sigma in Polarization::BOTH {
            let cfg = CavityConfig::new(1.0, model, sigma).unwrap();
            for _ in 0..500 {
                let kp = KPoint::new(rng.gen_range(0.05..3.0), &model).unwrap();
                let w = c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
                if let (Ok(d1), Ok(d2)) = (dispersion_function(w, &cfg, &kp), dispersion_function(-w, &cfg, &kp)) {
                    sym[slot] = sym[slot].max((d1 - d2).norm() / d1.norm().max(1.0));
                }
            }
        }
    }
    ok &= sym[0] < 1e-12 && sym[1] > 1e-6;
    notes.push(format!("plasma symmetry {:.1e}, Drude violation {:.1e}", sym[0], sym[1]));

    // iii) reality on the imaginary axis
    let mut im = 0.0_f64;
    for model in [plasma, drude] {
        for sigma in Polarization::BOTH {
            let cfg = CavityConfig::new(1.0, model, sigma).unwrap();
            for _ in 0..500 {
                let kp = KPoint::new(rng.gen_range(0.01..5.0), &model).unwrap();
                let d = dispersion_function(c(0.0, rng.gen_range(0.01..5.0)), &cfg, &kp).unwrap();
                im = im.max(d.im.abs());
            }
        }
    }
    ok &= im < 1e-12;
    notes.push(format!("Im D(i zeta) {im:.1e}"));

    // iv) no zeros in the upper half-plane
    let mut windings = Vec::new();
    for model in [plasma, drude] {
        for sigma in Polarization::BOTH {
            let cfg = CavityConfig::new(1.0, model, sigma).unwrap();
            let kp = KPoint::new(1.0, &model).unwrap();
            let w = uhp_winding_number(&cfg, &kp, 0.1, 3.0, 0.1, 3.0).map(|r| r.winding).unwrap_or(i64::MIN);
            windings.push(w);
        }
    }
    ok &= windings.iter().all(|&w| w == 0);
    notes.push(format!("windings {windings:?}"));
    outcome(ok, notes.join(", "))
}

fn drude_anomaly_term() -> Outcome {
    let t = 0.1;
    let zero_cfg = CavityConfig::new(1.0, DispersionModel::drude(1.0, 0.0).unwrap(), Polarization::TM).unwrap();
    let z = drude_anomaly(&zero_cfg, t, 20).unwrap().value;
    let mut ok = z.re == 0.0 && z.im == 0.0;
    let mut parts = vec![format!("gamma 0: {z}")];
    for gamma in [1e-3, 1e-2, 1e-1] {
        let cfg = CavityConfig::new(1.0, DispersionModel::drude(1.0, gamma).unwrap(), Polarization::TM).unwrap();
        match drude_anomaly(&cfg, t, 20) {
            Ok(r) => {
                let noise = r.noise_floor + r.tail_bound;
                let mag = r.value.norm();
                ok &= mag > 10.0 * noise && r.value.re.abs() < 1e-10 * mag;
                parts.push(format!("gamma {gamma}: {:.3e}i (noise {noise:.1e}, |Re| {:.1e})", r.value.im, r.value.re.abs()));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("gamma {gamma}: {e}"));
            }
        }
    }
    outcome(ok, parts.join("; "))
}

fn run_cli(args: &[&str], threads: &str) -> (Vec<u8>, Option<i32>) {
    let out = Command::new(env!("CARGO_BIN_EXE_lifshitz")).args(args).env("LIFSHITZ_THREADS", threads).output().unwrap();
    (out.stdout, out.status.code())
}

fn determinism() -> Outcome {
    let invocations: [&[&str]; 7] = [
        &["energy", "--model", "plasma", "--omega-p", "1", "--a", "1"],
        &["spectrum", "--sigma", "TM", "--k", "1", "--a", "1"],
        &["equivalence-check", "--sigma", "TE", "--k", "0.5", "--a", "1"],
        &["fdt-check", "--preset", "oscillator:12", "--beta", "2"],
        &["poles", "--model", "drude", "--gamma", "0.1"],
        &["free-energy", "--t", "0.05", "--sweep", "a=0.5,1,1.5,2"],
        &["anomaly", "--t", "0.1", "--sweep", "gamma=0,0.1", "--csv"],
    ];
    let mut ok = true;
    for args in invocations {
        let (first, c1) = run_cli(args, "1");
        let (second, c2) = run_cli(args, "4");
        let same = first == second && c1 == c2 && c1 == Some(0) && !first.is_empty();
        if !same {
            eprintln!("  {} differs between runs or failed ({c1:?}, {c2:?})", args.join(" "));
        }
        ok &= same;
    }
    outcome(ok, format!("{} invocations repeated with 1 and 4 threads", invocations.len()))
}

fn main() {
    // `cargo test` passes harness flags such as --nocapture; a name filter
    // restricts the run to matching criteria.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("fdt_exactness", fdt_exactness),
        ("oscillator_oracle", oscillator_oracle),
        ("kms_and_symmetries", kms_and_symmetries),
        ("linear_response_scaling", linear_response_scaling),
        ("pole_structure", pole_structure),
        ("contour_rotation", contour_rotation),
        ("matsubara_route", matsubara_route),
        ("ideal_metal_limit", ideal_metal_limit),
        ("analyticity", analyticity),
        ("drude_anomaly", drude_anomaly_term),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = std::panic::catch_unwind(f).unwrap_or_else(|_| outcome(false, "panicked".into()));
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {} {name}: {tag} ({:.1}s) {}", i + 1, start.elapsed().as_secs_f64(), o.detail);
        if !o.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
