//! Casimir energies, free energies and pressures per unit plate area.
//!
//! Zero temperature:
//! E(2a) = (1/2π) Σ_σ ∫ k dk/2π ∫₀^∞ dζ ln D_σ(iζ, k),
//! finite temperature:
//! 𝓕(2a) = T Σ_σ ∫ k dk/2π Σ′_m ln D_σ(iζ_m, k), ζ_m = 2πmT.
//!
//! Both sums over σ run over TE and TM regardless of `config.polarization`.
//! The per-k real-axis bracket ([`energy_real_axis_per_k`]) is the spectral
//! sum over modes and the continuum phase shift, kept separate from the
//! imaginary-axis integral so the two can be compared.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::cavity::{
    band_phase, dispersion_function, find_modes, log_dispersion_imaginary_axis, log_dispersion_negative_imaginary_axis,
    surface_plasmon_pole, CavityConfig, CavityError, KPoint, ModeSpectrum, Polarization,
};
use crate::quad::{
    differentiate_richardson, integrate_panels, integrate_partition, integrate_with, semi_infinite_partition, semi_infinite_with,
    sum_ascending,
    QuadError, Tolerance,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CasimirError {
    #[error(transparent)]
    Cavity(#[from] CavityError),
    #[error(transparent)]
    Numerics(#[from] QuadError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("D = {value} <= 0 at zeta = {zeta}, k = {k}")]
    NonPositiveD { zeta: f64, k: f64, value: f64 },
    #[error("oscillator free energy diverges at omega = 0, T > 0")]
    DivergentFreeEnergy,
    #[error("differencing step reached the quadrature noise floor (relative error {relative_error})")]
    StepUnderflow { relative_error: f64 },
    #[error("oscillatory sum not converged: tail estimate {tail} vs value {value}")]
    OscillatoryDivergence { tail: f64, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Route {
    ImaginaryAxis,
    Matsubara,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    /// Where the outer sum or integral was cut (ρ, ζ or Matsubara index).
    pub cutoff: f64,
    /// Analytic bound on everything beyond the cutoff.
    pub tail_bound: f64,
    /// Summed quadrature error estimates.
    pub quadrature_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyResult {
    pub value: f64,
    pub route: Route,
    /// Contributions of TE and TM, in that order.
    pub by_polarization: [f64; 2],
    pub truncation_report: TruncationReport,
}

impl EnergyResult {
    pub fn error_bound(&self) -> f64 {
        self.truncation_report.tail_bound + self.truncation_report.quadrature_error
    }
}

/// −π²/(720 L³) with L = 2a.
pub fn ideal_metal_energy(gap: f64) -> f64 {
    -PI.powi(2) / (720.0 * gap.powi(3))
}

/// −π²/(240 L⁴) with L = 2a.
pub fn ideal_metal_pressure(gap: f64) -> f64 {
    -PI.powi(2) / (240.0 * gap.powi(4))
}

pub const DEFAULT_REL_TOL: f64 = 1e-10;

type Slot = RefCell<Option<CasimirError>>;

fn stash(slot: &Slot, e: CasimirError) {
    slot.borrow_mut().get_or_insert(e);
}

fn take(slot: &Slot) -> Result<(), CasimirError> {
    match slot.borrow_mut().take() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn checked_log(cfg: &CavityConfig, zeta: f64, k: f64) -> Result<f64, CasimirError> {
    let l = log_dispersion_imaginary_axis(cfg, zeta, k);
    if l.is_finite() {
        Ok(l)
    } else {
        let value = crate::cavity::dispersion_imaginary_axis(cfg, zeta, k);
        Err(CasimirError::NonPositiveD { zeta, k, value })
    }
}

/// ∫ ρ² e^{−ρ}/(1 − e^{−R}) over (R, ∞), the tail of the normalised polar integral.
fn polar_tail(r: f64) -> f64 {
    (-r).exp() * (r * r + 2.0 * r + 2.0) / -(-r).exp_m1()
}

/// Zero-temperature energy by the imaginary-axis route.
pub fn energy_imaginary_axis(config: &CavityConfig) -> Result<EnergyResult, CasimirError> {
    energy_imaginary_axis_with(config, DEFAULT_REL_TOL)
}

/// Polar coordinates ζ = ρ sin θ, k = ρ cos θ and ρ = u/4a give
/// E = (1/(2π)²)(1/4a)³ Σ_σ ∫ u² du ∫₀^{π/2} cos θ ln D dθ.
pub fn energy_imaginary_axis_with(config: &CavityConfig, rel_tol: f64) -> Result<EnergyResult, CasimirError> {
    if !(rel_tol > 0.0) {
        return Err(CasimirError::InvalidParameter("tolerance must be positive".into()));
    }
    let four_a = 4.0 * config.half_gap;
    let prefactor = 1.0 / ((2.0 * PI).powi(2) * four_a.powi(3));
    let mut by = [0.0; 2];
    let mut quad_err = 0.0;
    let mut evaluations = 0;
    let mut cutoff: f64 = 40.0;
    for (i, sigma) in Polarization::BOTH.into_iter().enumerate() {
        let cfg = config.with_polarization(sigma);
        let slot: Slot = RefCell::new(None);
        let inner = |u: f64| -> f64 {
            let rho = u / four_a;
            let res = integrate_with(
                |th: f64| {
                    let (s, c) = th.sin_cos();
                    match checked_log(&cfg, rho * s, rho * c) {
                        Ok(l) => c * l,
                        Err(e) => {
                            stash(&slot, e);
                            0.0
                        }
                    }
                },
                0.0,
                0.5 * PI,
                Tolerance::relative(0.05 * rel_tol).with_abs(1e-300),
            );
            match res {
                Ok(r) => u * u * r.value,
                Err(e) => {
                    stash(&slot, e.into());
                    0.0
                }
            }
        };
        // grow the radial cutoff until the analytic tail is negligible
        let mut breaks = vec![0.0, 0.5, 2.0, 8.0, 20.0, cutoff];
        let (res, ok) = loop {
            let (res, ok) = integrate_partition(&inner, &breaks, Tolerance::relative(0.5 * rel_tol).with_budget(20_000))?;
            take(&slot)?;
            if polar_tail(cutoff) <= 0.05 * rel_tol * res.value.abs() || cutoff >= 700.0 {
                break (res, ok);
            }
            cutoff = (cutoff * 2.0).min(700.0);
            breaks.push(cutoff);
        };
        if !ok {
            return Err(QuadError::NoConvergence { error_estimate: res.error_estimate, evaluations: res.evaluations }.into());
        }
        by[i] = prefactor * res.value;
        quad_err += prefactor * res.error_estimate;
        evaluations += res.evaluations;
    }
    Ok(EnergyResult {
        value: by[0] + by[1],
        route: Route::ImaginaryAxis,
        by_polarization: by,
        truncation_report: TruncationReport {
            cutoff: cutoff / four_a,
            tail_bound: 2.0 * prefactor * polar_tail(cutoff),
            quadrature_error: quad_err,
            evaluations,
        },
    })
}

/// Matsubara frequencies ζ_m = 2πmT; the m = 0 term carries weight ½.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatsubaraGrid {
    pub temperature: f64,
    /// Hard cap on the number of terms; the sum stops earlier once the tail
    /// bound is below tolerance.
    pub max_index: usize,
    pub m0_weight: f64,
}

impl MatsubaraGrid {
    pub fn new(temperature: f64) -> Result<Self, CasimirError> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(CasimirError::InvalidParameter(format!("temperature must be positive, got {temperature}")));
        }
        Ok(Self { temperature, max_index: 200_000, m0_weight: 0.5 })
    }

    pub fn with_max_index(self, max_index: usize) -> Self {
        Self { max_index, ..self }
    }

    pub fn frequency(&self, m: usize) -> f64 {
        2.0 * PI * m as f64 * self.temperature
    }
}

/// ∫₀^∞ k dk ln D_σ(iζ, k), computed as ∫_ζ^∞ κ dκ ln D with κ² = k² + ζ².
pub fn k_integral(config: &CavityConfig, zeta: f64, rel_tol: f64) -> Result<(f64, f64), CasimirError> {
    let slot: Slot = RefCell::new(None);
    let scale = 1.0 / (4.0 * config.half_gap);
    let res = semi_infinite_with(
        |kappa: f64| {
            let k = ((kappa - zeta) * (kappa + zeta)).max(0.0).sqrt();
            match checked_log(config, zeta, k) {
                Ok(l) => kappa * l,
                Err(e) => {
                    stash(&slot, e);
                    0.0
                }
            }
        },
        zeta,
        scale,
        Tolerance::relative(rel_tol).with_abs(1e-300).with_budget(20_000),
    )?;
    take(&slot)?;
    Ok((res.value, res.error_estimate))
}

/// Upper bound on ∫_ζ^∞ κ |ln D| dκ for either polarization.
fn k_integral_bound(a: f64, zeta: f64) -> f64 {
    let x = (-4.0 * a * zeta).exp();
    x * (zeta / (4.0 * a) + 1.0 / (16.0 * a * a)) / -(-4.0 * a * zeta.max(1e-300)).exp_m1()
}

/// ζ → 0⁺ limit of the k-integral from ζ = h, h/2, h/4 extrapolated to 0.
fn k_integral_at_zero(config: &CavityConfig, rel_tol: f64) -> Result<(f64, f64), CasimirError> {
    let h = 1e-8 * config.model.omega_p;
    let (g1, e1) = k_integral(config, h, rel_tol)?;
    let (g2, e2) = k_integral(config, 0.5 * h, rel_tol)?;
    let (g3, e3) = k_integral(config, 0.25 * h, rel_tol)?;
    // Neville in h: linear then quadratic extrapolation
    let l12 = 2.0 * g2 - g1;
    let l23 = 2.0 * g3 - g2;
    let q = (4.0 * l23 - l12) / 3.0;
    Ok((q, e1 + e2 + e3 + (q - l23).abs()))
}

pub fn free_energy_matsubara(config: &CavityConfig, grid: &MatsubaraGrid) -> Result<EnergyResult, CasimirError> {
    free_energy_matsubara_with(config, grid, DEFAULT_REL_TOL)
}

pub fn free_energy_matsubara_with(config: &CavityConfig, grid: &MatsubaraGrid, rel_tol: f64) -> Result<EnergyResult, CasimirError> {
    let t = grid.temperature;
    let a = config.half_gap;
    let pref = t / (2.0 * PI);
    let mut by = [0.0; 2];
    let mut quad_err = 0.0;
    let mut last_m = 0;
    let mut tail_total = 0.0;
    for (i, sigma) in Polarization::BOTH.into_iter().enumerate() {
        let cfg = config.with_polarization(sigma);
        let (g0, e0) = k_integral_at_zero(&cfg, 0.1 * rel_tol)?;
        let mut terms = vec![grid.m0_weight * g0];
        quad_err += pref * grid.m0_weight * e0;
        let mut m = 1;
        let tail = loop {
            let tail = tail_after(a, grid, m - 1);
            let scale = sum_ascending(&mut terms.clone()).abs();
            if tail <= 0.05 * rel_tol * scale || m > grid.max_index {
                break tail;
            }
            let (g, e) = k_integral(&cfg, grid.frequency(m), 0.1 * rel_tol)?;
            terms.push(g);
            quad_err += pref * e;
            m += 1;
        };
        if tail > 0.05 * rel_tol * sum_ascending(&mut terms.clone()).abs() {
            return Err(QuadError::SeriesNoConvergence { terms: terms.len(), tail_bound: tail }.into());
        }
        by[i] = pref * sum_ascending(&mut terms);
        tail_total += pref * tail;
        last_m = last_m.max(m - 1);
    }
    Ok(EnergyResult {
        value: by[0] + by[1],
        route: Route::Matsubara,
        by_polarization: by,
        truncation_report: TruncationReport {
            cutoff: last_m as f64,
            tail_bound: tail_total,
            quadrature_error: quad_err,
            evaluations: 0,
        },
    })
}

/// Σ_{m > last} of the per-term bound; the terms fall off geometrically so
/// the sum is evaluated until they stop contributing.
fn tail_after(a: f64, grid: &MatsubaraGrid, last: usize) -> f64 {
    let mut total = 0.0;
    let mut m = last + 1;
    loop {
        let b = 2.0 * k_integral_bound(a, grid.frequency(m));
        total += b;
        if b <= 1e-17 * total || b == 0.0 || m > last + 10_000_000 {
            return total;
        }
        m += 1;
    }
}

/// Casimir pressure −∂E/∂(2a) = −½ ∂E/∂a, zero temperature when `thermal`
/// is `None`. Negative means attraction.
pub fn casimir_pressure(config: &CavityConfig, thermal: Option<&MatsubaraGrid>) -> Result<PressureResult, CasimirError> {
    let rel_tol = 1e-12;
    let slot: Slot = RefCell::new(None);
    let energy = |a: f64| -> f64 {
        let cfg = config.with_half_gap(a);
        let r = match thermal {
            None => energy_imaginary_axis_with(&cfg, rel_tol),
            Some(g) => free_energy_matsubara_with(&cfg, g, rel_tol),
        };
        match r {
            Ok(e) => e.value,
            Err(e) => {
                stash(&slot, e);
                f64::NAN
            }
        }
    };
    let a = config.half_gap;
    let mut h0 = 0.1 * a;
    for attempt in 0..2 {
        let d = differentiate_richardson(&energy, a, h0);
        take(&slot)?;
        let rel = d.error_estimate / d.value.abs();
        if rel <= 1e-6 {
            return Ok(PressureResult { value: -0.5 * d.value, error_estimate: 0.5 * d.error_estimate, step: d.step });
        }
        if attempt == 0 {
            h0 = 0.3 * a;
        } else {
            return Err(CasimirError::StepUnderflow { relative_error: rel });
        }
    }
    unreachable!("loop returns on its second pass")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PressureResult {
    pub value: f64,
    pub error_estimate: f64,
    /// Smallest half-gap step used in the differencing tableau.
    pub step: f64,
}

/// f(ω) = ω/2 + T ln(1 − e^{−ω/T}).
pub fn oscillator_free_energy(omega: f64, temperature: f64) -> Result<f64, CasimirError> {
    if !(omega >= 0.0) || !(temperature >= 0.0) {
        return Err(CasimirError::InvalidParameter("omega and T must be non-negative".into()));
    }
    if temperature == 0.0 {
        return Ok(0.5 * omega);
    }
    if omega == 0.0 {
        return Err(CasimirError::DivergentFreeEnergy);
    }
    Ok(0.5 * omega + temperature * (-(-omega / temperature).exp()).ln_1p())
}

/// f(ω) = ω/2 − T Σ_{m=1}^{terms} e^{−mω/T}/m. The omitted tail is below
/// T e^{−(terms+1)ω/T}/((terms+1)(1 − e^{−ω/T})).
pub fn oscillator_free_energy_series(omega: f64, temperature: f64, terms: usize) -> Result<(f64, f64), CasimirError> {
    if !(omega > 0.0 && temperature > 0.0) {
        return Err(CasimirError::InvalidParameter("series form needs omega > 0 and T > 0".into()));
    }
    let x = omega / temperature;
    let mut s: Vec<f64> = (1..=terms).map(|m| (-(m as f64) * x).exp() / m as f64).collect();
    let n1 = (terms + 1) as f64;
    let tail = temperature * (-n1 * x).exp() / (n1 * -(-x).exp_m1());
    Ok((0.5 * omega - temperature * sum_ascending(&mut s), tail))
}

/// Integrand of the Matsubara k-integral in the variable p,
/// k² = ζ_m²(p² − 1), k dk = ζ_m² p dp: returns ζ_m² p ln D_σ(iζ_m, k(p)).
pub fn classic_lifshitz_integrand(config: &CavityConfig, temperature: f64, m: usize, p: f64) -> Result<f64, CasimirError> {
    if m == 0 || !(p > 1.0) || !(temperature > 0.0) {
        return Err(CasimirError::InvalidParameter("needs m >= 1, p > 1 and T > 0".into()));
    }
    let zeta = 2.0 * PI * m as f64 * temperature;
    let k = zeta * ((p - 1.0) * (p + 1.0)).sqrt();
    Ok(zeta * zeta * p * checked_log(config, zeta, k)?)
}

/// Same integrand in the textbook parameterisation for two identical
/// half-spaces: s = √(p² − 1 + ε(iζ)), r_TE = (s − p)/(s + p),
/// r_TM = (εp − s)/(εp + s), D = 1 − r² e^{−4aζp}.
pub fn classic_lifshitz_integrand_textbook(config: &CavityConfig, temperature: f64, m: usize, p: f64) -> Result<f64, CasimirError> {
    if m == 0 || !(p > 1.0) || !(temperature > 0.0) {
        return Err(CasimirError::InvalidParameter("needs m >= 1, p > 1 and T > 0".into()));
    }
    let zeta = 2.0 * PI * m as f64 * temperature;
    let eps = config.model.imaginary_axis_omega_sq_eps(zeta) / (zeta * zeta);
    let s = (p * p - 1.0 + eps).sqrt();
    let r = match config.polarization {
        Polarization::TE => (s - p) / (s + p),
        Polarization::TM => (eps * p - s) / (eps * p + s),
    };
    let l = (-(r * r) * (-4.0 * config.half_gap * zeta * p).exp()).ln_1p();
    Ok(zeta * zeta * p * l)
}

/// Per-(σ, k) comparison of the real-axis spectral bracket with the
/// imaginary-axis integral (1/2π)∫₀^∞ ln D(iζ) dζ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealAxisReport {
    pub polarization: Polarization,
    pub k: f64,
    pub half_gap: f64,
    /// ½[Σω_n − 2ω_sp(TM) + ω₋/2 + (1/π)∫_{ω₋}^{ω₊} ω dδ].
    pub mode_sum_part: f64,
    /// (1/2π)∫_{ω₊}^{∞} ω dδ, integrated by parts.
    pub continuum_part: f64,
    pub imaginary_axis_part: f64,
    pub mismatch: f64,
    /// Quadrature errors of both routes plus the continuum tail beyond Ω_cut.
    pub combined_bound: f64,
    pub omega_cut: f64,
    pub continuum_tail: f64,
    pub modes: ModeSpectrum,
}

impl RealAxisReport {
    pub fn real_axis_total(&self) -> f64 {
        self.mode_sum_part + self.continuum_part
    }

    /// mismatch < max(1e−3 |imaginary-axis part|, combined bound)
    pub fn within_bounds(&self) -> bool {
        self.mismatch < (1e-3 * self.imaginary_axis_part.abs()).max(self.combined_bound)
    }
}

/// Ω_cut such that the continuum tail bound is below `tail_target`.
pub fn default_omega_cut(config: &CavityConfig, kpoint: &KPoint, tail_target: f64) -> f64 {
    let wp = config.model.omega_p;
    let c = 1.5 * wp.powi(4) / 16.0 * 4.0;
    let omega = (c / (12.0 * tail_target)).cbrt();
    omega.max(kpoint.omega_plus + 20.0 * wp)
}

pub fn energy_real_axis_per_k(config: &CavityConfig, kpoint: &KPoint, omega_cut: f64) -> Result<RealAxisReport, CasimirError> {
    if !config.model.is_dissipationless() {
        return Err(CavityError::ModelMismatch.into());
    }
    if !(omega_cut > kpoint.omega_plus) {
        return Err(CasimirError::InvalidParameter("omega_cut must exceed omega_plus".into()));
    }
    let a = config.half_gap;
    let (wm, wp) = (kpoint.omega_minus, kpoint.omega_plus);
    let omega_p = config.model.omega_p;
    let tol = Tolerance::absolute(1e-13).with_budget(50_000);

    let modes = find_modes(config, kpoint)?;
    let mut omegas: Vec<f64> = modes.surface_modes.iter().chain(&modes.waveguide_modes).copied().collect();
    let mode_sum = sum_ascending(&mut omegas);
    let pole = match config.polarization {
        Polarization::TM => 2.0 * surface_plasmon_pole(kpoint, &config.model),
        Polarization::TE => 0.0,
    };

    // (1/π)∫ω dδ over the band, with δ = −Φ/2 and Φ(ω₋) = −2π, Φ(ω₊) = 4aω_p
    let phi = integrate_with(|w: f64| band_phase(config, kpoint, w), wm, wp, tol)?;
    let band = -(4.0 * a * omega_p * wp + 2.0 * PI * wm) / (2.0 * PI) + phi.value / (2.0 * PI);
    let mode_sum_part = 0.5 * (mode_sum - pole + 0.5 * wm + band);

    // continuum: (1/π)[−ω₊δ(ω₊⁺) − ∫δ dω], panels at the zeros of sin(4ak₂)
    let delta_plus = -(Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, 4.0 * a * omega_p)).arg();
    let slot: Slot = RefCell::new(None);
    let delta = |w: f64| match dispersion_function(Complex64::new(w, 0.0), config, kpoint) {
        Ok(d) => -d.arg(),
        Err(e) => {
            stash(&slot, e.into());
            0.0
        }
    };
    let step = PI / (4.0 * a);
    let mut breaks = vec![wp];
    let mut n = (omega_p / step).floor() + 1.0;
    loop {
        let k2 = n * step;
        let w = kpoint.k.hypot(k2);
        if w >= omega_cut {
            break;
        }
        breaks.push(w);
        n += 1.0;
    }
    breaks.push(omega_cut);
    let cont = integrate_panels(delta, &breaks, Tolerance::absolute(1e-13).with_budget(200_000))?;
    take(&slot)?;
    let continuum_part = (-wp * delta_plus - cont.value) / (2.0 * PI);

    // tail beyond Ω_cut: |δ| ≤ (π/2)|r|² ≤ (π/2)C/ω⁴
    let mut c_max: f64 = 0.0;
    for f in [1.0, 1.1, 1.5, 2.0, 4.0] {
        let w = f * omega_cut;
        let r = crate::cavity::reflection_amplitude(Complex64::new(w, 0.0), kpoint, &config.model, config.polarization)?;
        c_max = c_max.max(r.norm_sqr() * w.powi(4));
    }
    let continuum_tail = 0.5 * PI * 1.5 * c_max / (3.0 * omega_cut.powi(3)) / (2.0 * PI);

    let slot: Slot = RefCell::new(None);
    let imag = semi_infinite_with(
        |z: f64| match checked_log(config, z, kpoint.k) {
            Ok(l) => l,
            Err(e) => {
                stash(&slot, e);
                0.0
            }
        },
        0.0,
        1.0 / (4.0 * a),
        Tolerance::absolute(1e-14).with_budget(20_000),
    )?;
    take(&slot)?;
    let imaginary_axis_part = imag.value / (2.0 * PI);

    let mismatch = (mode_sum_part + continuum_part - imaginary_axis_part).abs();
    let combined_bound = 0.5 * phi.error_estimate / (2.0 * PI) + cont.error_estimate / (2.0 * PI) + continuum_tail + imag.error_estimate / (2.0 * PI);
    Ok(RealAxisReport {
        polarization: config.polarization,
        k: kpoint.k,
        half_gap: a,
        mode_sum_part,
        continuum_part,
        imaginary_axis_part,
        mismatch,
        combined_bound,
        omega_cut,
        continuum_tail,
        modes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnomalyResult {
    pub value: Complex64,
    /// Summed quadrature error estimates, the numerical noise floor.
    pub noise_floor: f64,
    /// Bound on the part of the ζ-integral beyond the cutoff.
    pub tail_bound: f64,
    pub zeta_cutoff: f64,
    pub m_max: usize,
    pub temperature: f64,
    pub gamma: f64,
}

/// ∫₀^∞ k dk [ln D(iζ) − ln D(−iζ)] with a breakpoint at the edge of the
/// k₁ cut, k² + ζ²ε(−iζ) = 0. Returns the value and its error estimate even
/// when the inner tolerance was not reached.
fn anomaly_k_integral(cfg: &CavityConfig, z: f64) -> Result<(Complex64, f64), QuadError> {
    let a = cfg.half_gap;
    let l = |k: f64| -> Complex64 {
        let plus = log_dispersion_imaginary_axis(cfg, z, k);
        let minus = log_dispersion_negative_imaginary_axis(cfg, z, k);
        (Complex64::new(plus, 0.0) - minus) * k
    };
    let q0 = cfg.model.imaginary_axis_omega_sq_eps(-z);
    let tol = Tolerance::relative(1e-11).with_abs(1e-22).with_budget(2_000);
    // beyond k_dead the integrand is below e^{−40}
    let k_dead = 10.0 / a;
    let scale = 1.0 / (4.0 * a);
    if q0 < 0.0 && q0 > -(k_dead * k_dead) {
        let kc = (-q0).sqrt();
        let (p, _) = integrate_partition(&l, &[0.0, kc], tol)?;
        let (s, _) = semi_infinite_partition(&l, kc, scale, tol)?;
        Ok((p.value + s.value, p.error_estimate + s.error_estimate))
    } else {
        let (s, _) = semi_infinite_partition(&l, 0.0, scale, tol)?;
        Ok((s.value, s.error_estimate))
    }
}

/// ΔF = −i Σ_σ ∫ k dk/(2π)² ∫₀^∞ dζ Σ_{m=1}^{m_max} sin(mζ/T) ln[D(iζ)/D(−iζ)].
///
/// ln D(−iζ) is the mean of the principal logarithms on the two sides of
/// the negative imaginary axis; zero for the plasma model.
pub fn drude_anomaly(config: &CavityConfig, temperature: f64, m_max: usize) -> Result<AnomalyResult, CasimirError> {
    if !(temperature > 0.0) || m_max == 0 {
        return Err(CasimirError::InvalidParameter("needs T > 0 and m_max >= 1".into()));
    }
    let gamma = config.model.damping();
    let zero = AnomalyResult {
        value: Complex64::default(),
        noise_floor: 0.0,
        tail_bound: 0.0,
        zeta_cutoff: 0.0,
        m_max,
        temperature,
        gamma,
    };
    if gamma == 0.0 {
        return Ok(zero);
    }
    let a = config.half_gap;
    let four_a = 4.0 * a;

    // |k-integral of L| ≤ 2 × 2 k_integral_bound, |S_M| ≤ M
    let mut zc = 2.0 * gamma + 1.0 / four_a;
    while (m_max as f64) * 8.0 * k_integral_bound(a, zc) > 1e-16 {
        zc *= 1.25;
    }
    let tail_bound = 2.0 * (m_max as f64) * 8.0 * k_integral_bound(a, zc) / (2.0 * PI).powi(2);

    let mut breaks: Vec<f64> = vec![0.0, 2.0 * gamma];
    for n in [m_max, m_max + 1] {
        let period = 2.0 * PI * temperature / n as f64;
        let mut j = 1.0;
        while j * period < zc {
            breaks.push(j * period);
            j += 1.0;
        }
    }
    breaks.push(zc);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * zc);

    let comb = |z: f64| -> f64 {
        let mut s: Vec<f64> = (1..=m_max).map(|m| (m as f64 * z / temperature).sin()).collect();
        sum_ascending(&mut s)
    };
    let mut total = Complex64::default();
    let mut noise = 0.0;
    for sigma in Polarization::BOTH {
        let cfg = config.with_polarization(sigma);
        let slot: Slot = RefCell::new(None);
        let inner_err = std::cell::Cell::new(0.0f64);
        let outer = |z: f64| -> Complex64 {
            match anomaly_k_integral(&cfg, z) {
                Ok((v, e)) => {
                    let s = comb(z);
                    inner_err.set(inner_err.get() + s.abs() * e);
                    v * s
                }
                Err(e) => {
                    stash(&slot, e.into());
                    Complex64::default()
                }
            }
        };
        let (res, _) = integrate_partition(&outer, &breaks, Tolerance::relative(1e-9).with_abs(1e-20).with_budget(20_000))?;
        take(&slot)?;
        // mean inner error per evaluation times the integration length
        noise += res.error_estimate + inner_err.get() / res.evaluations as f64 * zc;
        total += res.value;
    }
    let scale = 1.0 / (2.0 * PI).powi(2);
    let value = Complex64::new(0.0, -scale) * total;
    if tail_bound > value.norm() && value.norm() > 0.0 {
        return Err(CasimirError::OscillatoryDivergence { tail: tail_bound, value: value.norm() });
    }
    Ok(AnomalyResult { value, noise_floor: scale * noise, tail_bound, zeta_cutoff: zc, ..zero })
}
