//! Two identical half-spaces with permittivity ε₁ separated by a vacuum gap
//! of width 2a: wavevectors with the branch rules of the problem, Fresnel
//! amplitudes, the dispersion function D_σ(ω) = 1 − r_σ² e^{4iak₂}, its
//! discrete roots, the continuum phase shift and winding numbers.
//!
//! Branches. k₁ = √(ω²ε₁ − k²) and k₂ = √(ω² − k²) are taken as
//! i·√(−z) with the principal root, so Im k ≥ 0 off the cuts. On the real
//! axis the cut edges are resolved explicitly: for z > 0 the value is the
//! limit from ω + i0, which for the plasma model is sign(ω)·√z. This gives
//! k₂ > 0 on the upper edge above ω₋, arg k₁ = π/2 below ω₊, real D on the
//! imaginary axis and D(ω) = D(−ω) for the plasma model.
//!
//! A second sheet, [`Sheet::BandContinuation`], continues k₂ = √z₂ from the
//! waveguide band into the lower half-plane so that thin contours can hug
//! the band.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::dispersion::DispersionModel;
use crate::quad::{find_root_bracketed, integrate_with, QuadError, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Polarization {
    TE,
    TM,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::TE, Polarization::TM];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sheet {
    Physical,
    BandContinuation,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CavityError {
    #[error("omega = {re} + {im}i is a branch point")]
    BranchPoint { re: f64, im: f64 },
    #[error("omega = {re} + {im}i lies on a branch cut off the real axis")]
    BranchCut { re: f64, im: f64 },
    #[error("reflection amplitude has a pole at omega = {re} + {im}i")]
    DenominatorZero { re: f64, im: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("operation needs the plasma model")]
    ModelMismatch,
    #[error("root bracketing found {found} roots where the argument principle counts {expected}")]
    UnresolvedRoot { found: usize, expected: i64 },
    #[error("winding number quality {quality} too poor, contour passes too close to a zero or pole")]
    ContourTooClose { quality: f64 },
    #[error("phase jump of {jump} near omega = {omega}")]
    UnwrapError { omega: f64, jump: f64 },
    #[error("D = {value} <= 0 at zeta = {zeta}, k = {k}")]
    NonPositiveD { zeta: f64, k: f64, value: f64 },
    #[error(transparent)]
    Numerics(#[from] QuadError),
}

/// Transverse wavenumber k with its branch points ω₋ = k and ω₊ = √(ω_p² + k²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KPoint {
    pub k: f64,
    pub omega_minus: f64,
    pub omega_plus: f64,
}

impl KPoint {
    pub fn new(k: f64, model: &DispersionModel) -> Result<Self, CavityError> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(CavityError::InvalidParameter(format!("k must be non-negative, got {k}")));
        }
        Ok(Self { k, omega_minus: k, omega_plus: model.omega_p.hypot(k) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CavityConfig {
    pub half_gap: f64,
    pub model: DispersionModel,
    pub polarization: Polarization,
}

impl CavityConfig {
    pub fn new(half_gap: f64, model: DispersionModel, polarization: Polarization) -> Result<Self, CavityError> {
        if !(half_gap > 0.0 && half_gap.is_finite()) {
            return Err(CavityError::InvalidParameter(format!("half gap a must be positive, got {half_gap}")));
        }
        Ok(Self { half_gap, model, polarization })
    }

    pub fn with_polarization(self, polarization: Polarization) -> Self {
        Self { polarization, ..self }
    }

    pub fn with_half_gap(self, half_gap: f64) -> Self {
        Self { half_gap, ..self }
    }

    fn require_plasma(&self) -> Result<(), CavityError> {
        if self.model.is_dissipationless() {
            Ok(())
        } else {
            Err(CavityError::ModelMismatch)
        }
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

const I: Complex64 = Complex64::new(0.0, 1.0);

/// i√(−z) with explicit edge values on the real axis.
fn physical_root(z: Complex64, omega: Complex64, slope: Complex64, scale: f64) -> Result<Complex64, CavityError> {
    if z.im == 0.0 {
        if z.re.abs() <= 8.0 * f64::EPSILON * scale {
            return Err(CavityError::BranchPoint { re: omega.re, im: omega.im });
        }
        if z.re < 0.0 {
            return Ok(c(0.0, (-z.re).sqrt()));
        }
        if omega.im != 0.0 || slope.re == 0.0 {
            return Err(CavityError::BranchCut { re: omega.re, im: omega.im });
        }
        return Ok(c(slope.re.signum() * z.re.sqrt(), 0.0));
    }
    Ok(I * (-z).sqrt())
}

/// Wavevectors and their ω-derivatives.
#[derive(Debug, Clone, Copy)]
struct Wavevectors {
    k1: Complex64,
    k2: Complex64,
    dk1: Complex64,
    dk2: Complex64,
    /// ω²ε₁ and its derivative.
    w1: Complex64,
    dw1: Complex64,
}

fn wavevectors(model: &DispersionModel, kp: &KPoint, omega: Complex64, sheet: Sheet) -> Result<Wavevectors, CavityError> {
    let k2sq = kp.k * kp.k;
    let w1 = model.omega_sq_permittivity(omega);
    let dw1 = model.omega_sq_permittivity_derivative(omega);
    let z1 = w1 - k2sq;
    let z2 = omega * omega - k2sq;
    let scale = (omega.norm_sqr()).max(k2sq).max(model.omega_p * model.omega_p);
    let k1 = physical_root(z1, omega, dw1, scale)?;
    let k2 = match sheet {
        Sheet::Physical => physical_root(z2, omega, omega * 2.0, scale)?,
        Sheet::BandContinuation => {
            if z2.norm() <= 8.0 * f64::EPSILON * scale {
                return Err(CavityError::BranchPoint { re: omega.re, im: omega.im });
            }
            z2.sqrt()
        }
    };
    Ok(Wavevectors { k1, k2, dk1: dw1 / (k1 * 2.0), dk2: omega * 2.0 / (k2 * 2.0), w1, dw1 })
}

/// (k₁, k₂) on the physical sheet.
pub fn transverse_wavevectors(omega: Complex64, kpoint: &KPoint, model: &DispersionModel) -> Result<(Complex64, Complex64), CavityError> {
    let w = wavevectors(model, kpoint, omega, Sheet::Physical)?;
    Ok((w.k1, w.k2))
}

/// Fresnel amplitude for the interface between medium 1 (wavevector k₁,
/// ω²ε₁ = `w1`, μ₁) and medium 2 (k₂, ω²ε₂ = `w2`, μ₂). The TM form is
/// multiplied through by ω² so that it stays finite at ω = 0.
pub fn fresnel(sigma: Polarization, k1: Complex64, k2: Complex64, w1: Complex64, w2: Complex64, mu1: f64, mu2: f64) -> Option<Complex64> {
    let (num, den) = match sigma {
        Polarization::TE => (k1 * mu2 - k2 * mu1, k1 * mu2 + k2 * mu1),
        Polarization::TM => (w2 * k1 - w1 * k2, w2 * k1 + w1 * k2),
    };
    if den == Complex64::default() {
        None
    } else {
        Some(num / den)
    }
}

/// Numerator N, denominator M and their derivatives, with r = N/M.
fn fresnel_parts(sigma: Polarization, omega: Complex64, w: &Wavevectors) -> (Complex64, Complex64, Complex64, Complex64) {
    match sigma {
        Polarization::TE => (w.k1 - w.k2, w.k1 + w.k2, w.dk1 - w.dk2, w.dk1 + w.dk2),
        Polarization::TM => {
            let w2 = omega * omega;
            let dw2 = omega * 2.0;
            let n = w2 * w.k1 - w.w1 * w.k2;
            let m = w2 * w.k1 + w.w1 * w.k2;
            let dn = dw2 * w.k1 + w2 * w.dk1 - w.dw1 * w.k2 - w.w1 * w.dk2;
            let dm = dw2 * w.k1 + w2 * w.dk1 + w.dw1 * w.k2 + w.w1 * w.dk2;
            (n, m, dn, dm)
        }
    }
}

pub fn reflection_amplitude(omega: Complex64, kpoint: &KPoint, model: &DispersionModel, sigma: Polarization) -> Result<Complex64, CavityError> {
    let w = wavevectors(model, kpoint, omega, Sheet::Physical)?;
    let (n, m, _, _) = fresnel_parts(sigma, omega, &w);
    if m == Complex64::default() {
        return Err(CavityError::DenominatorZero { re: omega.re, im: omega.im });
    }
    Ok(n / m)
}

/// D_σ(ω) and dD_σ/dω on the requested sheet.
pub fn dispersion_with_derivative(omega: Complex64, config: &CavityConfig, kpoint: &KPoint, sheet: Sheet) -> Result<(Complex64, Complex64), CavityError> {
    let w = wavevectors(&config.model, kpoint, omega, sheet)?;
    let (n, m, dn, dm) = fresnel_parts(config.polarization, omega, &w);
    if m == Complex64::default() {
        return Err(CavityError::DenominatorZero { re: omega.re, im: omega.im });
    }
    let r = n / m;
    let dr = (dn * m - n * dm) / (m * m);
    let four_a = 4.0 * config.half_gap;
    let e = (I * four_a * w.k2).exp();
    let d = Complex64::new(1.0, 0.0) - r * r * e;
    let dd = -(r * dr * 2.0 * e + r * r * I * four_a * w.dk2 * e);
    Ok((d, dd))
}

pub fn dispersion_function(omega: Complex64, config: &CavityConfig, kpoint: &KPoint) -> Result<Complex64, CavityError> {
    Ok(dispersion_with_derivative(omega, config, kpoint, Sheet::Physical)?.0)
}

/// Real-arithmetic D_σ(iζ, k) for ζ > 0 (either model):
/// κ₂ = √(k² + ζ²), κ₁ = √(k² + ζ²ε(iζ)).
pub fn dispersion_imaginary_axis(config: &CavityConfig, zeta: f64, k: f64) -> f64 {
    let (r, kappa2) = imaginary_axis_reflection(config, zeta, k);
    1.0 - r * r * (-4.0 * config.half_gap * kappa2).exp()
}

/// ln D_σ(iζ, k), accurate when D is close to 1.
pub fn log_dispersion_imaginary_axis(config: &CavityConfig, zeta: f64, k: f64) -> f64 {
    let (r, kappa2) = imaginary_axis_reflection(config, zeta, k);
    (-(r * r) * (-4.0 * config.half_gap * kappa2).exp()).ln_1p()
}

fn imaginary_axis_reflection(config: &CavityConfig, zeta: f64, k: f64) -> (f64, f64) {
    let p = config.model.imaginary_axis_omega_sq_eps(zeta);
    let kappa2 = k.hypot(zeta);
    let kappa1 = (k * k + p).sqrt();
    let r = match config.polarization {
        Polarization::TE => (kappa1 - kappa2) / (kappa1 + kappa2),
        Polarization::TM => {
            let z2 = zeta * zeta;
            (z2 * kappa1 - p * kappa2) / (z2 * kappa1 + p * kappa2)
        }
    };
    (r, kappa2)
}

/// Principal-branch ln D on the negative imaginary axis, ω = −iζ, averaged
/// over the two lateral limits ω = −iζ ± 0. Where k² + ζ²ε(−iζ) < 0 the
/// point sits on the cut of k₁ and the two limits have k₁ = ±√(−k² − ζ²ε).
pub fn log_dispersion_negative_imaginary_axis(config: &CavityConfig, zeta: f64, k: f64) -> Complex64 {
    let p = config.model.imaginary_axis_omega_sq_eps(-zeta);
    let kappa2 = k.hypot(zeta);
    let q = k * k + p;
    let four_a = 4.0 * config.half_gap;
    let e = (-four_a * kappa2).exp();
    // w with D = 1 + w
    let w_of = |k1: Complex64| -> Complex64 {
        let k2 = c(0.0, kappa2);
        let w2 = c(-zeta * zeta, 0.0);
        let w1 = c(-p, 0.0);
        let r = match config.polarization {
            Polarization::TE => (k1 - k2) / (k1 + k2),
            Polarization::TM => (w2 * k1 - w1 * k2) / (w2 * k1 + w1 * k2),
        };
        -(r * r * e)
    };
    if q > 0.0 {
        // D is real here; the lateral limits approach it from ±i0, so a
        // negative D contributes ln|D| ± iπ and the mean is ln|D|.
        let w = w_of(c(0.0, q.sqrt())).re;
        if w > -1.0 {
            c(w.ln_1p(), 0.0)
        } else {
            c((-1.0 - w).ln(), 0.0)
        }
    } else {
        let root = (-q).sqrt();
        (ln_1p(w_of(c(root, 0.0))) + ln_1p(w_of(c(-root, 0.0)))) * 0.5
    }
}

/// Principal ln(1 + w) without cancellation for small |w|.
fn ln_1p(w: Complex64) -> Complex64 {
    c(0.5 * (2.0 * w.re + w.norm_sqr()).ln_1p(), w.im.atan2(1.0 + w.re))
}

/// Surface-plasmon pole of r_TM on (0, ω₋): ω_sp² = [ω_p² + 2k² − √(ω_p⁴ + 4k⁴)]/2.
pub fn surface_plasmon_pole(kp: &KPoint, model: &DispersionModel) -> f64 {
    let wp2 = model.omega_p * model.omega_p;
    let k2 = kp.k * kp.k;
    (2.0 * wp2 * k2 / (wp2 + 2.0 * k2 + (wp2 * wp2 + 4.0 * k2 * k2).sqrt())).sqrt()
}

/// Pole-free numerator of D on (0, ω₋), plasma model:
/// D = Dn/M² with M the Fresnel denominator. Returns (Dn, D).
fn surface_numerator(config: &CavityConfig, kp: &KPoint, w: f64) -> (f64, f64) {
    let wp2 = config.model.omega_p * config.model.omega_p;
    let beta = ((kp.k - w) * (kp.k + w)).sqrt();
    let alpha = ((kp.omega_plus - w) * (kp.omega_plus + w)).sqrt();
    let (n, m) = match config.polarization {
        Polarization::TE => (alpha - beta, alpha + beta),
        Polarization::TM => {
            let p = w * w - wp2;
            (w * w * alpha - p * beta, w * w * alpha + p * beta)
        }
    };
    let e = (-4.0 * config.half_gap * beta).exp();
    let dn = m * m - n * n * e;
    (dn, dn / (m * m))
}

/// Band phase Φ(ω) on (ω₋, ω₊), where D = 1 − e^{iΦ}:
/// Φ = −4θ + 4aβ with θ = atan2(ω²α, (ω²ε)β) for TM and atan2(α, β) for TE.
pub fn band_phase(config: &CavityConfig, kp: &KPoint, w: f64) -> f64 {
    let wp2 = config.model.omega_p * config.model.omega_p;
    let beta = ((w - kp.k) * (w + kp.k)).sqrt();
    let alpha = ((kp.omega_plus - w) * (kp.omega_plus + w)).sqrt();
    let theta = match config.polarization {
        Polarization::TE => alpha.atan2(beta),
        Polarization::TM => (w * w * alpha).atan2((w * w - wp2) * beta),
    };
    -4.0 * theta + 4.0 * config.half_gap * beta
}

/// δ(ω) = −arg D(ω + i0) above ω₊. |r| < 1 there, so Re D > 0 and the
/// principal argument is already continuous.
pub fn phase_shift(config: &CavityConfig, kp: &KPoint, omega: f64) -> Result<f64, CavityError> {
    config.require_plasma()?;
    if !(omega > kp.omega_plus) {
        return Err(CavityError::InvalidParameter(format!("phase shift needs omega > omega_plus = {}", kp.omega_plus)));
    }
    Ok(-dispersion_function(c(omega, 0.0), config, kp)?.arg())
}

/// Δρ(ω) = (1/π) dδ/dω by Richardson differentiation of the phase shift.
pub fn spectral_density_shift(config: &CavityConfig, kp: &KPoint, omega: f64) -> Result<f64, CavityError> {
    config.require_plasma()?;
    let gap = omega - kp.omega_plus;
    if !(gap > 0.0) {
        return Err(CavityError::InvalidParameter(format!("omega must exceed omega_plus = {}", kp.omega_plus)));
    }
    let h0 = (0.5 * gap).min(PI / (16.0 * config.half_gap));
    let mut failure = None;
    let d = crate::quad::differentiate_richardson(
        |x| match phase_shift(config, kp, x) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        },
        omega,
        h0,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(d.value / PI)
}

/// −(1/π) Im(D'/D): the same density from the analytic derivative.
pub fn spectral_density_shift_analytic(config: &CavityConfig, kp: &KPoint, omega: f64) -> Result<f64, CavityError> {
    config.require_plasma()?;
    let (d, dd) = dispersion_with_derivative(c(omega, 0.0), config, kp, Sheet::Physical)?;
    Ok(-(dd / d).im / PI)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSpectrum {
    pub kpoint: KPoint,
    pub polarization: Polarization,
    pub half_gap: f64,
    pub surface_modes: Vec<f64>,
    pub waveguide_modes: Vec<f64>,
    /// |D| at each listed mode, surface modes first.
    pub residuals: Vec<f64>,
    /// Surface-plasmon pole of r_TM inside (0, ω₋), if any.
    pub reflection_pole: Option<f64>,
    /// Winding numbers of the thin contours around (0, ω₋) and (ω₋, ω₊).
    pub surface_winding: i64,
    pub band_winding: i64,
    /// Sampled δ(ω) on (ω₊, Ω_cut].
    pub phase_curve: Vec<(f64, f64)>,
}

impl ModeSpectrum {
    pub fn mode_count(&self) -> usize {
        self.surface_modes.len() + self.waveguide_modes.len()
    }
}

fn sin2_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (1..n)
        .map(|i| {
            let s = (0.5 * PI * i as f64 / n as f64).sin();
            lo + (hi - lo) * s * s
        })
        .filter(|&x| x > lo && x < hi)
        .collect()
}

fn surface_roots(config: &CavityConfig, kp: &KPoint, density: usize) -> Result<(Vec<f64>, Option<f64>), CavityError> {
    let wm = kp.omega_minus;
    let pole = match config.polarization {
        Polarization::TM => Some(surface_plasmon_pole(kp, &config.model)),
        Polarization::TE => None,
    };
    let mut pieces = vec![(0.0, wm)];
    if let Some(p) = pole {
        pieces = vec![(0.0, p), (p, wm)];
    }
    let f = |w: f64| surface_numerator(config, kp, w).0;
    let mut roots = Vec::new();
    for (lo, hi) in pieces {
        let mut grid = sin2_grid(lo, hi, density);
        // cluster towards the pole, where the surface pair hides at large ka
        if let Some(p) = pole {
            for j in 1..16 {
                let d = p * 10f64.powi(-j);
                for x in [p - d, p + d] {
                    if x > lo && x < hi {
                        grid.push(x);
                    }
                }
            }
            if p > lo && p < hi {
                grid.push(p);
            }
            if lo == p || hi == p {
                grid.push(p);
            }
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
        for i in 0..grid.len().saturating_sub(1) {
            let (a, b) = (grid[i], grid[i + 1]);
            if Some(a) == pole && Some(b) == pole {
                continue;
            }
            if values[i] == 0.0 && Some(a) != pole {
                roots.push(a);
            } else if values[i] * values[i + 1] < 0.0 {
                roots.push(find_root_bracketed(f, a, b, 0.0)?);
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup();
    Ok((roots, pole))
}

fn band_samples(config: &CavityConfig, kp: &KPoint, density: usize) -> Vec<(f64, f64)> {
    let (wm, wp) = (kp.omega_minus, kp.omega_plus);
    let at = |s: f64| {
        let x = (0.5 * PI * s).sin();
        wm + (wp - wm) * x * x
    };
    let mut pts: Vec<(f64, f64)> = (1..density)
        .map(|i| i as f64 / density as f64)
        .map(|s| (s, band_phase(config, kp, at(s))))
        .collect();
    // refine until neighbouring samples differ by less than π/4
    for _ in 0..40 {
        let mut next = Vec::with_capacity(pts.len() * 2);
        let mut refined = false;
        for w in pts.windows(2) {
            next.push(w[0]);
            if (w[1].1 - w[0].1).abs() > 0.25 * PI && w[1].0 - w[0].0 > 1e-13 {
                let s = 0.5 * (w[0].0 + w[1].0);
                next.push((s, band_phase(config, kp, at(s))));
                refined = true;
            }
        }
        next.push(*pts.last().expect("non-empty grid"));
        pts = next;
        if !refined {
            break;
        }
    }
    pts.into_iter().map(|(s, phi)| (at(s), phi)).collect()
}

fn band_roots(config: &CavityConfig, kp: &KPoint, density: usize) -> Result<Vec<f64>, CavityError> {
    let samples = band_samples(config, kp, density);
    let mut roots = Vec::new();
    for w in samples.windows(2) {
        let ((x0, p0), (x1, p1)) = (w[0], w[1]);
        let (lo, hi) = (p0.min(p1), p0.max(p1));
        let n_lo = (lo / (2.0 * PI)).floor() as i64 + 1;
        let n_hi = (hi / (2.0 * PI)).ceil() as i64 - 1;
        for n in n_lo..=n_hi {
            let level = 2.0 * PI * n as f64;
            roots.push(find_root_bracketed(|x| band_phase(config, kp, x) - level, x0, x1, 0.0)?);
        }
        if p0 == (p0 / (2.0 * PI)).round() * 2.0 * PI {
            roots.push(x0);
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup();
    Ok(roots)
}

/// Argument-principle count (1/2πi)∮ f'/f over the rectangle
/// [x0, x1] × [y0, y1], traversed counter-clockwise.
pub fn winding_number<F>(mut f: F, x0: f64, x1: f64, y0: f64, y1: f64, tol: f64) -> Result<WindingReport, CavityError>
where
    F: FnMut(Complex64) -> Result<(Complex64, Complex64), CavityError>,
{
    if !(x0 < x1 && y0 < y1) {
        return Err(CavityError::InvalidParameter("rectangle needs x0 < x1 and y0 < y1".into()));
    }
    let mut failure: Option<CavityError> = None;
    let mut total = Complex64::default();
    let mut evaluations = 0;
    let edges: [(Complex64, Complex64); 4] = [(c(x0, y0), c(x1, y0)), (c(x1, y0), c(x1, y1)), (c(x1, y1), c(x0, y1)), (c(x0, y1), c(x0, y0))];
    for (a, b) in edges {
        let dir = b - a;
        let res = integrate_with(
            |t: f64| {
                if failure.is_some() {
                    return Complex64::default();
                }
                match f(a + dir * t) {
                    Ok((v, dv)) => dv / v * dir,
                    Err(e) => {
                        failure = Some(e);
                        Complex64::default()
                    }
                }
            },
            0.0,
            1.0,
            Tolerance::absolute(tol).with_budget(20_000),
        )?;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        total += res.value;
        evaluations += res.evaluations;
    }
    let w = total / (2.0 * PI * I);
    let n = w.re.round();
    let quality = (w.re - n).abs() + w.im.abs();
    if quality > 0.2 {
        return Err(CavityError::ContourTooClose { quality });
    }
    Ok(WindingReport { winding: n as i64, raw: w, quality, evaluations })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindingReport {
    pub winding: i64,
    pub raw: Complex64,
    /// Distance of the raw value from the nearest integer.
    pub quality: f64,
    pub evaluations: usize,
}

/// Zeros of D_σ inside a rectangle in the upper half-plane (physical sheet).
pub fn uhp_winding_number(config: &CavityConfig, kpoint: &KPoint, x0: f64, x1: f64, y0: f64, y1: f64) -> Result<WindingReport, CavityError> {
    if !(y0 > 0.0) {
        return Err(CavityError::InvalidParameter("rectangle must lie in the open upper half-plane".into()));
    }
    winding_number(|w| dispersion_with_derivative(w, config, kpoint, Sheet::Physical), x0, x1, y0, y1, 1e-8)
}

/// Discrete spectrum of the cavity at fixed k for the plasma model.
pub fn find_modes(config: &CavityConfig, kpoint: &KPoint) -> Result<ModeSpectrum, CavityError> {
    config.require_plasma()?;
    if !(kpoint.k > 0.0) {
        return Err(CavityError::InvalidParameter("mode search needs k > 0".into()));
    }
    let mut density = 400;
    loop {
        let (surface, pole) = surface_roots(config, kpoint, density)?;
        let band = band_roots(config, kpoint, density)?;
        let (sw, bw) = mode_windings(config, kpoint, &surface, &band, pole)?;
        let expected_surface = sw + if pole.is_some() { 2 } else { 0 };
        if expected_surface == surface.len() as i64 && bw == band.len() as i64 {
            let mut residuals: Vec<f64> = surface.iter().map(|&w| surface_numerator(config, kpoint, w).1.abs()).collect();
            residuals.extend(band.iter().map(|&w| {
                dispersion_function(c(w, 0.0), config, kpoint).map(|d| d.norm()).unwrap_or(f64::NAN)
            }));
            let phase_curve = phase_curve(config, kpoint, kpoint.omega_plus + 10.0 * config.model.omega_p)?;
            return Ok(ModeSpectrum {
                kpoint: *kpoint,
                polarization: config.polarization,
                half_gap: config.half_gap,
                surface_modes: surface,
                waveguide_modes: band,
                residuals,
                reflection_pole: pole,
                surface_winding: sw,
                band_winding: bw,
                phase_curve,
            });
        }
        if density >= 6400 {
            let found = surface.len() + band.len();
            return Err(CavityError::UnresolvedRoot { found, expected: expected_surface + bw });
        }
        density *= 4;
    }
}

fn mode_windings(config: &CavityConfig, kp: &KPoint, surface: &[f64], band: &[f64], pole: Option<f64>) -> Result<(i64, i64), CavityError> {
    let (wm, wp) = (kp.omega_minus, kp.omega_plus);
    let margin = |lo: f64, hi: f64, inside: &[f64]| {
        let mut d = 1e-3 * (hi - lo);
        for &x in inside {
            d = d.min(0.5 * (x - lo)).min(0.5 * (hi - x));
        }
        d
    };
    let _ = pole;
    let ds = margin(0.0, wm, surface);
    let hs = 0.05 * wm;
    let sw = winding_number(|w| dispersion_with_derivative(w, config, kp, Sheet::Physical), ds, wm - ds, -hs, hs, 1e-7)?.winding;
    let db = margin(wm, wp, band);
    let hb = 0.01 * (wp - wm);
    let bw = winding_number(|w| dispersion_with_derivative(w, config, kp, Sheet::BandContinuation), wm + db, wp - db, -hb, hb, 1e-7)?.winding;
    Ok((sw, bw))
}

/// δ(ω) sampled on (ω₊, omega_cut] with refinement until neighbouring
/// samples differ by at most π/8.
pub fn phase_curve(config: &CavityConfig, kp: &KPoint, omega_cut: f64) -> Result<Vec<(f64, f64)>, CavityError> {
    let lo = kp.omega_plus;
    if !(omega_cut > lo) {
        return Err(CavityError::InvalidParameter("omega_cut must exceed omega_plus".into()));
    }
    let n = 64;
    let at = |s: f64| lo + (omega_cut - lo) * s * s;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for i in 1..=n {
        let s = i as f64 / n as f64;
        pts.push((s, phase_shift(config, kp, at(s))?));
    }
    for _ in 0..30 {
        let mut next = Vec::with_capacity(pts.len() * 2);
        let mut refined = false;
        for w in pts.windows(2) {
            next.push(w[0]);
            if (w[1].1 - w[0].1).abs() > PI / 8.0 {
                let s = 0.5 * (w[0].0 + w[1].0);
                next.push((s, phase_shift(config, kp, at(s))?));
                refined = true;
            }
        }
        next.push(*pts.last().expect("non-empty"));
        pts = next;
        if !refined {
            break;
        }
    }
    let curve: Vec<(f64, f64)> = pts.into_iter().map(|(s, d)| (at(s), d)).collect();
    for w in curve.windows(2) {
        let jump = (w[1].1 - w[0].1).abs();
        if jump > 0.5 * PI {
            return Err(CavityError::UnwrapError { omega: w[1].0, jump });
        }
    }
    Ok(curve)
}
