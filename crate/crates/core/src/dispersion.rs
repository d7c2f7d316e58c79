//! Plasma and Drude permittivities over the complex frequency plane.
//!
//! Internal units have ħ = c = k_B = 1. Most callers also set ω_p = 1, which
//! makes lengths dimensionless in units of c/ω_p.

use num_complex::Complex64;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Plasma,
    Drude,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DispersionError {
    #[error("permittivity has a pole at omega = {re} + {im}i")]
    Domain { re: f64, im: f64 },
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("empty probe list")]
    NoProbes,
}

/// ε(ω) = 1 − ω_p²/ω² (plasma) or 1 − ω_p²/(ω(ω + 2iγ)) (Drude).
///
/// The damping enters the Drude formula as 2γ; `gamma` stores γ itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionModel {
    pub kind: ModelKind,
    pub omega_p: f64,
    pub gamma: f64,
}

impl DispersionModel {
    pub fn plasma(omega_p: f64) -> Result<Self, DispersionError> {
        Self::new(ModelKind::Plasma, omega_p, 0.0)
    }

    pub fn drude(omega_p: f64, gamma: f64) -> Result<Self, DispersionError> {
        Self::new(ModelKind::Drude, omega_p, gamma)
    }

    pub fn new(kind: ModelKind, omega_p: f64, gamma: f64) -> Result<Self, DispersionError> {
        if !(omega_p > 0.0 && omega_p.is_finite()) {
            return Err(DispersionError::InvalidParameter(format!("omega_p must be positive, got {omega_p}")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(DispersionError::InvalidParameter(format!("gamma must be non-negative, got {gamma}")));
        }
        let gamma = if kind == ModelKind::Plasma { 0.0 } else { gamma };
        Ok(Self { kind, omega_p, gamma })
    }

    /// Damping actually used by the formulas (zero for the plasma model).
    pub fn damping(&self) -> f64 {
        match self.kind {
            ModelKind::Plasma => 0.0,
            ModelKind::Drude => self.gamma,
        }
    }

    /// Plasma model, or Drude with γ = 0.
    pub fn is_dissipationless(&self) -> bool {
        self.damping() == 0.0
    }

    fn pole_at(&self, omega: Complex64) -> bool {
        omega == Complex64::new(0.0, 0.0) || (self.damping() > 0.0 && omega == Complex64::new(0.0, -2.0 * self.damping()))
    }

    pub fn permittivity(&self, omega: Complex64) -> Result<Complex64, DispersionError> {
        if self.pole_at(omega) {
            return Err(DispersionError::Domain { re: omega.re, im: omega.im });
        }
        let wp2 = self.omega_p * self.omega_p;
        let denom = omega * (omega + Complex64::new(0.0, 2.0 * self.damping()));
        Ok(Complex64::new(1.0, 0.0) - wp2 / denom)
    }

    /// ω²ε(ω). Entire for the plasma model; for Drude the only pole is at −2iγ.
    pub fn omega_sq_permittivity(&self, omega: Complex64) -> Complex64 {
        let wp2 = self.omega_p * self.omega_p;
        let g = self.damping();
        if g == 0.0 {
            omega * omega - wp2
        } else {
            omega * omega - wp2 * omega / (omega + Complex64::new(0.0, 2.0 * g))
        }
    }

    /// d(ω²ε)/dω.
    pub fn omega_sq_permittivity_derivative(&self, omega: Complex64) -> Complex64 {
        let wp2 = self.omega_p * self.omega_p;
        let g = self.damping();
        if g == 0.0 {
            omega * 2.0
        } else {
            let s = omega + Complex64::new(0.0, 2.0 * g);
            omega * 2.0 - Complex64::new(0.0, 2.0 * g) * wp2 / (s * s)
        }
    }

    /// ζ²ε(iζ) = ζ² + ω_p²ζ/(ζ + 2γ), real for real ζ. Negative ζ gives the
    /// value on the negative imaginary axis.
    pub fn imaginary_axis_omega_sq_eps(&self, zeta: f64) -> f64 {
        let wp2 = self.omega_p * self.omega_p;
        let g = self.damping();
        if g == 0.0 {
            zeta * zeta + wp2
        } else {
            zeta * zeta + wp2 * zeta / (zeta + 2.0 * g)
        }
    }

    pub fn symmetry_report(&self, probes: &[Complex64], tolerance: f64) -> Result<SymmetryReport, DispersionError> {
        if probes.is_empty() {
            return Err(DispersionError::NoProbes);
        }
        let mut even = 0.0f64;
        let mut axis = 0.0f64;
        let mut reflection = 0.0f64;
        for &w in probes {
            let e = self.permittivity(w)?;
            let scale = e.norm().max(1.0);
            even = even.max((e - self.permittivity(-w)?).norm() / scale);
            reflection = reflection.max((e - self.permittivity(-w.conj())?.conj()).norm() / scale);
            let zeta = w.norm();
            let on_axis = self.permittivity(Complex64::new(0.0, zeta))?;
            axis = axis.max(on_axis.im.abs() / on_axis.norm().max(1.0));
        }
        Ok(SymmetryReport {
            even_in_omega: even < tolerance,
            real_on_imaginary_axis: axis < tolerance,
            reflection_symmetric: reflection < tolerance,
            even_violation: even,
            imaginary_axis_violation: axis,
            reflection_violation: reflection,
            max_violation: even.max(axis).max(reflection),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub even_in_omega: bool,
    pub real_on_imaginary_axis: bool,
    /// ε(−ω̄)̄ = ε(ω), reality of the underlying response.
    pub reflection_symmetric: bool,
    pub even_violation: f64,
    pub imaginary_axis_violation: f64,
    pub reflection_violation: f64,
    pub max_violation: f64,
}

pub const DEFAULT_SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Conversion between internal units (ħ = c = k_B = 1, frequencies in units
/// of ω_p) and SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitSystem {
    /// Plasma frequency in rad/s that sets the frequency scale.
    pub omega_p_si: f64,
}

impl UnitSystem {
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const C: f64 = 299_792_458.0;
    pub const K_B: f64 = 1.380_649e-23;

    pub fn new(omega_p_si: f64) -> Self {
        Self { omega_p_si }
    }

    /// Metres per internal length unit c/ω_p.
    pub fn length(&self) -> f64 {
        Self::C / self.omega_p_si
    }

    /// Kelvin per internal temperature unit ħω_p/k_B.
    pub fn temperature(&self) -> f64 {
        Self::HBAR * self.omega_p_si / Self::K_B
    }

    /// J/m² per internal energy-per-area unit ħω_p³/c².
    pub fn energy_per_area(&self) -> f64 {
        Self::HBAR * self.omega_p_si.powi(3) / (Self::C * Self::C)
    }

    /// Pa per internal pressure unit ħω_p⁴/c³.
    pub fn pressure(&self) -> f64 {
        Self::HBAR * self.omega_p_si.powi(4) / Self::C.powi(3)
    }
}
