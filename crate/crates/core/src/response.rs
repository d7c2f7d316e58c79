//! Toy retarded Green function G(ω) = g/(ω²ε(ω)) for the plasma and Drude
//! permittivities: pole catalogs, exact line spectra and whether the
//! fluctuation-dissipation theorem can be applied to them.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::dispersion::{DispersionModel, ModelKind};
use crate::spectrum::{LineSpectrum, SpectralLine};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResponseError {
    #[error("operation needs a {expected} model")]
    ModelMismatch { expected: &'static str },
    #[error("gamma = {gamma} is not below omega_p = {omega_p}; the partial-fraction split needs an underdamped model")]
    DegenerateModel { gamma: f64, omega_p: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("omega = {re} + {im}i is a pole of the Green function")]
    OnPole { re: f64, im: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToyGreenModel {
    pub coupling: f64,
    pub dispersion: DispersionModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PoleClass {
    /// Real pole approached from above by the retarded prescription ω → ω + i0.
    RealAxisLimit,
    LowerHalfPlane,
    Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pole {
    pub location: Complex64,
    pub residue: Complex64,
    pub class: PoleClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleCatalog {
    pub poles: Vec<Pole>,
    /// Real-axis poles are bypassed from above (ω → ω + i0).
    pub retarded_bypass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrudeDecomposition {
    pub g1: Complex64,
    pub g2: Complex64,
    pub total: Complex64,
    pub renormalized_frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Compatible,
    Incompatible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncompatibilityReason {
    /// A pole off the real axis: Im G is not a delta comb and the symbolic
    /// identity 1/(x + i0) = P/x − iπδ(x) does not apply to it.
    OffAxisPole { location: Complex64 },
    /// A real-axis pole with a non-real residue feeds a delta function into
    /// Re G instead of Im G.
    ImaginaryResidueOnAxis { location: Complex64, residue: Complex64 },
    NegativeSpectralWeight { frequency: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub im_part_real_comb: bool,
    pub positive_spectrum_constructible: bool,
    pub verdict: Verdict,
    pub reasons: Vec<IncompatibilityReason>,
}

const MERGE_TOL: f64 = 1e-12;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl ToyGreenModel {
    pub fn new(coupling: f64, dispersion: DispersionModel) -> Result<Self, ResponseError> {
        if !(coupling > 0.0 && coupling.is_finite()) {
            return Err(ResponseError::InvalidParameter(format!("coupling g must be positive, got {coupling}")));
        }
        Ok(Self { coupling, dispersion })
    }

    /// g/(ω²ε(ω)) evaluated directly.
    pub fn green_function(&self, omega: Complex64) -> Result<Complex64, ResponseError> {
        let d = self.dispersion.omega_sq_permittivity(omega);
        let drude_pole = self.dispersion.damping() > 0.0 && omega == c(0.0, -2.0 * self.dispersion.damping());
        if d == Complex64::default() || drude_pole || !d.is_finite() {
            return Err(ResponseError::OnPole { re: omega.re, im: omega.im });
        }
        Ok(self.coupling / d)
    }

    /// Poles and residues of g/(ω²ε(ω)), found from the cubic numerator
    /// ω(ω² + 2iγω − ω_p²) for any damping.
    pub fn pole_catalog(&self) -> PoleCatalog {
        let g = self.coupling;
        let wp = self.dispersion.omega_p;
        let gamma = self.dispersion.damping();
        if gamma == 0.0 {
            let poles = vec![
                Pole { location: c(-wp, 0.0), residue: c(-g / (2.0 * wp), 0.0), class: PoleClass::RealAxisLimit },
                Pole { location: c(wp, 0.0), residue: c(g / (2.0 * wp), 0.0), class: PoleClass::RealAxisLimit },
            ];
            return PoleCatalog { poles, retarded_bypass: true };
        }
        let shift = c(wp * wp - gamma * gamma, 0.0).sqrt();
        let roots = [c(0.0, -gamma) - shift, c(0.0, 0.0), c(0.0, -gamma) + shift];
        let poles = roots
            .iter()
            .map(|&w| {
                let num = (w + c(0.0, 2.0 * gamma)) * g;
                let deriv = w * w * 3.0 + c(0.0, 4.0 * gamma) * w - wp * wp;
                let class = if w == Complex64::default() {
                    PoleClass::Origin
                } else if w.im < 0.0 {
                    PoleClass::LowerHalfPlane
                } else {
                    PoleClass::RealAxisLimit
                };
                Pole { location: w, residue: num / deriv, class }
            })
            .collect();
        PoleCatalog { poles, retarded_bypass: true }
    }

    /// Im G(ω + i0) for a dissipationless model: lines of weight ∓πg/(2ω_p)
    /// at ±ω_p.
    pub fn green_plasma_lines(&self) -> Result<(LineSpectrum, PoleCatalog), ResponseError> {
        if !self.dispersion.is_dissipationless() {
            return Err(ResponseError::ModelMismatch { expected: "plasma" });
        }
        let catalog = self.pole_catalog();
        let lines = catalog
            .poles
            .iter()
            .map(|p| SpectralLine { frequency: p.location.re, weight: c(-PI * p.residue.re, 0.0) })
            .collect();
        Ok((LineSpectrum::from_lines(lines, MERGE_TOL), catalog))
    }

    /// J(ω) = 2 Im G(ω)/(e^{−βω} − 1), the correlator spectral density
    /// implied by the fluctuation-dissipation relation.
    pub fn plasma_correlator_spectrum(&self, beta: f64) -> Result<LineSpectrum, ResponseError> {
        if !(beta > 0.0) {
            return Err(ResponseError::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        let (im, _) = self.green_plasma_lines()?;
        let lines = im
            .lines()
            .iter()
            .map(|l| SpectralLine { frequency: l.frequency, weight: l.weight * 2.0 / (-beta * l.frequency).exp_m1() })
            .collect();
        LineSpectrum::from_lines(lines, MERGE_TOL)
            .into_positive()
            .map_err(|e| ResponseError::InvalidParameter(e.to_string()))
    }

    /// Splits the Drude Green function into the plasma-like part
    /// G₁ = g/((ω + iγ)² − ω̃_p²) and the remainder G₂ = 2iγg/(ω((ω + iγ)² − ω̃_p²)),
    /// each written as explicit partial fractions.
    pub fn drude_decomposition(&self, omega: Complex64) -> Result<(DrudeDecomposition, PoleCatalog), ResponseError> {
        let model = self.dispersion;
        if model.kind != ModelKind::Drude || model.gamma == 0.0 {
            return Err(ResponseError::ModelMismatch { expected: "dissipative Drude" });
        }
        let (g, gamma, wp) = (self.coupling, model.gamma, model.omega_p);
        if gamma >= wp {
            return Err(ResponseError::DegenerateModel { gamma, omega_p: wp });
        }
        let wt = (wp * wp - gamma * gamma).sqrt();
        let ig = c(0.0, gamma);
        let plus = c(wt, -gamma);
        let minus = c(-wt, -gamma);
        if omega == plus || omega == minus || omega == Complex64::default() {
            return Err(ResponseError::OnPole { re: omega.re, im: omega.im });
        }
        let g1 = (g / (2.0 * wt)) * (1.0 / (omega - plus) - 1.0 / (omega - minus));
        let r0 = c(0.0, -2.0 * gamma * g / (wp * wp));
        let rp = ig * g / (wt * (c(wt, 0.0) - ig));
        let rm = ig * g / (wt * (c(wt, 0.0) + ig));
        let g2 = r0 / omega + rp / (omega - plus) + rm / (omega - minus);
        let catalog = PoleCatalog {
            poles: vec![
                Pole { location: minus, residue: -g / (2.0 * wt) + rm, class: PoleClass::LowerHalfPlane },
                Pole { location: Complex64::default(), residue: r0, class: PoleClass::Origin },
                Pole { location: plus, residue: g / (2.0 * wt) + rp, class: PoleClass::LowerHalfPlane },
            ],
            retarded_bypass: true,
        };
        Ok((DrudeDecomposition { g1, g2, total: g1 + g2, renormalized_frequency: wt }, catalog))
    }

    pub fn fdt_compatibility_report(&self, beta: f64) -> Result<CompatibilityReport, ResponseError> {
        if !(beta > 0.0) {
            return Err(ResponseError::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        let catalog = self.pole_catalog();
        let scale = catalog.poles.iter().map(|p| p.residue.norm()).fold(0.0, f64::max);
        let mut reasons = Vec::new();
        for p in &catalog.poles {
            if p.location.im != 0.0 {
                reasons.push(IncompatibilityReason::OffAxisPole { location: p.location });
            } else if p.residue.im.abs() > 1e-14 * scale {
                reasons.push(IncompatibilityReason::ImaginaryResidueOnAxis { location: p.location, residue: p.residue });
            }
        }
        let comb = reasons.is_empty();
        let mut positive = false;
        if comb {
            match self.plasma_correlator_spectrum(beta) {
                Ok(_) => positive = true,
                Err(_) => {
                    let (im, _) = self.green_plasma_lines()?;
                    for l in im.lines() {
                        let j = l.weight.re * 2.0 / (-beta * l.frequency).exp_m1();
                        if !(j > 0.0) {
                            reasons.push(IncompatibilityReason::NegativeSpectralWeight { frequency: l.frequency });
                        }
                    }
                }
            }
        }
        let verdict = if comb && positive { Verdict::Compatible } else { Verdict::Incompatible };
        Ok(CompatibilityReport { im_part_real_comb: comb, positive_spectrum_constructible: positive, verdict, reasons })
    }
}
