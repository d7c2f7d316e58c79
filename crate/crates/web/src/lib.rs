//! wasm-bindgen bindings used by `www/index.html`. Every export returns a JSON string.

use lifshitz::casimir::{energy_imaginary_axis, ideal_metal_energy};
use lifshitz::cavity::{find_modes, CavityConfig, KPoint, Polarization};
use lifshitz::fdt::{oscillator_truncation_bound, QuantumSystem};
use lifshitz::DispersionModel;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn model(name: &str, gamma: f64) -> Result<DispersionModel, String> {
    match name {
        "plasma" => DispersionModel::plasma(1.0).map_err(|e| e.to_string()),
        "drude" => DispersionModel::drude(1.0, gamma).map_err(|e| e.to_string()),
        other => Err(format!("unknown model {other:?}")),
    }
}

fn polarization(name: &str) -> Result<Polarization, String> {
    match name {
        "TE" | "te" => Ok(Polarization::TE),
        "TM" | "tm" => Ok(Polarization::TM),
        other => Err(format!("unknown polarization {other:?}")),
    }
}

/// Zero-temperature energy per area for half-gap `a`.
pub fn energy_json(a: f64, model_name: &str, gamma: f64) -> Result<String, String> {
    // polarization is ignored: the energy sums TE and TM
    let cfg = CavityConfig::new(a, model(model_name, gamma)?, Polarization::TM).map_err(|e| e.to_string())?;
    let r = energy_imaginary_axis(&cfg).map_err(|e| e.to_string())?;
    let ideal = ideal_metal_energy(2.0 * a);
    Ok(json!({
        "a": a,
        "energy": r.value,
        "error_estimate": r.error_bound(),
        "by_polarization": { "TE": r.by_polarization[0], "TM": r.by_polarization[1] },
        "ideal_metal": ideal,
        "ratio_to_ideal": r.value / ideal,
    })
    .to_string())
}

/// Surface and waveguide modes of the plasma cavity at in-plane wave number `k`.
pub fn modes_json(a: f64, k: f64, sigma: &str) -> Result<String, String> {
    let m = model("plasma", 0.0)?;
    let cfg = CavityConfig::new(a, m, polarization(sigma)?).map_err(|e| e.to_string())?;
    let kp = KPoint::new(k, &m).map_err(|e| e.to_string())?;
    let s = find_modes(&cfg, &kp).map_err(|e| e.to_string())?;
    Ok(json!({
        "k": k,
        "omega_minus": kp.omega_minus,
        "omega_plus": kp.omega_plus,
        "surface_modes": s.surface_modes,
        "waveguide_modes": s.waveguide_modes,
        "reflection_pole": s.reflection_pole,
    })
    .to_string())
}

/// Fluctuation-dissipation check on a preset system (`two-level` or `oscillator`).
pub fn fdt_json(preset: &str, beta: f64, omega0: f64, dim: usize) -> Result<String, String> {
    let (system, exact, bound) = match preset {
        "two-level" => (QuantumSystem::two_level(omega0, beta).map_err(|e| e.to_string())?, 1.0, 0.0),
        "oscillator" => (
            QuantumSystem::oscillator(dim, omega0, 1.0, beta).map_err(|e| e.to_string())?,
            0.5 / (omega0 * (0.5 * beta * omega0).tanh()),
            oscillator_truncation_bound(dim, omega0, 1.0, beta),
        ),
        other => return Err(format!("unknown preset {other:?}")),
    };
    let r = system.fdt_verify(0).map_err(|e| e.to_string())?;
    let kms = system.kms_check(0, 0).map_err(|e| e.to_string())?;
    Ok(json!({
        "dim": system.dim(),
        "lhs": r.lhs,
        "rhs": r.rhs,
        "abs_error": r.abs_error,
        "kms_ratio_error": kms.max_ratio_error,
        "exact": exact,
        "truncation_bound": bound,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn energy(a: f64, model: &str, gamma: f64) -> Result<String, JsError> {
    energy_json(a, model, gamma).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn modes(a: f64, k: f64, sigma: &str) -> Result<String, JsError> {
    modes_json(a, k, sigma).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn fdt_check(preset: &str, beta: f64, omega0: f64, dim: usize) -> Result<String, JsError> {
    fdt_json(preset, beta, omega0, dim).map_err(|e| JsError::new(&e))
}
