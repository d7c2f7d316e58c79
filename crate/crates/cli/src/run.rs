//! Dispatch of a resolved configuration to the library and report assembly.

use lifshitz::casimir::{
    casimir_pressure, default_omega_cut, drude_anomaly, energy_imaginary_axis_with, energy_real_axis_per_k, free_energy_matsubara_with,
    ideal_metal_energy, ideal_metal_pressure, MatsubaraGrid,
};
use lifshitz::cavity::{find_modes, CavityConfig, KPoint, Polarization};
use lifshitz::dispersion::{DispersionModel, ModelKind};
use lifshitz::fdt::{oscillator_truncation_bound, parse_complex_matrix, CMatrix, QuantumSystem};
use lifshitz::response::{ToyGreenModel, Verdict};
use lifshitz::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, ModelArg, OutputFormat, Params, RunConfig, SigmaArg};
use crate::error::CliError;

/// One finished computation.
#[derive(Debug, Clone)]
pub struct Computed {
    pub route: &'static str,
    pub value: Value,
    pub result: f64,
    pub error_estimate: f64,
    /// result × (2a)³ for energies, × (2a)⁴ for pressures.
    pub scaled: Option<f64>,
    pub truncation_report: Value,
    pub checks: Vec<Check>,
    pub exit_code: i32,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: &'static str, value: f64, bound: f64) -> Self {
        Self { name, value, bound, passed: value < bound }
    }
}

pub struct Output {
    pub text: String,
    pub exit_code: i32,
    pub summary: String,
}

fn model(p: &Params) -> Result<DispersionModel, CliError> {
    let kind = match p.model {
        ModelArg::Plasma => ModelKind::Plasma,
        ModelArg::Drude => ModelKind::Drude,
    };
    Ok(DispersionModel::new(kind, p.omega_p, p.gamma)?)
}

fn polarization(s: SigmaArg) -> Polarization {
    match s {
        SigmaArg::TE => Polarization::TE,
        SigmaArg::TM => Polarization::TM,
    }
}

fn cavity(p: &Params) -> Result<CavityConfig, CliError> {
    Ok(CavityConfig::new(p.a, model(p)?, polarization(p.sigma))?)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn units(command: Command) -> Value {
    let value = match command {
        Command::Energy | Command::FreeEnergy | Command::Anomaly => "energy per unit plate area",
        Command::Pressure => "force per unit plate area, negative is attractive",
        Command::Spectrum => "frequency",
        Command::Poles => "frequency",
        Command::EquivalenceCheck => "energy per unit plate area per unit k-space area",
        Command::FdtCheck => "observable squared",
    };
    json!({ "system": "hbar = c = k_B = 1", "value": value })
}

pub fn compute(command: Command, p: &Params) -> Result<Computed, CliError> {
    p.validate(command)?;
    match command {
        Command::Energy => energy(p),
        Command::FreeEnergy => free_energy(p),
        Command::Pressure => pressure(p),
        Command::Spectrum => spectrum(p),
        Command::Poles => poles(p),
        Command::EquivalenceCheck => equivalence(p),
        Command::FdtCheck => fdt_check(p),
        Command::Anomaly => anomaly(p),
    }
}

fn energy(p: &Params) -> Result<Computed, CliError> {
    let cfg = cavity(p)?;
    let r = energy_imaginary_axis_with(&cfg, p.tol)?;
    let gap = 2.0 * p.a;
    let ideal = ideal_metal_energy(gap);
    Ok(Computed {
        route: "imaginary_axis",
        value: json!({
            "energy": r.value,
            "by_polarization": { "TE": r.by_polarization[0], "TM": r.by_polarization[1] },
            "ideal_metal_energy": ideal,
            "ratio_to_ideal": r.value / ideal,
        }),
        result: r.value,
        error_estimate: r.error_bound(),
        scaled: Some(r.value * gap.powi(3)),
        truncation_report: to_value(&r.truncation_report),
        checks: vec![Check { name: "negative", value: r.value, bound: 0.0, passed: r.value < 0.0 }],
        exit_code: 0,
    })
}

fn free_energy(p: &Params) -> Result<Computed, CliError> {
    let cfg = cavity(p)?;
    let t = p.t.expect("validated");
    let grid = MatsubaraGrid::new(t)?;
    let r = free_energy_matsubara_with(&cfg, &grid, p.tol)?;
    let gap = 2.0 * p.a;
    Ok(Computed {
        route: "matsubara",
        value: json!({
            "free_energy": r.value,
            "by_polarization": { "TE": r.by_polarization[0], "TM": r.by_polarization[1] },
            "matsubara_terms": r.truncation_report.cutoff,
        }),
        result: r.value,
        error_estimate: r.error_bound(),
        scaled: Some(r.value * gap.powi(3)),
        truncation_report: to_value(&r.truncation_report),
        checks: Vec::new(),
        exit_code: 0,
    })
}

fn pressure(p: &Params) -> Result<Computed, CliError> {
    let cfg = cavity(p)?;
    let grid = p.t.map(MatsubaraGrid::new).transpose()?;
    let r = casimir_pressure(&cfg, grid.as_ref())?;
    let gap = 2.0 * p.a;
    let ideal = ideal_metal_pressure(gap);
    Ok(Computed {
        route: if grid.is_some() { "matsubara" } else { "imaginary_axis" },
        value: json!({
            "pressure": r.value,
            "ideal_metal_pressure": ideal,
            "ratio_to_ideal": r.value / ideal,
        }),
        result: r.value,
        error_estimate: r.error_estimate,
        scaled: Some(r.value * gap.powi(4)),
        truncation_report: json!({ "differencing_step": r.step, "derivative_error": r.error_estimate }),
        checks: Vec::new(),
        exit_code: 0,
    })
}

fn spectrum(p: &Params) -> Result<Computed, CliError> {
    let cfg = cavity(p)?;
    let kp = KPoint::new(p.k, &cfg.model)?;
    let s = find_modes(&cfg, &kp)?;
    // a reflection pole on the surface contour is a double pole of D
    let expected = s.surface_winding + s.band_winding + if s.reflection_pole.is_some() { 2 } else { 0 };
    let mut value = to_value(&s);
    if let Value::Object(m) = &mut value {
        m.remove("phase_curve");
        m.insert("mode_count".into(), json!(s.mode_count()));
    }
    let worst = s.residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    Ok(Computed {
        route: "argument_principle",
        value,
        result: s.mode_count() as f64,
        error_estimate: worst,
        scaled: None,
        truncation_report: Value::Null,
        checks: vec![Check {
            name: "count_matches_winding",
            value: (s.mode_count() as i64 - expected).abs() as f64,
            bound: 0.5,
            passed: s.mode_count() as i64 == expected,
        }],
        exit_code: 0,
    })
}

fn poles(p: &Params) -> Result<Computed, CliError> {
    let g = ToyGreenModel::new(p.coupling, model(p)?)?;
    let catalog = g.pole_catalog();
    let report = g.fdt_compatibility_report(p.beta)?;
    Ok(Computed {
        route: "closed_form",
        value: json!({ "catalog": catalog, "fdt_compatibility": report }),
        result: catalog.poles.len() as f64,
        error_estimate: 0.0,
        scaled: None,
        truncation_report: Value::Null,
        checks: vec![Check {
            name: "fdt_compatible",
            value: (report.verdict == Verdict::Compatible) as u8 as f64,
            bound: 1.0,
            passed: report.verdict == Verdict::Compatible,
        }],
        exit_code: 0,
    })
}

fn equivalence(p: &Params) -> Result<Computed, CliError> {
    let cfg = cavity(p)?;
    let kp = KPoint::new(p.k, &cfg.model)?;
    let cut = default_omega_cut(&cfg, &kp, p.tol);
    let r = energy_real_axis_per_k(&cfg, &kp, cut)?;
    let ok = r.within_bounds();
    Ok(Computed {
        route: "real_axis_vs_imaginary_axis",
        value: json!({
            "mode_sum_part": r.mode_sum_part,
            "continuum_part": r.continuum_part,
            "real_axis_total": r.real_axis_total(),
            "imaginary_axis_part": r.imaginary_axis_part,
            "mismatch": r.mismatch,
            "combined_bound": r.combined_bound,
            "surface_modes": r.modes.surface_modes,
            "waveguide_modes": r.modes.waveguide_modes,
        }),
        result: r.mismatch,
        error_estimate: r.combined_bound,
        scaled: None,
        truncation_report: json!({ "omega_cut": r.omega_cut, "continuum_tail": r.continuum_tail, "combined_bound": r.combined_bound }),
        checks: vec![Check {
            name: "within_bounds",
            value: r.mismatch,
            bound: r.combined_bound.max(1e-3 * r.imaginary_axis_part.abs()),
            passed: ok,
        }],
        exit_code: if ok { 0 } else { 3 },
    })
}

fn read_matrix(path: &str) -> Result<CMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::validation(format!("cannot read {path}: {e}")))?;
    parse_complex_matrix(&text).map_err(|e| CliError::validation(format!("{path}: {e}")))
}

fn fdt_check(p: &Params) -> Result<Computed, CliError> {
    let (system, oracle) = match p.preset.as_str() {
        "two-level" => (QuantumSystem::two_level(p.omega0, p.beta)?, Some((1.0, 0.0))),
        "oscillator" => {
            let s = QuantumSystem::oscillator(p.dim, p.omega0, 1.0, p.beta)?;
            let exact = 0.5 / (p.omega0 * (0.5 * p.beta * p.omega0).tanh());
            (s, Some((exact, oscillator_truncation_bound(p.dim, p.omega0, 1.0, p.beta))))
        }
        _ => {
            let h = read_matrix(p.matrix.as_deref().expect("validated"))?;
            let a = read_matrix(p.observable.as_deref().expect("validated"))?;
            (QuantumSystem::new(h, vec![("A".into(), a)], p.beta)?, None)
        }
    };
    let r = system.fdt_verify(0)?;
    let kms = system.kms_check(0, 0)?;
    let mut checks = vec![Check::below("fdt_abs_error", r.abs_error, 1e-10), Check::below("kms_ratio_error", kms.max_ratio_error, 1e-10)];
    let mut value = json!({
        "observable": system.observable_names()[0],
        "dim": system.dim(),
        "lhs": r.lhs,
        "rhs": r.rhs,
        "abs_error": r.abs_error,
        "kms": kms,
    });
    if let Some((exact, truncation)) = oracle {
        let dev = (r.lhs - exact).abs();
        value["exact"] = json!(exact);
        value["truncation_bound"] = json!(truncation);
        checks.push(Check::below("exact_deviation", dev, 1e-8_f64.max(2.0 * truncation)));
    }
    Ok(Computed {
        route: "line_spectrum",
        value,
        result: r.lhs,
        error_estimate: r.abs_error,
        scaled: None,
        truncation_report: Value::Null,
        checks,
        exit_code: 0,
    })
}

fn anomaly(p: &Params) -> Result<Computed, CliError> {
    let cfg = cavity(p)?;
    let t = p.t.expect("validated");
    let r = drude_anomaly(&cfg, t, p.m_max)?;
    let noise = r.noise_floor + r.tail_bound;
    let v: Complex64 = r.value;
    let mut checks = vec![Check::below("real_part_relative", v.re.abs(), 1e-10 * v.norm())];
    if r.gamma > 0.0 {
        checks.push(Check { name: "above_noise", value: v.norm(), bound: 10.0 * noise, passed: v.norm() > 10.0 * noise });
    } else {
        checks[0].passed = v.re == 0.0 && v.im == 0.0;
    }
    Ok(Computed {
        route: "matsubara_remainder",
        value: json!({ "re": v.re, "im": v.im, "abs": v.norm(), "noise_floor": r.noise_floor }),
        result: v.im,
        error_estimate: noise,
        scaled: None,
        truncation_report: json!({ "zeta_cutoff": r.zeta_cutoff, "tail_bound": r.tail_bound, "m_max": r.m_max }),
        checks,
        exit_code: 0,
    })
}

fn report(command: Command, p: &Params, c: &Computed) -> Value {
    json!({
        "command": command.name(),
        "inputs": p,
        "units": units(command),
        "route": c.route,
        "value": c.value,
        "error_estimate": c.error_estimate,
        "truncation_report": c.truncation_report,
        "checks": c.checks,
    })
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("LIFSHITZ_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::validation(format!("LIFSHITZ_THREADS must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::validation(format!("thread pool: {e}")))
}

fn fmt_f64(x: f64) -> String {
    // Shortest round-trip representation, same as the JSON output.
    serde_json::to_string(&x).unwrap_or_default()
}

pub fn run(cfg: &RunConfig) -> Result<Output, CliError> {
    let Some(sweep) = &cfg.sweep else {
        let c = compute(cfg.command, &cfg.params)?;
        let text = serde_json::to_string_pretty(&report(cfg.command, &cfg.params, &c)).expect("json");
        let summary = format!("{} via {}: {} ± {:e}", cfg.command.name(), c.route, c.result, c.error_estimate);
        return Ok(Output { text, exit_code: c.exit_code, summary });
    };
    let pool = thread_pool()?;
    let rows: Vec<(f64, Params, Result<Computed, CliError>)> = pool.install(|| {
        sweep
            .values
            .par_iter()
            .map(|&v| {
                let p = cfg.params.with(&sweep.parameter, v);
                let r = compute(cfg.command, &p);
                (v, p, r)
            })
            .collect()
    });
    let failures = rows.iter().filter(|r| r.2.is_err()).count();
    let summary = format!("{} sweep over {}: {} rows, {} failed", cfg.command.name(), sweep.parameter, rows.len(), failures);
    let text = match cfg.format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| CliError::numerics(format!("csv: {e}"));
            w.write_record(["parameter", "value", "result", "error_estimate", "scaled_result", "error"]).map_err(io)?;
            for (v, _, r) in &rows {
                let rec = match r {
                    Ok(c) => [sweep.parameter.clone(), fmt_f64(*v), fmt_f64(c.result), fmt_f64(c.error_estimate), c.scaled.map(fmt_f64).unwrap_or_default(), String::new()],
                    Err(e) => [sweep.parameter.clone(), fmt_f64(*v), String::new(), String::new(), String::new(), e.message.clone()],
                };
                w.write_record(&rec).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::numerics(format!("csv: {e}")))?;
            String::from_utf8(bytes).expect("utf-8").trim_end().to_string()
        }
        OutputFormat::Json => {
            let items: Vec<Value> = rows
                .iter()
                .map(|(v, p, r)| match r {
                    Ok(c) => {
                        let mut rep = report(cfg.command, p, c);
                        rep["sweep_value"] = json!(v);
                        if let Some(s) = c.scaled {
                            rep["scaled_result"] = json!(s);
                        }
                        rep
                    }
                    Err(e) => json!({ "sweep_value": v, "inputs": p, "error": e }),
                })
                .collect();
            let doc = json!({
                "command": cfg.command.name(),
                "inputs": cfg.params,
                "sweep": sweep,
                "units": units(cfg.command),
                "rows": items,
            });
            serde_json::to_string_pretty(&doc).expect("json")
        }
    };
    Ok(Output { text, exit_code: 0, summary })
}
