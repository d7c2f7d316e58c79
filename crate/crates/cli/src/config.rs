//! Run configuration: command-line flags layered over an optional
//! `key = value` file.

use std::collections::BTreeMap;
use std::path::Path;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "lifshitz", version, about = "Casimir energies, mode spectra and fluctuation-dissipation checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Plain `key = value` file; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Emit CSV rows (needs --sweep).
    #[arg(long, global = true)]
    pub csv: bool,
    /// Sweep one parameter, e.g. `a=1,2,4` (a, t, gamma or k).
    #[arg(long, global = true)]
    pub sweep: Option<String>,
    /// Human-readable summary on standard error.
    #[arg(long, global = true)]
    pub verbose: bool,
    #[command(flatten)]
    pub params: ParamFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Zero-temperature energy per unit area (imaginary-axis route).
    Energy,
    /// Free energy per unit area by the Matsubara sum.
    FreeEnergy,
    /// Casimir pressure, at T = 0 unless --t is given.
    Pressure,
    /// Surface and waveguide modes at one transverse wavenumber.
    Spectrum,
    /// Poles of g/(ω²ε(ω)) and the fluctuation-dissipation verdict.
    Poles,
    /// Real-axis spectral sum against the imaginary-axis integral at one k.
    EquivalenceCheck,
    /// Fluctuation-dissipation check on a finite quantum system.
    FdtCheck,
    /// The imaginary free-energy term of the Drude model.
    Anomaly,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Energy => "energy",
            Command::FreeEnergy => "free-energy",
            Command::Pressure => "pressure",
            Command::Spectrum => "spectrum",
            Command::Poles => "poles",
            Command::EquivalenceCheck => "equivalence-check",
            Command::FdtCheck => "fdt-check",
            Command::Anomaly => "anomaly",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Plasma,
    Drude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum SigmaArg {
    #[value(name = "TE", alias = "te")]
    TE,
    #[value(name = "TM", alias = "tm")]
    TM,
}

#[derive(Debug, Default, Args)]
pub struct ParamFlags {
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long = "omega-p", global = true, allow_negative_numbers = true)]
    pub omega_p: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Half gap width; the plates are 2a apart.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Temperature in units of ħω_p/k_B.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub t: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub sigma: Option<SigmaArg>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub k: Option<f64>,
    /// `two-level`, `oscillator` or `oscillator:N`.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub preset: Option<String>,
    /// Hamiltonian for fdt-check as a dense complex matrix file, rows of "re im" pairs.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub matrix: Option<String>,
    /// Observable for fdt-check, same format as --matrix.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub observable: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub omega0: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub coupling: Option<f64>,
    #[arg(long = "m-max", global = true, allow_negative_numbers = true)]
    pub m_max: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tol: Option<f64>,
}

/// Fully resolved parameters, echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params {
    pub model: ModelArg,
    pub omega_p: f64,
    pub gamma: f64,
    pub a: f64,
    pub t: Option<f64>,
    pub sigma: SigmaArg,
    pub k: f64,
    pub preset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<String>,
    pub beta: f64,
    pub dim: usize,
    pub omega0: f64,
    pub coupling: f64,
    pub m_max: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub params: Params,
    pub sweep: Option<Sweep>,
    pub format: OutputFormat,
    #[serde(skip)]
    pub verbose: bool,
}

pub const SWEEPABLE: [&str; 4] = ["a", "t", "gamma", "k"];

/// Parses `key = value` lines; `#` starts a comment. Keys accept either
/// dashes or underscores.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::validation(format!("config line {}: expected key = value", n + 1)))?;
        let key = key.trim().replace('_', "-");
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn from_file<T: std::str::FromStr>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, CliError> {
    match file.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| CliError::validation(format!("config key {key}: cannot parse {v:?}"))),
    }
}

fn enum_from_file<T: ValueEnum>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, CliError> {
    match file.get(key) {
        None => Ok(None),
        Some(v) => T::from_str(v, true)
            .map(Some)
            .map_err(|_| CliError::validation(format!("config key {key}: unknown value {v:?}"))),
    }
}

const KNOWN_KEYS: [&str; 17] = [
    "model", "omega-p", "gamma", "a", "t", "sigma", "k", "preset", "matrix", "observable", "beta", "dim", "omega0", "coupling", "m-max",
    "tol", "sweep",
];

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(Path::new(path))
                    .map_err(|e| CliError::validation(format!("cannot read config {path}: {e}")))?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        for key in file.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::validation(format!("unknown config key {key}")));
            }
        }
        let f = &cli.params;
        let default_model = if cli.command == Command::Anomaly { ModelArg::Drude } else { ModelArg::Plasma };
        let model = f.model.or(enum_from_file(&file, "model")?).unwrap_or(default_model);
        let default_gamma = if model == ModelArg::Drude { 0.1 } else { 0.0 };
        let matrix = f.matrix.clone().or(from_file(&file, "matrix")?);
        let observable = f.observable.clone().or(from_file(&file, "observable")?);
        let preset_text = f.preset.clone().or(from_file(&file, "preset")?);
        let mut dim = f.dim.or(from_file(&file, "dim")?);
        let preset = match (&matrix, preset_text.as_deref()) {
            (Some(_), None) => "matrix".to_string(),
            (Some(_), Some(_)) => return Err(CliError::validation("give either --preset or --matrix".into())),
            (None, None) | (None, Some("two-level")) => "two-level".to_string(),
            (None, Some("oscillator")) => "oscillator".to_string(),
            (None, Some(other)) => match other.strip_prefix("oscillator:") {
                Some(n) => {
                    let n: usize = n.parse().map_err(|_| CliError::validation(format!("bad oscillator size in {other:?}")))?;
                    dim = Some(n);
                    "oscillator".to_string()
                }
                None => return Err(CliError::validation(format!("unknown preset {other:?}"))),
            },
        };
        let params = Params {
            model,
            omega_p: f.omega_p.or(from_file(&file, "omega-p")?).unwrap_or(1.0),
            gamma: f.gamma.or(from_file(&file, "gamma")?).unwrap_or(default_gamma),
            a: f.a.or(from_file(&file, "a")?).unwrap_or(1.0),
            t: f.t.or(from_file(&file, "t")?),
            sigma: f.sigma.or(enum_from_file(&file, "sigma")?).unwrap_or(SigmaArg::TM),
            k: f.k.or(from_file(&file, "k")?).unwrap_or(1.0),
            preset,
            matrix,
            observable,
            beta: f.beta.or(from_file(&file, "beta")?).unwrap_or(1.0),
            dim: dim.unwrap_or(40),
            omega0: f.omega0.or(from_file(&file, "omega0")?).unwrap_or(1.0),
            coupling: f.coupling.or(from_file(&file, "coupling")?).unwrap_or(1.0),
            m_max: f.m_max.or(from_file(&file, "m-max")?).unwrap_or(20),
            tol: f.tol.or(from_file(&file, "tol")?).unwrap_or(1e-10),
        };
        let sweep_text = cli.sweep.clone().or_else(|| file.get("sweep").cloned());
        let sweep = sweep_text.map(|s| parse_sweep(&s)).transpose()?;
        if cli.csv && sweep.is_none() {
            return Err(CliError::validation("--csv needs --sweep".into()));
        }
        let cfg = Self {
            command: cli.command,
            params,
            sweep,
            format: if cli.csv { OutputFormat::Csv } else { OutputFormat::Json },
            verbose: cli.verbose,
        };
        // sweep rows are validated one by one so a bad value only fails its row
        if cfg.sweep.is_none() {
            cfg.params.validate(cfg.command)?;
        }
        Ok(cfg)
    }
}

pub fn parse_sweep(text: &str) -> Result<Sweep, CliError> {
    let (name, list) = text
        .split_once('=')
        .ok_or_else(|| CliError::validation(format!("sweep {text:?}: expected name=v1,v2,...")))?;
    let parameter = name.trim().to_lowercase();
    if !SWEEPABLE.contains(&parameter.as_str()) {
        return Err(CliError::validation(format!("parameter {parameter} is not sweepable (a, t, gamma, k)")));
    }
    let values = list
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::validation(format!("sweep value {v:?} is not a number"))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(CliError::validation("sweep needs at least one value".into()));
    }
    Ok(Sweep { parameter, values })
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::validation(format!("{name} must be positive, got {v}")))
    }
}

impl Params {
    pub fn with(&self, parameter: &str, value: f64) -> Params {
        let mut p = self.clone();
        match parameter {
            "a" => p.a = value,
            "t" => p.t = Some(value),
            "gamma" => p.gamma = value,
            "k" => p.k = value,
            _ => {}
        }
        p
    }

    pub fn validate(&self, command: Command) -> Result<(), CliError> {
        positive("omega-p", self.omega_p)?;
        positive("tol", self.tol)?;
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(CliError::validation(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if self.model == ModelArg::Plasma && self.gamma != 0.0 {
            return Err(CliError::validation("the plasma model has no damping; use --model drude".into()));
        }
        match command {
            Command::Energy => {
                positive("a", self.a)?;
                if self.t.is_some() {
                    return Err(CliError::validation("energy is the T = 0 result; use free-energy for T > 0".into()));
                }
            }
            Command::Pressure => {
                positive("a", self.a)?;
                if let Some(t) = self.t {
                    positive("t", t)?;
                }
            }
            Command::FreeEnergy | Command::Anomaly => {
                positive("a", self.a)?;
                positive("t", self.t.ok_or_else(|| CliError::validation(format!("{} needs --t", command.name())))?)?;
                if command == Command::Anomaly && self.m_max == 0 {
                    return Err(CliError::validation("m-max must be at least 1".into()));
                }
            }
            Command::Spectrum | Command::EquivalenceCheck => {
                positive("a", self.a)?;
                positive("k", self.k)?;
                if self.model == ModelArg::Drude {
                    return Err(CliError::validation(format!("{} needs the plasma model", command.name())));
                }
            }
            Command::Poles => {
                positive("coupling", self.coupling)?;
                positive("beta", self.beta)?;
            }
            Command::FdtCheck => {
                positive("beta", self.beta)?;
                positive("omega0", self.omega0)?;
                if self.preset == "oscillator" && self.dim < 2 {
                    return Err(CliError::validation("dim must be at least 2".into()));
                }
                if self.preset == "matrix" && self.observable.is_none() {
                    return Err(CliError::validation("--matrix needs --observable".into()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parsing() {
        let m = parse_config_file("# geometry\na = 2.5\nomega_p=1 # inline\n\n").unwrap();
        assert_eq!(m.get("a").unwrap(), "2.5");
        assert_eq!(m.get("omega-p").unwrap(), "1");
        assert!(parse_config_file("a 2").is_err());
    }

    #[test]
    fn sweep_parsing() {
        let s = parse_sweep("a=1, 2,4").unwrap();
        assert_eq!(s.values, vec![1.0, 2.0, 4.0]);
        assert!(parse_sweep("beta=1").is_err());
        assert!(parse_sweep("a=x").is_err());
    }
}
