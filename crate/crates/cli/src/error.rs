use lifshitz::casimir::CasimirError;
use lifshitz::cavity::CavityError;
use lifshitz::dispersion::DispersionError;
use lifshitz::fdt::FdtError;
use lifshitz::response::ResponseError;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Validation,
    NonConvergence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: String) -> Self {
        Self { kind: ErrorKind::Validation, message }
    }

    pub fn numerics(message: String) -> Self {
        Self { kind: ErrorKind::NonConvergence, message }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => 2,
            ErrorKind::NonConvergence => 3,
        }
    }

    /// Single-line JSON for standard error.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<DispersionError> for CliError {
    fn from(e: DispersionError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<CavityError> for CliError {
    fn from(e: CavityError) -> Self {
        match e {
            CavityError::InvalidParameter(_) | CavityError::ModelMismatch => Self::validation(e.to_string()),
            _ => Self::numerics(e.to_string()),
        }
    }
}

impl From<CasimirError> for CliError {
    fn from(e: CasimirError) -> Self {
        match e {
            CasimirError::Cavity(c) => c.into(),
            CasimirError::InvalidParameter(_) => Self::validation(e.to_string()),
            _ => Self::numerics(e.to_string()),
        }
    }
}

impl From<FdtError> for CliError {
    fn from(e: FdtError) -> Self {
        match e {
            FdtError::NonHermitian { .. } | FdtError::InvalidParameter(_) | FdtError::UnknownObservable(_) | FdtError::NonHermitianObservable { .. } => {
                Self::validation(e.to_string())
            }
            _ => Self::numerics(e.to_string()),
        }
    }
}

impl From<ResponseError> for CliError {
    fn from(e: ResponseError) -> Self {
        match e {
            ResponseError::OnPole { .. } => Self::numerics(e.to_string()),
            _ => Self::validation(e.to_string()),
        }
    }
}
