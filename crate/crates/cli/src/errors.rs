//! CLI error envelope with distinct exit codes and a machine-readable JSON
//! rendering on stderr.

use serde::Serialize;
use svarma::SvarmaError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Data,
    Validation,
    Estimation,
    Internal,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Validation => 4,
            ErrorKind::Estimation => 5,
            ErrorKind::Internal => 6,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: String) -> Self {
        Self { kind: ErrorKind::Config, message }
    }
    pub fn data(message: String) -> Self {
        Self { kind: ErrorKind::Data, message }
    }
    pub fn validation(message: String) -> Self {
        Self { kind: ErrorKind::Validation, message }
    }
    pub fn estimation(message: String) -> Self {
        Self { kind: ErrorKind::Estimation, message }
    }
    pub fn internal(message: String) -> Self {
        Self { kind: ErrorKind::Internal, message }
    }

    /// {"error": {"kind": "...", "code": k, "message": "..."}}
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: ErrorKind,
            code: u8,
            message: &'a str,
        }
        #[derive(Serialize)]
        struct Envelope<'a> {
            error: Body<'a>,
        }
        serde_json::to_string(&Envelope {
            error: Body { kind: self.kind, code: self.kind.exit_code(), message: &self.message },
        })
        .unwrap_or_else(|_| format!("{{\"error\":{{\"code\":6,\"message\":\"{}\"}}}}", self.message))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<SvarmaError> for CliError {
    fn from(e: SvarmaError) -> Self {
        let kind = match &e {
            SvarmaError::InvalidTheta(_)
            | SvarmaError::NonUnitDiagonal { .. }
            | SvarmaError::UnstablePolynomial
            | SvarmaError::NonInvertiblePolynomial
            | SvarmaError::SingularB
            | SvarmaError::NotNormalizable { .. }
            | SvarmaError::ColumnOrderTie
            | SvarmaError::NotFactorizable { .. }
            | SvarmaError::SingularPolynomial => ErrorKind::Validation,
            SvarmaError::RankDeficient
            | SvarmaError::NearSingularInformation { .. }
            | SvarmaError::BootstrapFailed { .. }
            | SvarmaError::DegenerateFevd { .. } => ErrorKind::Estimation,
            SvarmaError::Domain(_) => ErrorKind::Config,
        };
        Self { kind, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self { kind: ErrorKind::Data, message: e.to_string() }
    }
}
