use thiserror::Error;

/// Errors surfaced by the estimation pipeline.
#[derive(Debug, Error)]
pub enum SvarmaError {
    #[error("determinant polynomial is degenerate (non-finite or identically zero)")]
    SingularPolynomial,

    #[error("matrix polynomial has determinantal roots inside the closed unit disk")]
    NonInvertiblePolynomial,

    #[error("autoregressive polynomial is not stable")]
    UnstablePolynomial,

    #[error("determinantal root on the unit circle (|z| = {modulus}); no invertible factor exists")]
    NotFactorizable { modulus: f64 },

    #[error("matrix B is singular")]
    SingularB,

    #[error("matrix must have unit diagonal (entry ({row},{row}) = {value})")]
    NonUnitDiagonal { row: usize, value: f64 },

    #[error("normalization scheme {scheme} is not defined at this point: {reason}")]
    NotNormalizable { scheme: char, reason: String },

    #[error("exact tie in lexicographic column ordering")]
    ColumnOrderTie,

    #[error("invalid parameter point: {0}")]
    InvalidTheta(String),

    #[error("rank-deficient regressor matrix in initial estimation")]
    RankDeficient,

    #[error("information matrix is near singular (condition number {cond:.3e})")]
    NearSingularInformation { cond: f64 },

    #[error("degenerate forecast-error variance (zero total variance in row {row})")]
    DegenerateFevd { row: usize },

    #[error("bootstrap failed: {dropped} of {total} replicates did not converge")]
    BootstrapFailed { dropped: usize, total: usize },

    #[error("{0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, SvarmaError>;
