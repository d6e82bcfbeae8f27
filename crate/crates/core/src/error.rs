use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    SymmetryViolation { asymmetry: f64 },

    #[error("covariance is near singular (smallest eigenvalue {smallest:.3e}, floor {floor:.3e})")]
    NearSingularCovariance { smallest: f64, floor: f64 },

    #[error("matrix is singular: {0}")]
    SingularMatrix(String),

    #[error("matrix is not positive definite (smallest eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("mixture weight alpha1 = {0} must lie in (0.5, 1); alpha1 = 0.5 is the excluded symmetric case")]
    InvalidWeight(f64),

    #[error(
        "asymptotic constants diverge at alpha1 = {0}; supported range is (0.5 + 1e-6, 1 - 1e-6)"
    )]
    Divergence(f64),

    #[error(
        "degenerate skewness: sample looks symmetric (norm {norm:.3e} below floor {floor:.3e})"
    )]
    DegenerateSkewness { norm: f64, floor: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("supervision required: {0}")]
    SupervisionRequired(String),

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag for the error.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SymmetryViolation { .. } => "symmetry-violation",
            Error::NearSingularCovariance { .. } => "near-singular-covariance",
            Error::SingularMatrix(_) => "singular-matrix",
            Error::NotPositiveDefinite(_) => "not-positive-definite",
            Error::Domain(_) => "domain",
            Error::Dimension(_) => "dimension",
            Error::InvalidWeight(_) => "invalid-weight",
            Error::Divergence(_) => "divergence",
            Error::DegenerateSkewness { .. } => "degenerate-skewness",
            Error::InsufficientData(_) => "insufficient-data",
            Error::SupervisionRequired(_) => "supervision-required",
            Error::Config { .. } => "config",
            Error::Parse { .. } => "parse",
            Error::Usage(_) => "usage",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code: 2 for usage and configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_)
            | Error::Config { .. }
            | Error::SupervisionRequired(_)
            | Error::InvalidWeight(_)
            | Error::Divergence(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
