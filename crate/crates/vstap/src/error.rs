use thiserror::Error;

/// Errors produced by fitting, solving, and generation.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A parameter or value is outside its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The sample is too short for the requested operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A truncation region carries (numerically) zero probability mass.
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    /// An input is degenerate (constant channel, |r| = 1, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A linear system could not be solved.
    #[error("numerically singular: {0}")]
    NumericallySingular(String),

    /// The VAR coefficients describe a non-stationary process.
    #[error("non-stationary model: spectral radius {spectral_radius:.6}")]
    NonStationary { spectral_radius: f64 },

    /// Positive-definiteness repair did not converge.
    #[error(
        "correlation matrix repair failed after {rounds} rounds \
         (min eigenvalue {min_eigenvalue:.3e})"
    )]
    RepairFailed { rounds: usize, min_eigenvalue: f64 },

    /// A target correlation cannot be attained for the given marginals.
    #[error(
        "target correlation {target:.6} infeasible for channels ({i}, {j}) \
         at lag {tau}: feasible range [{lower:.6}, {upper:.6}]"
    )]
    Infeasible {
        i: usize,
        j: usize,
        tau: usize,
        target: f64,
        lower: f64,
        upper: f64,
    },

    /// Rejection sampling accepted too few points for stable estimates.
    #[error("insufficient acceptance: {accepted} samples accepted, {required} required")]
    InsufficientAcceptance { accepted: usize, required: usize },

    /// Reading or writing a file failed.
    #[error("io error: {0}")]
    Io(String),

    /// A serialized model could not be parsed or has an unsupported layout.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Stable machine-readable tag for each variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::InsufficientData(_) => "insufficient_data",
            Error::DegenerateRegion(_) => "degenerate_region",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::NumericallySingular(_) => "numerically_singular",
            Error::NonStationary { .. } => "non_stationary",
            Error::RepairFailed { .. } => "repair_failed",
            Error::Infeasible { .. } => "infeasible",
            Error::InsufficientAcceptance { .. } => "insufficient_acceptance",
            Error::Io(_) => "io",
            Error::Format(_) => "format",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
