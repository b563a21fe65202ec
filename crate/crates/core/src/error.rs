use thiserror::Error;

/// Broad classes used to map failures onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("Bloch vector norm {norm} is not 1")]
    NormViolation { norm: f64 },

    #[error("rotation axis norm {norm} is not 1")]
    NonUnitAxis { norm: f64 },

    #[error("density matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("density matrix trace is {0}, expected 1")]
    InvalidTrace(f64),

    #[error("density matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("invalid configuration `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("envelope planning failed: {0}")]
    Planning(String),

    #[error("photocurrent {current:e} A outside plausibility band [{lo:e}, {hi:e}] A")]
    Plausibility { current: f64, lo: f64, hi: f64 },

    #[error("trace has {0} samples, at least 8 are required")]
    TooFewSamples(usize),

    #[error("trace is flat; no oscillation to fit")]
    FlatTrace,

    #[error("trace spans {periods:.3} nominal periods, at least one is required")]
    InsufficientSpan { periods: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("both Rabi axes are degenerate; state cannot be reconstructed")]
    ReconstructionImpossible,

    #[error("trace mismatch: {0}")]
    TraceMismatch(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("unknown {family} strategy `{name}` (registered: {known})")]
    UnknownStrategy {
        family: &'static str,
        name: String,
        known: String,
    },

    #[error("malformed trace file at line {line}, column {column}: {message}")]
    TraceFormat { line: u64, column: String, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self.root() {
            Error::InvalidState(_)
            | Error::NormViolation { .. }
            | Error::NonUnitAxis { .. }
            | Error::NotHermitian(_)
            | Error::InvalidTrace(_)
            | Error::NotPsd(_)
            | Error::Config { .. }
            | Error::Planning(_)
            | Error::Plausibility { .. }
            | Error::UnknownStrategy { .. }
            | Error::TraceMismatch(_)
            | Error::TraceFormat { .. } => ErrorKind::Validation,
            Error::TooFewSamples(_)
            | Error::FlatTrace
            | Error::InsufficientSpan { .. }
            | Error::DegenerateFit(_)
            | Error::ReconstructionImpossible
            | Error::Calibration(_) => ErrorKind::Numerical,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => ErrorKind::Io,
            Error::Stage { .. } => unreachable!("root() strips stage wrappers"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
