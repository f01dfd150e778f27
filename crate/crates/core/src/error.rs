use thiserror::Error;

/// Every failure the simulator reports. Physics errors carry the name the
/// command-line front end prints on its diagnostic line.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate doublon momentum K = {momentum}: relative hopping vanishes")]
    DegenerateMomentum { momentum: f64 },

    #[error("target energy {target} lies outside the band [{lower}, {upper}]")]
    OffResonant { target: f64, lower: f64, upper: f64 },

    #[error("truncation not converged: eigenvalue shift {shift:e} exceeds {tolerance:e}")]
    TruncationNotConverged { shift: f64, tolerance: f64 },

    #[error("wave packet too wide: clearance {available} sites, {required} required")]
    PacketTooWide { required: f64, available: f64 },

    #[error("basis too large: {estimated} states exceed the budget of {budget}")]
    BasisTooLarge { estimated: usize, budget: usize },

    #[error("outgoing packets straddle the emitter region (weight {weight:e} inside)")]
    RegionOverlap { weight: f64 },

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("step rejected: error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    StepRejected { estimate: f64, tolerance: f64 },

    #[error("singular scattering system (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("resonance mismatch: {0}")]
    ResonanceMismatch(String),

    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        message: String,
        line: usize,
        column: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::DegenerateMomentum { .. } => "DegenerateMomentum",
            Error::OffResonant { .. } => "OffResonant",
            Error::TruncationNotConverged { .. } => "TruncationNotConverged",
            Error::PacketTooWide { .. } => "PacketTooWide",
            Error::BasisTooLarge { .. } => "BasisTooLarge",
            Error::RegionOverlap { .. } => "RegionOverlap",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::StepRejected { .. } => "StepRejected",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::ResonanceMismatch(_) => "ResonanceMismatch",
            Error::Config { .. } => "ConfigError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }

    /// True for errors that come from the configuration rather than from
    /// the physics (the CLI maps these to a different exit code).
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::InvalidParameter(_))
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config {
            message: message.into(),
            line: 0,
            column: 0,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
