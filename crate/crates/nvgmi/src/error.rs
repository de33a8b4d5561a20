//! Error type shared by all simulation and analysis modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument violated a precondition (non-finite, wrong sign, empty...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A pulse sequence failed validation; carries the offending segment index.
    #[error("protocol error at segment {segment}: {reason}")]
    Protocol { segment: usize, reason: String },

    /// Impedance evaluation left the numerically supported regime (|k·a| too large).
    #[error("out of regime: {0}")]
    OutOfRegime(String),

    /// Field evaluation requested too close to a point dipole.
    #[error("singularity: evaluation point within {distance_m} m of dipole {dipole}")]
    Singularity { dipole: usize, distance_m: f64 },

    /// Nonlinear fit did not converge; the best parameters found so far are attached.
    #[error("fit failed to converge after {iterations} iterations (residual rms {residual_rms})")]
    FitFailure {
        iterations: usize,
        residual_rms: f64,
        best: Vec<f64>,
    },

    /// Data does not span enough structure for the requested analysis.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Contrast (m1 - m2)/(m1 + m2) is undefined because both inputs are zero.
    #[error("undefined contrast: both standard deviations are zero")]
    UndefinedContrast,

    /// Coil calibration could not find a linear window meeting the residual bound.
    #[error("calibration failure: {0}")]
    CalibrationFailure(String),

    /// A reconstruction cell has fewer than three linearly independent NV axes.
    #[error("underdetermined cell at index {cell}: {reason}")]
    UnderdeterminedCell { cell: usize, reason: String },

    /// Experiment configuration is invalid; carries the offending field path.
    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code contract: 2 for configuration errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            _ => 1,
        }
    }
}
