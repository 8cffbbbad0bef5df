use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidInput { field: String, reason: String },

    #[error(
        "patch synthesis infeasible: fringe extension dL = {delta_l:.6e} m leaves length {length:.6e} m"
    )]
    SynthesisInfeasible { delta_l: f64, length: f64 },

    #[error("resonant singularity: termination denominator vanishes")]
    ResonantSingularity,

    #[error("singular propagation at element {element}")]
    SingularPropagation { element: usize },

    #[error("at {freq_ghz:.6} GHz: {source}")]
    AtFrequency {
        freq_ghz: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("optimizer did not converge: best resonance offset {offset_ghz:.4} GHz")]
    NotConverged { offset_ghz: f64 },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at_frequency(self, freq: f64) -> Self {
        Error::AtFrequency {
            freq_ghz: freq * 1e-9,
            source: Box::new(self),
        }
    }
}

/// Checks that `value` is finite and strictly positive.
pub(crate) fn positive(field: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(
            field,
            format!("must be positive, got {value}"),
        ))
    }
}
