use thiserror::Error;

/// Errors raised by the gate-synthesis and propagation kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input object violates one of its structural invariants.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A scalar parameter is out of its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The step-doubling check did not reach the requested tolerance.
    #[error(
        "integrator did not converge: residual {residual:.3e} at {samples_per_period} samples per period"
    )]
    NonConvergence {
        residual: f64,
        samples_per_period: usize,
    },

    #[error("model {model} does not support {what}")]
    UnsupportedModel { model: &'static str, what: String },

    /// Scene, program and plan do not fit together.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// The effective two-photon Rabi denominator vanishes.
    #[error("effective Rabi rate is singular; critical addressing detuning delta_c = {critical_delta_c:.6} rad/us")]
    Resonance { critical_delta_c: f64 },

    #[error("sites {first} and {second} are not distinguishable: |dOmega| = {gap:.6} < {threshold:.6} rad/us")]
    Distinguishability {
        first: String,
        second: String,
        gap: f64,
        threshold: f64,
    },

    /// Modulation quantization cannot be met for the requested tones.
    #[error("quantization infeasible: {reason}{}", suggested_eps_m.map(|e| format!(" (suggested eps_m = {e:.9} rad/us)")).unwrap_or_default())]
    Constraint {
        reason: String,
        suggested_eps_m: Option<f64>,
    },

    #[error("frequency extraction failed: {0}")]
    Analysis(String),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::Analysis(_))
    }

    /// Short machine-readable tag, used for flagged sweep rows.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Parameter(_) => "parameter",
            Error::NonConvergence { .. } => "non_convergence",
            Error::UnsupportedModel { .. } => "unsupported_model",
            Error::Configuration(_) => "configuration",
            Error::Resonance { .. } => "resonance",
            Error::Distinguishability { .. } => "distinguishability",
            Error::Constraint { .. } => "constraint",
            Error::Analysis(_) => "analysis",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
