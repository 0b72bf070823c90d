//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised while building or validating problem descriptions.
///
/// These cover everything that can go wrong before a solver runs: invalid
/// parameter domains, malformed methods or schedules, layout mismatches,
/// and parse failures of the on-disk formats. Solver-side outcomes
/// (infeasible, unbounded, numerical breakdown) are *not* errors; they are
/// reported through [`crate::sdp::SolveStatus`].
#[derive(Debug, Error)]
pub enum SpecError {
    #[error("invalid function class: {0}")]
    FunctionClass(String),

    #[error("invalid noise model: {0}")]
    NoiseModel(String),

    #[error("invalid method: {0}")]
    Method(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("unknown noise preset `{0}`")]
    UnknownPreset(String),

    #[error("noise preset `{preset}` is missing parameter `{param}`")]
    MissingParameter { preset: String, param: String },

    #[error("invalid problem specification: {0}")]
    Problem(String),

    #[error("layout error: {0}")]
    Layout(String),

    #[error("sigma symbol requested on a sigma-free layout: {0}")]
    SigmaFree(String),

    #[error("invalid covariance class: {0}")]
    Covariance(String),

    #[error("invalid PSD block row: {0}")]
    PsdReduction(String),

    #[error("malformed SDP problem: {0}")]
    Sdp(String),

    #[error("invalid solver settings: {0}")]
    Settings(String),

    #[error("analytic bound domain violation: {0}")]
    Domain(String),

    #[error("interchange parse error at line {line}: {message}")]
    SdpaParse { line: usize, message: String },

    #[error("interchange export unsupported: {0}")]
    SdpaExport(String),

    #[error("problem file error: {0}")]
    SpecFile(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl SpecError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        SpecError::Io {
            context: context.into(),
            source,
        }
    }
}
