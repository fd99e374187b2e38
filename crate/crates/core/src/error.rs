use std::path::PathBuf;

/// Everything that can go wrong while evaluating, solving or simulating.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}` = {value}: {reason}")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("population size `n` is required for finite-population rates")]
    MissingPopulation,

    #[error("degenerate socialization profile: {0}")]
    DegenerateProfile(&'static str),

    #[error("unsupported variant: {0}")]
    UnsupportedVariant(&'static str),

    #[error("{what} is defined only for {domain}, got {value}")]
    Domain {
        what: &'static str,
        domain: &'static str,
        value: f64,
    },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error(
        "low-type first-order condition mismatch at s_h={s_high}, s_l={s_low}: \
         printed {printed} vs numerical {numerical} (relative error {relative})"
    )]
    TranscriptionMismatch {
        s_high: f64,
        s_low: f64,
        printed: f64,
        numerical: f64,
        relative: f64,
    },

    #[error("equilibrium vanishes inside the difference stencil at {axis} = {value}")]
    StencilCrossing { axis: &'static str, value: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
