use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("associated Laguerre polynomial undefined for degree {n} and parameter {alpha}")]
    LaguerreDomain { n: usize, alpha: i64 },

    #[error("degree {n} exceeds the configured maximum {max}")]
    DegreeTooLarge { n: usize, max: usize },

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error(
        "amplitude ratio is singular at eta = {eta}: the diagonal factor of level {level} vanishes \
         (nearby singular eta values: {nearby:?})"
    )]
    SingularRatio {
        eta: f64,
        level: usize,
        nearby: Vec<f64>,
    },

    #[error("no dark condition for level {level} at eta = {eta}{}", nearest.map(|e| format!(" (nearest valid eta: {e:.6})")).unwrap_or_default())]
    NoDarkCondition {
        level: String,
        eta: f64,
        nearest: Option<f64>,
    },

    #[error("outside the strong-confinement regime: gamma/omega = {0} must be below 1")]
    WeakConfinement(f64),

    #[error("detuning index s = {0} is not an integer; resonant rates require integer s")]
    NonIntegerDetuning(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("level {0} lies outside the truncated basis")]
    LevelOutOfRange(String),

    #[error("dense storage for {states} states needs {needed} bytes, above the budget of {budget} bytes")]
    Resource {
        states: usize,
        needed: usize,
        budget: usize,
    },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("unknown dipole pattern `{0}`")]
    UnknownPattern(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
