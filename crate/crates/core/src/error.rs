use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature did not converge on ({lo}, {hi}): estimated error {error:e} exceeds tolerance {tol:e}")]
    NonConvergedQuadrature { lo: f64, hi: f64, error: f64, tol: f64 },

    #[error("operation requires at least W1infty smoothness, got {0}")]
    InsufficientSmoothness(String),

    #[error("coupling support {support} meets the control region {omega}")]
    SupportOverlap { support: String, omega: String },

    #[error("precondition failed at modes {modes:?}: {reason}")]
    FailedPrecondition { modes: Vec<usize>, reason: String },

    #[error("change of unknown is not positive: min theta = {min:e}")]
    ThetaNotPositive { min: f64 },

    #[error("no subinterval of {omega} where |p| stays above {threshold:e}")]
    NoNonvanishingWindow { omega: String, threshold: f64 },

    #[error("no kappa candidate in [{lo}, {hi}] passed the separation test")]
    ScanExhausted { lo: f64, hi: f64 },

    #[error("mode {k} is resonant with window length {len}")]
    ResonantMode { k: usize, len: f64 },

    #[error("frequency scan up to j = {bound} found no admissible bump for mode {mode}")]
    StepScanExhausted { mode: usize, bound: usize },

    #[error("biorthogonal family ill-conditioned: residual {residual:e} > tol {tol:e} (condition estimate {condition:e})")]
    IllConditioned { residual: f64, tol: f64, condition: f64 },

    #[error("time {t} outside [0, {horizon}]")]
    OutOfDomain { t: f64, horizon: f64 },

    #[error("shape search failed after {attempts} attempts; failing modes {modes:?}")]
    ShapeSearchFailed { attempts: usize, modes: Vec<usize> },

    #[error("I_k and I_(a,k) both vanish at mode {k}; the moment problem is unsolvable there")]
    BothIndicesZero { k: usize },

    #[error("A1 is singular at mode {k}: |det| = {det:e}, |I_(a,k)| = {iak:e}")]
    SingularA1 { k: usize, det: f64, iak: f64 },

    #[error("control series fails the decay test (fitted rate {rate:e}); horizon likely below the minimal time")]
    DivergentSeriesFit { rate: f64 },

    #[error("I_k vanishes at mode {k}")]
    ZeroIk { k: usize },

    #[error("time stepping did not converge: final-norm change {change:e} after {steps} steps")]
    NonConvergedTimeStepping { change: f64, steps: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
