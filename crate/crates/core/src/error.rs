use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("eigenprojectors are ill-conditioned at |xi| = {kappa} (eigenvalue gap {gap:.3e})")]
    DegenerateSpectrum { kappa: f64, gap: f64 },

    #[error("|xi| = {kappa} lies outside the low-frequency band |xi| <= {cutoff}")]
    OutOfBand { kappa: f64, cutoff: f64 },

    #[error("unsupported symbol structure: {0}")]
    UnsupportedStructure(String),

    #[error("point lies on the singular set ({which} = {norm:.3e} below tolerance {tol:.3e})")]
    SingularPoint { which: &'static str, norm: f64, tol: f64 },

    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),

    #[error("separable strategy requested but the symbol has no separable factorization")]
    StrategyUnavailable,

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("direct pseudoproduct would need {terms} symbol evaluations (cap {cap})")]
    CostCap { terms: u128, cap: u128 },

    #[error("exponent mismatch: {0}")]
    ExponentMismatch(String),

    #[error("step rejected at t = {t}: H^N norm {norm:.3e} exceeds guard {guard:.3e}")]
    StepRejected { t: f64, norm: f64, guard: f64 },

    #[error("missing series `{0}`")]
    MissingSeries(String),

    #[error("series `{0}` has non-positive values inside the fit window")]
    NonPositiveValues(String),

    #[error("need at least {need} samples in the fit window, found {found}")]
    InsufficientSamples { need: usize, found: usize },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
