use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("invalid shape {0:?}: every dimension must be positive")]
    InvalidShape(Vec<usize>),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("schedule is off the DDIM manifold at t={t}: (1-abar)^2 + bbar^2 - 1 = {deviation:e}")]
    OffManifold { t: usize, deviation: f64 },

    #[error("time index {t} outside {lo}..={hi}")]
    TimeOutOfRange { t: usize, lo: usize, hi: usize },

    #[error("singular {conversion} conversion at t={t} ({detail}); {remedy}")]
    SingularConversion {
        conversion: &'static str,
        t: usize,
        detail: String,
        remedy: &'static str,
    },

    #[error("posterior variance {sigma_sq:e} exceeds bbar_prev^2 = {beta_bar_prev_sq:e} at t={t}")]
    VarianceBudget { t: usize, sigma_sq: f64, beta_bar_prev_sq: f64 },

    #[error("invalid sampling plan: {0}")]
    Plan(String),

    #[error("predictor: {0}")]
    Predictor(String),

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
