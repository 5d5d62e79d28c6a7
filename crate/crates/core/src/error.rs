use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular system rejected: {0}")]
    InvalidSystem(String),

    #[error("integration exceeded {0} steps")]
    TooManySteps(usize),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("degenerate seed: {0}")]
    DegenerateSeed(String),

    #[error("metric leaves the complete family: {0}")]
    IncompleteMetric(String),

    #[error("asymptotic fit unstable: residual {residual:.3e} exceeds {limit:.3e}")]
    FitUnstable { residual: f64, limit: f64 },

    #[error("the two forms of H disagree at t = {t}: {ab_form} vs {metric_form}")]
    FormMismatch {
        t: f64,
        ab_form: f64,
        metric_form: f64,
    },

    #[error("verdict undecided at t_max = {t_max}: G_inf fit error {fit_err:.3e}")]
    Undecided { t_max: f64, fit_err: f64 },

    #[error("invalid end condition: {0}")]
    InvalidEnd(String),

    #[error("bracket [{lo}, {hi}] does not straddle the transition")]
    BadBracket { lo: f64, hi: f64 },

    #[error("comparison hypothesis not met: {0}")]
    HypothesisNotMet(String),

    #[error("asymptotic law violated: {0}")]
    ViolatedAsymptotic(String),

    #[error("outside the domain: {0}")]
    Domain(String),

    #[error("parameter constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
