use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bar code has no bars")]
    EmptyBarCode,
    #[error("invalid bar code: {0}")]
    InvalidBarCode(String),
    #[error("X-dimension {omega} cannot accommodate {max_bars} bar(s) in [0,1]")]
    InfeasibleXDimension { omega: f64, max_bars: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid too small: {0}")]
    GridTooSmall(String),
    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),
    #[error("closed form used outside its case: {0}")]
    CaseOrderingViolated(String),
    #[error("incompatible signals: {0}")]
    IncompatibleSignals(String),
    #[error("parameters outside the lemma's scope: {0}")]
    OutOfLemmaScope(String),
    #[error("search space has {needed} candidates, budget is {cap}")]
    SearchBudgetExceeded { needed: u128, cap: u128 },
    #[error("gradient flow diverged at step {step} (max |u| = {max_abs})")]
    Diverged { step: usize, max_abs: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// I/O and format problems, as opposed to domain errors.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Parse(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
