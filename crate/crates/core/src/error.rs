use thiserror::Error;

pub type Result<T> = std::result::Result<T, SsrError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SsrError {
    #[error("no-arbitrage violation: price {price} outside ({lower}, {upper})")]
    NoArbitrageViolation { price: f64, lower: f64, upper: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid correlation: {0}")]
    InvalidCorrelation(String),

    #[error("unsupported kernel mix: {0}")]
    UnsupportedKernelMix(String),

    #[error("curve evaluated at t = {t} outside [{lo}, {hi}]")]
    Extrapolation { t: f64, lo: f64, hi: f64 },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("hypothesis not satisfied: {0}")]
    HypothesisNotSatisfied(String),

    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(String),

    #[error("undefined SSR: {0}")]
    UndefinedSsr(String),

    #[error("estimator failure: {0}")]
    EstimatorFailure(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl SsrError {
    /// True for errors caused by the user's input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            SsrError::Parse(_)
                | SsrError::Validation(_)
                | SsrError::InvalidCorrelation(_)
                | SsrError::UnsupportedKernelMix(_)
                | SsrError::InvalidSchedule(_)
                | SsrError::Io(_)
        )
    }
}

impl From<std::io::Error> for SsrError {
    fn from(err: std::io::Error) -> Self {
        SsrError::Io(err.to_string())
    }
}
