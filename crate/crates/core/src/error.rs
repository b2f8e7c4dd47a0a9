use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("matrix contains a non-finite entry")]
    NonFinite,

    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid frequency band [{w1}, {w2}]: need w1 < w2")]
    InvalidBand { w1: f64, w2: f64 },

    #[error("jwI - A is singular at w = {omega}")]
    SingularFrequency { omega: f64 },

    #[error("every sampled frequency in the band is singular")]
    AllFrequenciesSingular,

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },

    #[error("step too large: dt * |A| = {product:.3e} exceeds {limit}")]
    StepTooLarge { product: f64, limit: f64 },

    #[error("horizon exhausted after {steps} steps without a falsifying trajectory")]
    HorizonExhausted { steps: usize },

    #[error("A + s I is singular at shift s = {shift}")]
    SingularShift { shift: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("instance generation failed after {retries} retries")]
    GenerationFailed { retries: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
