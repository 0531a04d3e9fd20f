use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected {expected}, found {found}")]
    Shape {
        what: String,
        expected: String,
        found: String,
    },

    #[error("{what}: {reason}")]
    InvalidValue { what: String, reason: String },

    #[error("attention value {value} at index {index} is outside [0, 1]")]
    AttentionRange { index: usize, value: f64 },

    #[error("ring count mismatch: attention carries {attention} neighbor rings, neighborhood has {neighborhood}")]
    RingCount { attention: usize, neighborhood: usize },

    #[error("unknown variant `{0}` (expected ring7x7, dilated or deformable)")]
    UnknownVariant(String),

    #[error("dense transform limited to {limit} pixels, grid has {pixels}")]
    OracleSizeLimit { pixels: usize, limit: usize },

    #[error("fractional offset ({dy}, {dx}) at pixel ({row}, {col}) cannot be expressed in a dense transform")]
    FractionalOffset { row: usize, col: usize, dy: f64, dx: f64 },

    #[error("no valid pixels in ground truth")]
    NoValidPixels,

    #[error("{count} of {valid} evaluated pixels have nonpositive prediction; inverse metrics undefined")]
    NonPositivePrediction { count: usize, valid: usize },

    #[error("backward pass requires epsilon > 0 (reference mode is not differentiable at S' = 0)")]
    ReferenceModeBackward,

    #[error("tape holds {available} steps, backward needs {needed}")]
    TapeMissing { available: usize, needed: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(what: impl Into<String>, expected: impl ToString, found: impl ToString) -> Self {
        Error::Shape {
            what: what.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn invalid(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidValue {
            what: what.into(),
            reason: reason.into(),
        }
    }
}
