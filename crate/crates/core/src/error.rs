use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("episode finished: step {t} requested with horizon {horizon}")]
    EpisodeFinished { t: usize, horizon: usize },

    #[error("action field `{field}` = {value} outside [{lo}, {hi}]")]
    ActionOutOfRange {
        field: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("action field `{0}` is not finite")]
    NonFiniteAction(&'static str),

    #[error("invalid customer demand {0}")]
    InvalidDemand(f64),

    #[error("echelon index {0} is not 1 (retailer) or 2 (factory)")]
    InvalidEchelon(usize),

    #[error("scripted demand exhausted after {0} samples")]
    ScriptExhausted(usize),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("loss must be a 1x1 tensor, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },

    #[error("length mismatch in {context}: {left} vs {right}")]
    LengthMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("variance ratio undefined: demand series has zero variance")]
    UndefinedRatio,

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("non-finite loss in {0}")]
    NonFiniteLoss(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("config serialize error: {0}")]
    TomlSer(#[from] toml::ser::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
