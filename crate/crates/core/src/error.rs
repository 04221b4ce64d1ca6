use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: String,
        actual: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("environment step {step} failed: {source}")]
    EnvStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: u64 },

    #[error("fixture too large: {count} trajectories exceeds the enumeration limit of {limit}")]
    FixtureTooLarge { count: u128, limit: u128 },

    #[error("unsupported schema version {found} (expected {expected})")]
    Schema { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn dimension(what: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            what,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
