use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown item `{0}`")]
    UnknownItem(String),

    #[error("unknown participant `{0}`")]
    UnknownParticipant(String),

    #[error("item `{item}` is missing ratings from experts: {}", missing.join(", "))]
    IncompleteRatings { item: String, missing: Vec<String> },

    #[error("invalid item `{item}`: {reason}")]
    InvalidItem { item: String, reason: String },

    #[error("duplicate item id `{0}`")]
    DuplicateItem(String),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("duplicate response row for participant `{participant}`, item `{item}` (row {row})")]
    DuplicateResponse {
        participant: String,
        item: String,
        row: usize,
    },

    #[error("missing response for participant `{participant}`, item `{item}`")]
    MissingResponse { participant: String, item: String },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("factor iteration did not converge after {0} iterations")]
    NonConvergent(usize),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("item sets differ: {0}")]
    ItemSetMismatch(String),

    #[error("io error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnknownItem(_) => "unknown_item",
            Error::UnknownParticipant(_) => "unknown_participant",
            Error::IncompleteRatings { .. } => "incomplete_ratings",
            Error::InvalidItem { .. } => "invalid_item",
            Error::DuplicateItem(_) => "duplicate_item",
            Error::Parse { .. } => "parse",
            Error::DuplicateResponse { .. } => "duplicate_response",
            Error::MissingResponse { .. } => "missing_response",
            Error::Empty(_) => "empty",
            Error::DegenerateVariance(_) => "degenerate_variance",
            Error::NonConvergent(_) => "non_convergent",
            Error::NonFinite(_) => "non_finite",
            Error::InvalidConfig(_) => "invalid_config",
            Error::ItemSetMismatch(_) => "item_set_mismatch",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
