use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("feature vector does not conform to schema: {0}")]
    Nonconforming(String),

    #[error("missing value for feature `{0}`")]
    MissingFeature(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset row {row}, column `{column}`: {message}")]
    Row {
        row: usize,
        column: String,
        message: String,
    },

    #[error("missing column `{0}` in dataset header")]
    MissingColumn(String),

    #[error("feature `{0}` is categorical and has no ordering")]
    Categorical(String),

    #[error("grid size must be at least 2, got {0}")]
    GridSize(usize),

    #[error("no feature is mutable; recourse is impossible")]
    NoRecourse,

    #[error("search grid is empty")]
    EmptyGrid,

    #[error("action grid is empty")]
    EmptyActionGrid,

    #[error("invalid action grid: {0}")]
    ActionGrid(String),

    #[error("invalid action catalog: {0}")]
    Catalog(String),

    #[error("invalid binning: {0}")]
    Binning(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("state space exceeds cap of {cap} states ({reachable} reachable so far)")]
    StateCap { cap: usize, reachable: usize },

    #[error("no action is enabled in the initial state")]
    NoEnabledActions,

    #[error("policy is undefined at reachable state {0}")]
    PolicyUndefined(usize),

    #[error("unknown solver `{0}`")]
    UnknownSolver(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("goal is unreachable: {0}")]
    Unreachable(String),

    #[error("inconsistent components: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from malformed or inconsistent caller input.
    pub fn is_invalid_input(&self) -> bool {
        !matches!(
            self,
            Error::Io(_)
                | Error::NoRecourse
                | Error::StateCap { .. }
                | Error::NoEnabledActions
                | Error::Unreachable(_)
        )
    }
}
