use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("row {row}, column {column}: non-numeric feature value {value:?}")]
    NonNumeric {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("label column {0} not found")]
    LabelColumnMissing(String),

    #[error("dataset has no class labels")]
    Unlabeled,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("spectral embedding failed: {0}")]
    Eigen(String),

    #[error("requested {requested} constraints but only {available} distinct pairs exist")]
    TooManyConstraints { requested: usize, available: usize },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("no clustering has a defined silhouette")]
    NoValidCandidate,

    #[error("fewer than two unconstrained instances remain for evaluation")]
    TooFewEvaluationInstances,

    #[error("query budget exhausted")]
    BudgetExhausted,

    #[error("candidate pool exhausted")]
    PoolExhausted,

    #[error("a query is already pending")]
    QueryPending,

    #[error("answer does not match the pending query")]
    NotPending,

    #[error("repetition {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<Error>,
    },
}
