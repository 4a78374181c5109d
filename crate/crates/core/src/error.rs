use thiserror::Error;

/// Failure modes surfaced by the library.
///
/// Validation failures (bad shapes, bad parameters, malformed configs) are
/// separated from numeric degeneracies (zero-variance rows, rank-zero
/// covariances, constant null samples) so callers can distinguish "fix your
/// input" from "this data cannot support the computation".
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("metric: {0}")]
    Metric(String),

    #[error("degenerate filter: {0}")]
    DegenerateFilter(String),

    #[error("dimension: {0}")]
    Dimension(String),

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("modularity is undefined on a graph with no edges")]
    EdgelessGraph,

    #[error("degenerate null: {0}")]
    DegenerateNull(String),

    #[error("precision: {0}")]
    Precision(String),

    /// A null replicate failed; the index identifies which one. Replicate
    /// errors always abort the whole run rather than being skipped.
    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_replicate(self, index: usize) -> Error {
        Error::Replicate {
            index,
            source: Box::new(self),
        }
    }
}
