use std::path::Path;

use postree_core::generation::GenError;
use postree_core::intent::IntentError;
use postree_core::metrics::MetricError;
use postree_core::realize::RealizeError;
use postree_core::retrieval::RetrievalError;
use postree_core::svg::DialectError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Dialect {
        context: String,
        #[source]
        source: DialectError,
    },
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("record {record_id}: {source}")]
    Intent {
        record_id: String,
        #[source]
        source: IntentError,
    },
    #[error(transparent)]
    Realize(#[from] RealizeError),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Stable machine-readable name used in the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Format(_) => "format",
            Error::Config(_) => "config",
            Error::Usage(_) => "usage",
            Error::Dialect { .. } => "dialect",
            Error::Retrieval(e) => match e {
                RetrievalError::EmptyDataset => "empty_dataset",
                RetrievalError::MissingEmbedding(_) => "missing_embedding",
                RetrievalError::DimMismatch { .. } => "dim_mismatch",
                RetrievalError::DuplicateId(_) => "duplicate_id",
                RetrievalError::KTooLarge { .. } => "k_too_large",
                RetrievalError::StrategyQueryMismatch(_) => "strategy_query_mismatch",
            },
            Error::Generation(e) => match e {
                GenError::TemplateFieldMissing(..) | GenError::TemplateSectionMissing(_) => "template",
                GenError::NoExamples => "no_examples",
                GenError::BackendUnavailable(_) => "backend_unavailable",
                GenError::Timeout => "timeout",
                GenError::AllCandidatesMalformed(_) => "all_candidates_malformed",
                GenError::EmptyAfterSanitation => "empty_after_sanitation",
                GenError::NoCandidates => "no_candidates",
            },
            Error::Metric(_) => "metric",
            Error::Intent { .. } => "intent",
            Error::Realize(e) => match e {
                RealizeError::UnknownId(_) => "unknown_id",
                RealizeError::KindMismatch(_) => "kind_mismatch",
            },
        }
    }
}

/// `{"kind", "message"}`, as printed under `"error"` by the CLI and kept
/// in per-record status lists.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorBody {
    fn from(e: &Error) -> Self {
        Self {
            kind: e.kind().to_owned(),
            message: e.to_string(),
        }
    }
}
