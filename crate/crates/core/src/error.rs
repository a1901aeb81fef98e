use std::fmt;

use thiserror::Error;

use crate::config::ConfigViolation;

/// Failures talking to a model endpoint.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("request to {url} timed out after {timeout_ms} ms")]
    Timeout { url: String, timeout_ms: u64 },
    #[error("could not connect to {url}: {detail}")]
    Connect { url: String, detail: String },
    #[error("endpoint {url} returned HTTP {status}")]
    Status { url: String, status: u16 },
    #[error("malformed response from {url}: {detail}")]
    Malformed { url: String, detail: String },
    #[error("endpoint {url} is unhealthy; request not routed")]
    Unhealthy { url: String },
    #[error("no healthy endpoint in the pool")]
    NoHealthyEndpoint,
}

impl TransportError {
    pub fn url(&self) -> &str {
        match self {
            TransportError::Timeout { url, .. }
            | TransportError::Connect { url, .. }
            | TransportError::Status { url, .. }
            | TransportError::Malformed { url, .. }
            | TransportError::Unhealthy { url } => url,
            TransportError::NoHealthyEndpoint => "",
        }
    }
}

/// A completion that lacks one of the section markers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("draft completion is missing the {marker:?} marker")]
pub struct DraftParseError {
    pub marker: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Embed,
    Cluster,
    Sample,
    Draft,
    Verify,
    Select,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Embed => "embed",
            Stage::Cluster => "cluster",
            Stage::Sample => "sample",
            Stage::Draft => "draft",
            Stage::Verify => "verify",
            Stage::Select => "select",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", join(.0))]
    Config(Vec<ConfigViolation>),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("data error: {0}")]
    Data(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error(transparent)]
    Parse(#[from] DraftParseError),
    #[error("no valid drafts")]
    NoValidDrafts,
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error("dataset line {line}: {message}")]
    Dataset { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn in_stage(self, stage: Stage) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, skipping stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

fn join(v: &[ConfigViolation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
