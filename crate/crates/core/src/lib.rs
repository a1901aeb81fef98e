//! Speculative retrieval-augmented generation.
//!
//! Retrieved documents are embedded and clustered, one document is drawn per
//! cluster to form diverse subsets, a pool of small drafter endpoints writes
//! one answer-plus-rationale draft per subset in parallel, and a generalist
//! verifier scores every draft from the logprobs of a single echo pass. The
//! highest-scoring draft is the answer.
//!
//! [`backend::MockServer`] serves a deterministic stand-in for every model
//! endpoint so the whole pipeline can run without model weights.

pub mod backend;
pub mod cli;
pub mod config;
pub mod drafting;
pub mod error;
pub mod harness;
pub mod model;
pub mod rng;
pub mod sampling;
pub mod verification;

pub use config::{
    validate_config, ConfigViolation, PipelineConfig, SamplingMode, ScoreTerm, SelectionMode,
    VerificationContextMode,
};
pub use error::{Error, Result, Stage, TransportError};
pub use model::{Choice, Document, Query, Question, StageTimings, TaskKind};
