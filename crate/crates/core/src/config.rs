//! Pipeline hyperparameters and their validation.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub const DEFAULT_REFLECTION_STATEMENT: &str =
    "Do you think the explanation supports the answers? (Yes or No)";

/// Alternative reflection statements used when probing the verifier's
/// sensitivity to wording. The first entry is the default.
pub const REFLECTION_STATEMENTS: [&str; 4] = [
    DEFAULT_REFLECTION_STATEMENT,
    "Does the rationale support the answer? (Yes or No)",
    "What do you think about the rationale? A good one? (Yes or No)",
    "Is the rationale good enough to support the answer? (Yes or No)",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationContextMode {
    RationaleOnly,
    DocumentsOnly,
    RationaleAndDocuments,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreTerm {
    Draft,
    SelfConsistency,
    SelfReflection,
}

impl ScoreTerm {
    pub const ALL: [ScoreTerm; 3] = [
        ScoreTerm::Draft,
        ScoreTerm::SelfConsistency,
        ScoreTerm::SelfReflection,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    MultiPerspective,
    RandomNoCluster,
    SameCluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    Argmax,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub num_drafts: usize,
    pub num_clusters: usize,
    pub top_n: usize,
    pub reflection_statement: String,
    pub verification_context_mode: VerificationContextMode,
    pub score_terms: BTreeSet<ScoreTerm>,
    pub sampling_mode: SamplingMode,
    pub selection_mode: SelectionMode,
    pub length_normalize_logprobs: bool,
    pub rng_seed: u64,
    pub drafter_endpoints: Vec<String>,
    pub verifier_endpoint: String,
    pub embedding_endpoint: String,
    pub request_timeout_ms: u64,
    /// Completion token cap for drafter requests.
    pub max_draft_tokens: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            num_drafts: 5,
            num_clusters: 2,
            top_n: 10,
            reflection_statement: DEFAULT_REFLECTION_STATEMENT.to_string(),
            verification_context_mode: VerificationContextMode::RationaleOnly,
            score_terms: ScoreTerm::ALL.into_iter().collect(),
            sampling_mode: SamplingMode::MultiPerspective,
            selection_mode: SelectionMode::Argmax,
            length_normalize_logprobs: false,
            rng_seed: 0,
            drafter_endpoints: vec!["http://127.0.0.1:8100/generate".to_string()],
            verifier_endpoint: "http://127.0.0.1:8100/generate".to_string(),
            embedding_endpoint: "http://127.0.0.1:8100/embed".to_string(),
            request_timeout_ms: 30_000,
            max_draft_tokens: 512,
        }
    }
}

impl PipelineConfig {
    /// Profile for multi-hop questions: more documents, drafts and clusters.
    pub fn multi_hop() -> Self {
        Self {
            num_drafts: 10,
            num_clusters: 6,
            top_n: 15,
            ..Self::default()
        }
    }

    pub fn with_endpoints(
        mut self,
        drafters: Vec<String>,
        verifier: impl Into<String>,
        embedder: impl Into<String>,
    ) -> Self {
        self.drafter_endpoints = drafters;
        self.verifier_endpoint = verifier.into();
        self.embedding_endpoint = embedder.into();
        self
    }

    pub fn uses(&self, term: ScoreTerm) -> bool {
        self.score_terms.contains(&term)
    }
}

/// One broken invariant of a [`PipelineConfig`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigViolation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Reports every violated invariant; an empty list means the config is valid.
pub fn validate_config(cfg: &PipelineConfig) -> Vec<ConfigViolation> {
    let mut out = Vec::new();
    let mut push = |field: &str, message: String| {
        out.push(ConfigViolation {
            field: field.to_string(),
            message,
        })
    };

    if cfg.num_drafts < 1 {
        push("num_drafts", "num_drafts must be ≥ 1".into());
    }
    if cfg.num_clusters < 1 {
        push("num_clusters", "num_clusters must be ≥ 1".into());
    }
    if cfg.top_n < 1 {
        push("top_n", "top_n must be ≥ 1".into());
    }
    if cfg.num_clusters > cfg.top_n {
        push(
            "num_clusters",
            format!(
                "k ≤ n violated: num_clusters={} exceeds top_n={}",
                cfg.num_clusters, cfg.top_n
            ),
        );
    }
    if cfg.reflection_statement.trim().is_empty() {
        push(
            "reflection_statement",
            "reflection statement must be non-empty".into(),
        );
    }
    if cfg.request_timeout_ms == 0 {
        push("request_timeout_ms", "request_timeout_ms must be ≥ 1".into());
    }
    if cfg.max_draft_tokens == 0 {
        push("max_draft_tokens", "max_draft_tokens must be ≥ 1".into());
    }
    if cfg.drafter_endpoints.is_empty() {
        push(
            "drafter_endpoints",
            "at least one drafter endpoint is required".into(),
        );
    }
    for (i, u) in cfg.drafter_endpoints.iter().enumerate() {
        if let Err(e) = check_url(u) {
            push(&format!("drafter_endpoints[{i}]"), e);
        }
    }
    if let Err(e) = check_url(&cfg.verifier_endpoint) {
        push("verifier_endpoint", e);
    }
    if let Err(e) = check_url(&cfg.embedding_endpoint) {
        push("embedding_endpoint", e);
    }
    out
}

fn check_url(raw: &str) -> Result<(), String> {
    let parsed = url::Url::parse(raw).map_err(|e| format!("invalid url {raw:?}: {e}"))?;
    match parsed.scheme() {
        "http" | "https" => Ok(()),
        other => Err(format!("unsupported url scheme {other:?} in {raw:?}")),
    }
}
