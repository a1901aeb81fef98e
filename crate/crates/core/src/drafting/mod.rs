//! Parallel drafting over document subsets.

mod prompt;
mod score;

use futures::future::join_all;
use serde::{Deserialize, Serialize};
use tracing::warn;

pub use prompt::{
    build_baseline_prompt, build_draft_prompt, parse_draft, resolve_subset, ParsedDraft, DRAFT_HEADER,
    RATIONALE_MARKER, RESPONSE_MARKER,
};
pub(crate) use prompt::push_evidence;
pub use score::{logsumexp, sequence_logprob, tokens_in_span, ByteSpan, TokenLogprob};

use crate::backend::wire::GenerateRequest;
use crate::backend::{EndpointPool, LmClient};
use crate::error::{Error, Result};
use crate::model::{Document, Question};
use crate::sampling::DocumentSubset;

/// A parsed drafter completion with its generation-time score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftCandidate {
    pub subset_index: usize,
    pub member_doc_ids: Vec<String>,
    pub raw_completion: String,
    pub rationale: String,
    pub answer: String,
    pub rationale_span: ByteSpan,
    pub answer_span: ByteSpan,
    pub completion_tokens: Vec<TokenLogprob>,
    pub rho_draft_log: f64,
}

impl DraftCandidate {
    /// Parses a completion and scores it.
    pub fn from_completion(
        subset: &DocumentSubset,
        raw_completion: String,
        completion_tokens: Vec<TokenLogprob>,
        normalize: bool,
    ) -> Result<Self> {
        let parsed = parse_draft(&raw_completion)?;
        let mut candidate = Self {
            subset_index: subset.subset_index,
            member_doc_ids: subset.member_doc_ids.clone(),
            raw_completion,
            rationale: parsed.rationale,
            answer: parsed.answer,
            rationale_span: parsed.rationale_span,
            answer_span: parsed.answer_span,
            completion_tokens,
            rho_draft_log: 0.0,
        };
        candidate.rho_draft_log = compute_rho_draft(&candidate, normalize);
        Ok(candidate)
    }
}

/// Drafter confidence in log space: `ln(P(rationale) + P(answer | rationale))`.
/// The answer tokens follow the rationale tokens in the same completion, so
/// their logprobs already condition on it.
pub fn compute_rho_draft(candidate: &DraftCandidate, normalize: bool) -> f64 {
    let rationale = sequence_logprob(&candidate.completion_tokens, candidate.rationale_span, normalize);
    let answer = sequence_logprob(&candidate.completion_tokens, candidate.answer_span, normalize);
    logsumexp(rationale, answer)
}

/// A subset whose draft could not be used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedDraft {
    pub subset_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftingOutcome {
    /// Surviving candidates in subset order.
    pub candidates: Vec<DraftCandidate>,
    pub dropped: Vec<DroppedDraft>,
}

/// Sends one greedy generation request per subset, all in flight at once,
/// round-robin over the drafter pool.
pub async fn generate_drafts(
    client: &LmClient,
    pool: &EndpointPool,
    question: &Question,
    subsets: &[DocumentSubset],
    docs: &[Document],
    max_tokens: u32,
    normalize: bool,
) -> Result<DraftingOutcome> {
    if subsets.is_empty() {
        return Err(Error::Argument("no subsets to draft from".into()));
    }
    let prompts = subsets
        .iter()
        .map(|s| build_draft_prompt(question, s, docs))
        .collect::<Result<Vec<_>>>()?;

    let requests = subsets.iter().zip(prompts).enumerate().map(|(i, (subset, prompt))| async move {
        let endpoint = pool.route(i)?;
        let request = GenerateRequest::greedy(prompt, max_tokens);
        let response = client.generate(&endpoint, &request).await?;
        DraftCandidate::from_completion(subset, response.text, response.tokens, normalize)
    });
    let results = join_all(requests).await;

    let mut outcome = DraftingOutcome {
        candidates: Vec::new(),
        dropped: Vec::new(),
    };
    for (subset, result) in subsets.iter().zip(results) {
        match result {
            Ok(c) => outcome.candidates.push(c),
            Err(e) => {
                warn!(subset = subset.subset_index, error = %e, "dropping draft");
                outcome.dropped.push(DroppedDraft {
                    subset_index: subset.subset_index,
                    reason: e.to_string(),
                });
            }
        }
    }
    if outcome.candidates.is_empty() {
        return Err(Error::NoValidDrafts);
    }
    Ok(outcome)
}
