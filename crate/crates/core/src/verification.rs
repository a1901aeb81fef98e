//! Scoring drafts with the verifier in a single echo pass, and picking one.
//!
//! The verifier prompt uses labelled sections so every scored region has an
//! exact byte span:
//!
//! ```text
//! ## Instruction: <question>
//! [## Evidence: ... ]          (document modes only)
//! ## Response: <answer>
//! [## Rationale: <rationale>]  (rationale modes only)
//! <reflection statement>
//! Yes
//! ```
//!
//! With documents only, the evidence conditions the answer and only the
//! answer span counts toward the self-consistency score.

use std::collections::BTreeSet;

use futures::future::join_all;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backend::wire::GenerateRequest;
use crate::backend::{Endpoint, LmClient};
use crate::config::{ScoreTerm, SelectionMode, VerificationContextMode};
use crate::drafting::{push_evidence, sequence_logprob, ByteSpan, DraftCandidate};
use crate::error::{Error, Result, TransportError};
use crate::model::{Document, Question};
use crate::rng::seeded_rng;

pub const AFFIRMATION: &str = "Yes";

/// Reflection statement and the affirmation whose probability is measured.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionStatement {
    pub text: String,
    pub expected_affirmation: String,
}

impl ReflectionStatement {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::Argument("reflection statement must be non-empty".into()));
        }
        Ok(Self {
            text,
            expected_affirmation: AFFIRMATION.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyPrompt {
    pub text: String,
    pub answer_span: ByteSpan,
    /// Present in the modes that include the rationale.
    pub rationale_span: Option<ByteSpan>,
    pub affirmation_span: ByteSpan,
}

impl VerifyPrompt {
    /// Spans whose tokens make up the self-consistency score.
    pub fn consistency_spans(&self) -> Vec<ByteSpan> {
        std::iter::once(self.answer_span)
            .chain(self.rationale_span)
            .collect()
    }
}

fn push_span(out: &mut String, s: &str) -> ByteSpan {
    let start = out.len();
    out.push_str(s);
    ByteSpan::new(start, out.len())
}

/// `docs` are the candidate's subset documents, used by the document modes.
pub fn build_verify_prompt(
    question: &Question,
    candidate: &DraftCandidate,
    docs: &[&Document],
    mode: VerificationContextMode,
    reflection: &ReflectionStatement,
) -> VerifyPrompt {
    let mut out = String::new();
    out.push_str("## Instruction: ");
    out.push_str(&question.instruction());
    out.push('\n');
    if matches!(
        mode,
        VerificationContextMode::DocumentsOnly | VerificationContextMode::RationaleAndDocuments
    ) {
        push_evidence(&mut out, docs);
    }
    out.push_str("## Response: ");
    let answer_span = push_span(&mut out, &candidate.answer);
    out.push('\n');
    let rationale_span = match mode {
        VerificationContextMode::DocumentsOnly => None,
        _ => {
            out.push_str("## Rationale: ");
            let span = push_span(&mut out, &candidate.rationale);
            out.push('\n');
            Some(span)
        }
    };
    out.push_str(&reflection.text);
    out.push('\n');
    let affirmation_span = push_span(&mut out, &reflection.expected_affirmation);
    VerifyPrompt {
        text: out,
        answer_span,
        rationale_span,
        affirmation_span,
    }
}

/// Self-consistency and self-reflection log-scores from one echo request.
pub async fn score_candidate(
    client: &LmClient,
    verifier: &Endpoint,
    prompt: &VerifyPrompt,
    normalize: bool,
) -> Result<(f64, f64), TransportError> {
    let response = client
        .generate(verifier, &GenerateRequest::echo(prompt.text.clone()))
        .await?;
    Ok(scores_from_tokens(&response.tokens, prompt, normalize))
}

pub fn scores_from_tokens(
    tokens: &[crate::drafting::TokenLogprob],
    prompt: &VerifyPrompt,
    normalize: bool,
) -> (f64, f64) {
    let sc = prompt
        .consistency_spans()
        .into_iter()
        .map(|span| sequence_logprob(tokens, span, normalize))
        .sum();
    let sr = sequence_logprob(tokens, prompt.affirmation_span, normalize);
    (sc, sr)
}

/// Log of the product of the enabled score terms.
pub fn combine_scores(
    rho_draft_log: f64,
    rho_sc_log: f64,
    rho_sr_log: f64,
    terms: &BTreeSet<ScoreTerm>,
) -> f64 {
    terms
        .iter()
        .map(|t| match t {
            ScoreTerm::Draft => rho_draft_log,
            ScoreTerm::SelfConsistency => rho_sc_log,
            ScoreTerm::SelfReflection => rho_sr_log,
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub subset_index: usize,
    pub rho_sc_log: f64,
    pub rho_sr_log: f64,
    pub rho_final_log: f64,
    pub dropped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_reason: Option<String>,
}

/// Settings the verifier stage reads from the pipeline config.
#[derive(Debug, Clone)]
pub struct VerifySettings {
    pub mode: VerificationContextMode,
    pub reflection: ReflectionStatement,
    pub score_terms: BTreeSet<ScoreTerm>,
    pub normalize: bool,
}

/// Scores every candidate concurrently; results are in candidate order.
/// Candidates whose echo request fails come back marked dropped.
pub async fn verify_candidates(
    client: &LmClient,
    verifier: &Endpoint,
    question: &Question,
    candidates: &[DraftCandidate],
    docs: &[Document],
    settings: &VerifySettings,
) -> Result<Vec<VerificationResult>> {
    let prompts = candidates
        .iter()
        .map(|c| {
            let members = c
                .member_doc_ids
                .iter()
                .map(|id| {
                    docs.iter()
                        .find(|d| &d.id == id)
                        .ok_or_else(|| Error::Data(format!("unknown document {id:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(build_verify_prompt(question, c, &members, settings.mode, &settings.reflection))
        })
        .collect::<Result<Vec<_>>>()?;

    let scored = join_all(
        prompts
            .iter()
            .map(|p| score_candidate(client, verifier, p, settings.normalize)),
    )
    .await;

    Ok(candidates
        .iter()
        .zip(scored)
        .map(|(c, s)| match s {
            Ok((sc, sr)) => VerificationResult {
                subset_index: c.subset_index,
                rho_sc_log: sc,
                rho_sr_log: sr,
                rho_final_log: combine_scores(c.rho_draft_log, sc, sr, &settings.score_terms),
                dropped: false,
                drop_reason: None,
            },
            Err(e) => VerificationResult {
                subset_index: c.subset_index,
                rho_sc_log: f64::NEG_INFINITY,
                rho_sr_log: f64::NEG_INFINITY,
                rho_final_log: f64::NEG_INFINITY,
                dropped: true,
                drop_reason: Some(e.to_string()),
            },
        })
        .collect())
}

/// Picks the winning subset index among `(subset_index, rho_final_log)` pairs.
/// Argmax breaks ties toward the lowest subset index.
pub fn select_best(scored: &[(usize, f64)], mode: SelectionMode, seed: u64) -> Result<usize> {
    if scored.is_empty() {
        return Err(Error::NoValidDrafts);
    }
    match mode {
        SelectionMode::Argmax => Ok(scored
            .iter()
            .copied()
            .reduce(|best, cur| {
                if cur.1 > best.1 || (cur.1 == best.1 && cur.0 < best.0) {
                    cur
                } else {
                    best
                }
            })
            .map(|(i, _)| i)
            .expect("non-empty")),
        SelectionMode::Random => {
            let mut rng = seeded_rng(seed);
            Ok(scored[rng.random_range(0..scored.len())].0)
        }
    }
}
