//! End-to-end draft-then-verify pipeline and the single-call baseline.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::dataset::DatasetRecord;
use crate::backend::wire::GenerateRequest;
use crate::backend::Backends;
use crate::config::{validate_config, PipelineConfig, SelectionMode};
use crate::drafting::{
    build_baseline_prompt, generate_drafts, parse_draft, sequence_logprob, ByteSpan, DraftCandidate,
};
use crate::error::{Error, Result, Stage};
use crate::model::StageTimings;
use crate::rng::derive_seed;
use crate::sampling::{embed_documents, kmeans_cluster, sample_subsets};
use crate::verification::{select_best, verify_candidates, ReflectionStatement, VerifySettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Speculative,
    Standard,
}

impl std::str::FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "speculative" => Ok(RunMode::Speculative),
            "standard" => Ok(RunMode::Standard),
            other => Err(format!("unknown mode {other:?} (expected speculative|standard)")),
        }
    }
}

/// Everything known about one draft after the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub subset_index: usize,
    pub member_doc_ids: Vec<String>,
    pub rationale: String,
    pub answer: String,
    pub raw_completion: String,
    pub rho_draft_log: Option<f64>,
    pub rho_sc_log: Option<f64>,
    pub rho_sr_log: Option<f64>,
    pub rho_final_log: Option<f64>,
    pub dropped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_reason: Option<String>,
}

impl CandidateRecord {
    fn from_draft(c: &DraftCandidate) -> Self {
        Self {
            subset_index: c.subset_index,
            member_doc_ids: c.member_doc_ids.clone(),
            rationale: c.rationale.clone(),
            answer: c.answer.clone(),
            raw_completion: c.raw_completion.clone(),
            rho_draft_log: Some(c.rho_draft_log),
            rho_sc_log: None,
            rho_sr_log: None,
            rho_final_log: None,
            dropped: false,
            drop_reason: None,
        }
    }

    fn dropped(subset_index: usize, member_doc_ids: Vec<String>, reason: String) -> Self {
        Self {
            subset_index,
            member_doc_ids,
            rationale: String::new(),
            answer: String::new(),
            raw_completion: String::new(),
            rho_draft_log: None,
            rho_sc_log: None,
            rho_sr_log: None,
            rho_final_log: None,
            dropped: true,
            drop_reason: Some(reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub query_id: String,
    pub mode: RunMode,
    pub final_answer: String,
    pub winning_subset_index: usize,
    /// One entry per sampled subset, in subset order.
    pub candidates: Vec<CandidateRecord>,
    pub timings: StageTimings,
    pub notices: Vec<String>,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn check_config(cfg: &PipelineConfig) -> Result<()> {
    let violations = validate_config(cfg);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(violations))
    }
}

/// Embed, cluster, sample, draft in parallel, verify, select.
pub async fn run_speculative(
    record: &DatasetRecord,
    cfg: &PipelineConfig,
    backends: &Backends,
) -> Result<PipelineResult> {
    check_config(cfg)?;
    let started = Instant::now();
    let mut timings = StageTimings::default();
    let mut notices = Vec::new();
    let question = record.query.question();
    let qid = question.id.as_str();

    let docs = record.top_documents(cfg.top_n);
    if docs.is_empty() {
        return Err(Error::Data(format!("record {qid} has no documents")).in_stage(Stage::Embed));
    }
    if record.is_short(cfg.top_n) {
        notices.push(format!(
            "record has {} documents, fewer than top_n={}",
            docs.len(),
            cfg.top_n
        ));
    }
    let k = cfg.num_clusters.min(docs.len());
    if k < cfg.num_clusters {
        notices.push(format!("num_clusters reduced from {} to {k}", cfg.num_clusters));
    }

    let t = Instant::now();
    let vectors = embed_documents(&backends.client, &backends.embedder, docs, question)
        .await
        .map_err(|e| e.in_stage(Stage::Embed))?;
    timings.embed_ms = ms_since(t);

    let t = Instant::now();
    let clusters = kmeans_cluster(&vectors, k, derive_seed(cfg.rng_seed, &[qid, "cluster"]))
        .map_err(|e| e.in_stage(Stage::Cluster))?;
    timings.cluster_ms = ms_since(t);

    let t = Instant::now();
    let sampled = sample_subsets(
        &clusters,
        docs,
        cfg.num_drafts,
        cfg.sampling_mode,
        derive_seed(cfg.rng_seed, &[qid, "sample"]),
    )
    .map_err(|e| e.in_stage(Stage::Sample))?;
    if let Some(tr) = &sampled.truncation {
        notices.push(format!(
            "only {} distinct subsets available; {} requested",
            tr.produced, tr.requested
        ));
    }
    timings.sample_ms = ms_since(t);

    let t = Instant::now();
    let drafted = generate_drafts(
        &backends.client,
        &backends.drafters,
        question,
        &sampled.subsets,
        docs,
        cfg.max_draft_tokens,
        cfg.length_normalize_logprobs,
    )
    .await
    .map_err(|e| e.in_stage(Stage::Draft))?;
    timings.draft_ms = ms_since(t);

    let mut records: Vec<CandidateRecord> = sampled
        .subsets
        .iter()
        .map(|s| {
            match drafted.candidates.iter().find(|c| c.subset_index == s.subset_index) {
                Some(c) => CandidateRecord::from_draft(c),
                None => {
                    let reason = drafted
                        .dropped
                        .iter()
                        .find(|d| d.subset_index == s.subset_index)
                        .map(|d| d.reason.clone())
                        .unwrap_or_default();
                    notices.push(format!("draft {} dropped: {reason}", s.subset_index));
                    CandidateRecord::dropped(s.subset_index, s.member_doc_ids.clone(), reason)
                }
            }
        })
        .collect();

    let select_seed = derive_seed(cfg.rng_seed, &[qid, "select"]);
    let winner = match cfg.selection_mode {
        // Random selection skips the verifier entirely.
        SelectionMode::Random => {
            let pool: Vec<(usize, f64)> = drafted
                .candidates
                .iter()
                .map(|c| (c.subset_index, 0.0))
                .collect();
            select_best(&pool, SelectionMode::Random, select_seed)
                .map_err(|e| e.in_stage(Stage::Select))?
        }
        SelectionMode::Argmax => {
            let t = Instant::now();
            let settings = VerifySettings {
                mode: cfg.verification_context_mode,
                reflection: ReflectionStatement::new(cfg.reflection_statement.clone())
                    .map_err(|e| e.in_stage(Stage::Verify))?,
                score_terms: cfg.score_terms.clone(),
                normalize: cfg.length_normalize_logprobs,
            };
            let verified = verify_candidates(
                &backends.client,
                &backends.verifier,
                question,
                &drafted.candidates,
                docs,
                &settings,
            )
            .await
            .map_err(|e| e.in_stage(Stage::Verify))?;
            timings.verify_ms = ms_since(t);

            let mut survivors = Vec::new();
            for v in verified {
                let rec = records
                    .iter_mut()
                    .find(|r| r.subset_index == v.subset_index)
                    .expect("verified candidate has a record");
                if v.dropped {
                    let reason = v.drop_reason.unwrap_or_default();
                    notices.push(format!("verification of draft {} failed: {reason}", v.subset_index));
                    rec.dropped = true;
                    rec.drop_reason = Some(reason);
                } else {
                    rec.rho_sc_log = Some(v.rho_sc_log);
                    rec.rho_sr_log = Some(v.rho_sr_log);
                    rec.rho_final_log = Some(v.rho_final_log);
                    survivors.push((v.subset_index, v.rho_final_log));
                }
            }
            select_best(&survivors, SelectionMode::Argmax, select_seed)
                .map_err(|e| e.in_stage(Stage::Select))?
        }
    };

    let final_answer = records
        .iter()
        .find(|r| r.subset_index == winner)
        .map(|r| r.answer.clone())
        .expect("winner has a record");
    timings.total_ms = ms_since(started);
    Ok(PipelineResult {
        query_id: qid.to_string(),
        mode: RunMode::Speculative,
        final_answer,
        winning_subset_index: winner,
        candidates: records,
        timings,
        notices,
    })
}

/// One generation call with every top-n document in the prompt; no
/// verification.
pub async fn run_standard_baseline(
    record: &DatasetRecord,
    cfg: &PipelineConfig,
    backends: &Backends,
) -> Result<PipelineResult> {
    check_config(cfg)?;
    let started = Instant::now();
    let mut timings = StageTimings::default();
    let mut notices = Vec::new();
    let question = record.query.question();
    let docs = record.top_documents(cfg.top_n);
    if record.is_short(cfg.top_n) {
        notices.push(format!(
            "record has {} documents, fewer than top_n={}",
            docs.len(),
            cfg.top_n
        ));
    }

    let t = Instant::now();
    let prompt = build_baseline_prompt(question, docs);
    let endpoint = backends
        .drafters
        .route(0)
        .map_err(|e| Error::from(e).in_stage(Stage::Draft))?;
    let response = backends
        .client
        .generate(&endpoint, &GenerateRequest::greedy(prompt, cfg.max_draft_tokens))
        .await
        .map_err(|e| Error::from(e).in_stage(Stage::Draft))?;
    timings.draft_ms = ms_since(t);

    // Drafter-formatted output keeps only its response section.
    let (rationale, answer_span) = match parse_draft(&response.text) {
        Ok(p) => (p.rationale, p.answer_span),
        Err(_) => {
            let trimmed = response.text.trim();
            let start = response.text.len() - response.text.trim_start().len();
            (String::new(), ByteSpan::new(start, start + trimmed.len()))
        }
    };
    let answer = answer_span.slice(&response.text).to_string();
    let rho = sequence_logprob(&response.tokens, answer_span, cfg.length_normalize_logprobs);
    timings.total_ms = ms_since(started);
    Ok(PipelineResult {
        query_id: question.id.clone(),
        mode: RunMode::Standard,
        final_answer: answer.clone(),
        winning_subset_index: 0,
        candidates: vec![CandidateRecord {
            subset_index: 0,
            member_doc_ids: docs.iter().map(|d| d.id.clone()).collect(),
            rationale,
            answer,
            raw_completion: response.text,
            rho_draft_log: Some(rho),
            rho_sc_log: None,
            rho_sr_log: None,
            rho_final_log: Some(rho),
            dropped: false,
            drop_reason: None,
        }],
        timings,
        notices,
    })
}

pub async fn run_pipeline(
    record: &DatasetRecord,
    cfg: &PipelineConfig,
    backends: &Backends,
    mode: RunMode,
) -> Result<PipelineResult> {
    match mode {
        RunMode::Speculative => run_speculative(record, cfg, backends).await,
        RunMode::Standard => run_standard_baseline(record, cfg, backends).await,
    }
}
