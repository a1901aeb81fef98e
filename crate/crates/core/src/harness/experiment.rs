//! Dataset-level runs, ablation grids, parameter sweeps and their on-disk
//! records.
//!
//! A run directory holds `config.json` (the variant snapshot), `results.jsonl`
//! (one deterministic line per record, no timings), `timings.jsonl` and
//! `summary.json`.

use std::path::{Path, PathBuf};

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::dataset::DatasetRecord;
use super::eval::evaluate_answer;
use super::latency::{report_latency, LatencyReport, ModeLatency};
use super::pipeline::{run_pipeline, CandidateRecord, PipelineResult, RunMode};
use crate::backend::Backends;
use crate::config::{
    validate_config, PipelineConfig, SamplingMode, ScoreTerm, SelectionMode,
    VerificationContextMode, REFLECTION_STATEMENTS,
};
use crate::error::{Error, Result};
use crate::model::StageTimings;

/// A named configuration to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub mode: RunMode,
    pub config: PipelineConfig,
}

impl Variant {
    pub fn new(name: impl Into<String>, mode: RunMode, config: PipelineConfig) -> Self {
        Self {
            name: name.into(),
            mode,
            config,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationGrid {
    /// Alternative sampling strategies, each score term removed in turn, and
    /// random selection without verification.
    Components,
    /// What the verifier sees next to the answer.
    Context,
    /// Alternative reflection statements.
    Reflection,
    /// Components followed by context.
    All,
}

impl std::str::FromStr for AblationGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "components" => Ok(Self::Components),
            "context" => Ok(Self::Context),
            "reflection" => Ok(Self::Reflection),
            "all" => Ok(Self::All),
            other => Err(format!(
                "unknown grid {other:?} (expected components|context|reflection|all)"
            )),
        }
    }
}

fn without(base: &PipelineConfig, term: ScoreTerm) -> PipelineConfig {
    let mut cfg = base.clone();
    cfg.score_terms.remove(&term);
    cfg
}

pub fn ablation_grid(base: &PipelineConfig, grid: AblationGrid) -> Vec<Variant> {
    let v = |name: &str, cfg: PipelineConfig| Variant::new(name, RunMode::Speculative, cfg);
    let components = || {
        vec![
            v(
                "sampling_random_no_cluster",
                PipelineConfig {
                    sampling_mode: SamplingMode::RandomNoCluster,
                    ..base.clone()
                },
            ),
            v(
                "sampling_same_cluster",
                PipelineConfig {
                    sampling_mode: SamplingMode::SameCluster,
                    ..base.clone()
                },
            ),
            v("without_draft_score", without(base, ScoreTerm::Draft)),
            v(
                "without_self_consistency",
                without(base, ScoreTerm::SelfConsistency),
            ),
            v("without_self_reflection", without(base, ScoreTerm::SelfReflection)),
            v(
                "random_selection",
                PipelineConfig {
                    selection_mode: SelectionMode::Random,
                    ..base.clone()
                },
            ),
        ]
    };
    let context = || {
        [
            ("context_rationale_only", VerificationContextMode::RationaleOnly),
            ("context_documents_only", VerificationContextMode::DocumentsOnly),
            (
                "context_rationale_and_documents",
                VerificationContextMode::RationaleAndDocuments,
            ),
        ]
        .into_iter()
        .map(|(name, mode)| {
            v(
                name,
                PipelineConfig {
                    verification_context_mode: mode,
                    ..base.clone()
                },
            )
        })
        .collect::<Vec<_>>()
    };
    match grid {
        AblationGrid::Components => components(),
        AblationGrid::Context => context(),
        AblationGrid::Reflection => REFLECTION_STATEMENTS
            .iter()
            .enumerate()
            .map(|(i, r)| {
                v(
                    &format!("reflection_{i}"),
                    PipelineConfig {
                        reflection_statement: r.to_string(),
                        ..base.clone()
                    },
                )
            })
            .collect(),
        AblationGrid::All => {
            let mut all = components();
            all.extend(context());
            all
        }
    }
}

/// Cartesian grid over draft counts and subset sizes. An empty list keeps the
/// base value for that axis.
pub fn sweep_grid(base: &PipelineConfig, m_values: &[usize], subset_sizes: &[usize]) -> Vec<Variant> {
    let ms = if m_values.is_empty() {
        vec![base.num_drafts]
    } else {
        m_values.to_vec()
    };
    let sizes = if subset_sizes.is_empty() {
        vec![base.num_clusters]
    } else {
        subset_sizes.to_vec()
    };
    ms.iter()
        .flat_map(|&m| {
            sizes.iter().map(move |&s| {
                Variant::new(
                    format!("m{m}_subset{s}"),
                    RunMode::Speculative,
                    PipelineConfig {
                        num_drafts: m,
                        num_clusters: s,
                        ..base.clone()
                    },
                )
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub query_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_answer: Option<String>,
    /// Absent when the pipeline failed for this record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub variant: String,
    pub mode: RunMode,
    pub accuracy: f64,
    pub evaluated: usize,
    pub correct: usize,
    pub failed: usize,
    pub records: Vec<RecordOutcome>,
    pub latency: ModeLatency,
    pub config_snapshot: Variant,
}

/// Deterministic per-record line of `results.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultLine {
    pub query_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winning_subset_index: Option<usize>,
    #[serde(default)]
    pub candidates: Vec<CandidateRecord>,
    #[serde(default)]
    pub notices: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingLine {
    pub query_id: String,
    pub variant: String,
    pub timings: StageTimings,
}

#[derive(Debug)]
pub struct ExperimentRun {
    pub summary: EvalSummary,
    pub results: Vec<ResultLine>,
    pub timings: Vec<TimingLine>,
}

impl ExperimentRun {
    pub fn pipeline_timings(&self) -> Vec<StageTimings> {
        self.timings.iter().map(|t| t.timings).collect()
    }
}

/// Runs every record under `variant`. With `concurrency == 1` records go
/// one at a time, which is required for latency measurements.
pub async fn run_experiment(
    records: &[DatasetRecord],
    variant: &Variant,
    backends: &Backends,
    concurrency: usize,
) -> Result<ExperimentRun> {
    let violations = validate_config(&variant.config);
    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }
    let outcomes: Vec<Result<PipelineResult>> = stream::iter(records)
        .map(|r| run_pipeline(r, &variant.config, backends, variant.mode))
        .buffered(concurrency.max(1))
        .collect()
        .await;

    let mut results = Vec::with_capacity(records.len());
    let mut timings = Vec::new();
    let mut outcomes_out = Vec::with_capacity(records.len());
    for (record, outcome) in records.iter().zip(outcomes) {
        let query_id = record.query.id().to_string();
        match outcome {
            Ok(res) => {
                let correct = evaluate_answer(&res.final_answer, &record.query);
                timings.push(TimingLine {
                    query_id: query_id.clone(),
                    variant: variant.name.clone(),
                    timings: res.timings,
                });
                outcomes_out.push(RecordOutcome {
                    query_id: query_id.clone(),
                    final_answer: Some(res.final_answer.clone()),
                    correct: Some(correct),
                    error: None,
                });
                results.push(ResultLine {
                    query_id,
                    final_answer: Some(res.final_answer),
                    correct: Some(correct),
                    winning_subset_index: Some(res.winning_subset_index),
                    candidates: res.candidates,
                    notices: res.notices,
                    error: None,
                });
            }
            Err(e) => {
                let msg = e.to_string();
                outcomes_out.push(RecordOutcome {
                    query_id: query_id.clone(),
                    final_answer: None,
                    correct: None,
                    error: Some(msg.clone()),
                });
                results.push(ResultLine {
                    query_id,
                    final_answer: None,
                    correct: None,
                    winning_subset_index: None,
                    candidates: Vec::new(),
                    notices: Vec::new(),
                    error: Some(msg),
                });
            }
        }
    }

    let evaluated = outcomes_out.iter().filter(|o| o.correct.is_some()).count();
    let correct = outcomes_out.iter().filter(|o| o.correct == Some(true)).count();
    let latency = report_latency(&[(
        variant.name.clone(),
        timings.iter().map(|t| t.timings).collect(),
    )])
    .modes
    .remove(0);
    let summary = EvalSummary {
        variant: variant.name.clone(),
        mode: variant.mode,
        accuracy: if evaluated == 0 {
            0.0
        } else {
            correct as f64 / evaluated as f64
        },
        evaluated,
        correct,
        failed: records.len() - evaluated,
        records: outcomes_out,
        latency,
        config_snapshot: variant.clone(),
    };
    Ok(ExperimentRun {
        summary,
        results,
        timings,
    })
}

/// Runs each variant in turn with fresh endpoint state.
pub async fn run_grid(
    records: &[DatasetRecord],
    variants: &[Variant],
    concurrency: usize,
) -> Result<Vec<ExperimentRun>> {
    let mut runs = Vec::with_capacity(variants.len());
    for v in variants {
        let backends = Backends::from_config(&v.config);
        runs.push(run_experiment(records, v, &backends, concurrency).await?);
    }
    Ok(runs)
}

fn write_jsonl<T: Serialize>(path: &Path, lines: &[T]) -> Result<()> {
    let mut out = String::new();
    for l in lines {
        out.push_str(&serde_json::to_string(l)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes the four run files into `dir`, creating it if needed.
pub fn write_run(dir: &Path, run: &ExperimentRun) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("config.json"),
        serde_json::to_string_pretty(&run.summary.config_snapshot)?,
    )?;
    write_jsonl(&dir.join("results.jsonl"), &run.results)?;
    write_jsonl(&dir.join("timings.jsonl"), &run.timings)?;
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&run.summary)?,
    )?;
    Ok(())
}

/// One subdirectory per variant plus a `summaries.json` index.
pub fn write_grid(root: &Path, runs: &[ExperimentRun]) -> Result<()> {
    std::fs::create_dir_all(root)?;
    for run in runs {
        write_run(&root.join(&run.summary.variant), run)?;
    }
    let summaries: Vec<&EvalSummary> = runs.iter().map(|r| &r.summary).collect();
    std::fs::write(
        root.join("summaries.json"),
        serde_json::to_string_pretty(&summaries)?,
    )?;
    Ok(())
}

fn timing_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let direct = path.join("timings.jsonl");
    if direct.is_file() {
        return Ok(vec![direct]);
    }
    let mut found: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok())
        .map(|e| e.path().join("timings.jsonl"))
        .filter(|p| p.is_file())
        .collect();
    found.sort();
    if found.is_empty() {
        return Err(Error::Data(format!(
            "no timings.jsonl under {}",
            path.display()
        )));
    }
    Ok(found)
}

/// Groups every timing line found at `path` (a file, a run directory or a
/// grid directory) by variant, in first-seen order.
pub fn load_timings(path: &Path) -> Result<Vec<(String, Vec<StageTimings>)>> {
    let mut groups: Vec<(String, Vec<StageTimings>)> = Vec::new();
    for file in timing_files(path)? {
        let text = std::fs::read_to_string(&file)?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let t: TimingLine = serde_json::from_str(line).map_err(|e| Error::Dataset {
                line: i + 1,
                message: format!("{}: {e}", file.display()),
            })?;
            match groups.iter_mut().find(|(name, _)| *name == t.variant) {
                Some((_, v)) => v.push(t.timings),
                None => groups.push((t.variant, vec![t.timings])),
            }
        }
    }
    Ok(groups)
}

pub fn report_from_path(path: &Path) -> Result<LatencyReport> {
    let groups = load_timings(path)?;
    if groups.is_empty() {
        return Err(Error::Data(format!("no timing records in {}", path.display())));
    }
    Ok(report_latency(&groups))
}
