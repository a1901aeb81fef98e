//! Per-stage latency statistics and cross-mode comparison.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::StageTimings;

pub const STAGES: [&str; 6] = ["embed", "cluster", "sample", "draft", "verify", "total"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
}

/// Nearest-rank percentile of an ascending slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl StageStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean: samples.iter().sum::<f64>() / samples.len() as f64,
            p50: percentile(&sorted, 50.0),
            p95: percentile(&sorted, 95.0),
        }
    }
}

fn stage_value(t: &StageTimings, stage: &str) -> f64 {
    match stage {
        "embed" => t.embed_ms,
        "cluster" => t.cluster_ms,
        "sample" => t.sample_ms,
        "draft" => t.draft_ms,
        "verify" => t.verify_ms,
        _ => t.total_ms,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeLatency {
    pub label: String,
    pub count: usize,
    /// Parallel to [`STAGES`].
    pub stages: Vec<StageStats>,
    /// Mean total latency relative to the first mode, in signed percent.
    /// Absent for the first mode and when the reference mean is zero.
    pub relative_total_pct: Option<f64>,
}

impl ModeLatency {
    pub fn stage(&self, name: &str) -> Option<StageStats> {
        STAGES.iter().position(|s| *s == name).map(|i| self.stages[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub modes: Vec<ModeLatency>,
}

/// Builds one column per labelled group of timings; the first group is the
/// reference for relative differences.
pub fn report_latency(groups: &[(String, Vec<StageTimings>)]) -> LatencyReport {
    let mut modes: Vec<ModeLatency> = groups
        .iter()
        .map(|(label, timings)| ModeLatency {
            label: label.clone(),
            count: timings.len(),
            stages: STAGES
                .iter()
                .map(|s| {
                    let samples: Vec<f64> = timings.iter().map(|t| stage_value(t, s)).collect();
                    StageStats::from_samples(&samples)
                })
                .collect(),
            relative_total_pct: None,
        })
        .collect();
    if let Some(reference) = modes.first().map(|m| m.stages[5].mean) {
        for m in modes.iter_mut().skip(1) {
            if reference > 0.0 {
                m.relative_total_pct = Some((m.stages[5].mean - reference) / reference * 100.0);
            }
        }
    }
    LatencyReport { modes }
}

impl fmt::Display for LatencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<10}", "stage (ms)")?;
        for m in &self.modes {
            write!(f, " | {:>32}", format!("{} (n={})", m.label, m.count))?;
        }
        writeln!(f)?;
        for (i, stage) in STAGES.iter().enumerate() {
            write!(f, "{stage:<10}")?;
            for m in &self.modes {
                let s = m.stages[i];
                write!(
                    f,
                    " | {:>32}",
                    format!("mean {:.1} p50 {:.1} p95 {:.1}", s.mean, s.p50, s.p95)
                )?;
            }
            writeln!(f)?;
        }
        if self.modes.len() > 1 {
            write!(f, "{:<10}", "vs first")?;
            for m in &self.modes {
                let cell = match m.relative_total_pct {
                    Some(p) => format!("{p:+.2}%"),
                    None => "-".to_string(),
                };
                write!(f, " | {cell:>32}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
