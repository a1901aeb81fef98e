//! Datasets, the end-to-end pipeline, evaluation and experiment drivers.

mod dataset;
mod eval;
mod experiment;
mod latency;
mod pipeline;

pub use dataset::{load_dataset, parse_dataset, write_dataset, DatasetLine, DatasetRecord};
pub use eval::{evaluate_answer, normalize_text};
pub use experiment::{
    ablation_grid, load_timings, report_from_path, run_experiment, run_grid, sweep_grid, write_grid,
    write_run, AblationGrid, EvalSummary, ExperimentRun, RecordOutcome, ResultLine, TimingLine,
    Variant,
};
pub use latency::{report_latency, LatencyReport, ModeLatency, StageStats, STAGES};
pub use pipeline::{
    run_pipeline, run_speculative, run_standard_baseline, CandidateRecord, PipelineResult, RunMode,
};
