//! Command-line front end. Exit codes: 0 success, 2 configuration error,
//! 3 pipeline or data error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::backend::{Backends, MockScript, MockServer};
use crate::config::{validate_config, PipelineConfig};
use crate::error::Error;
use crate::harness::{
    ablation_grid, load_dataset, report_from_path, run_experiment, run_grid, sweep_grid, write_grid,
    write_run, AblationGrid, DatasetRecord, ExperimentRun, RunMode, Variant,
};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_PIPELINE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "specrag", version, about = "Draft-then-verify retrieval-augmented generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one mode over a dataset.
    Run(RunArgs),
    /// Run an ablation grid.
    Ablate(AblateArgs),
    /// Sweep draft counts and subset sizes.
    Sweep(SweepArgs),
    /// Serve the deterministic mock model endpoints.
    MockServe(MockServeArgs),
    /// Print a latency table from recorded timings.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// JSON file mirroring the pipeline config; omitted fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config's rng_seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Records processed at once; keep at 1 for latency measurements.
    #[arg(long, default_value_t = 1)]
    pub concurrency: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value = "speculative")]
    pub mode: RunMode,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// components | context | reflection | all
    #[arg(long, default_value = "all")]
    pub grid: AblationGrid,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_delimiter = ',')]
    pub m_values: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub subset_sizes: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct MockServeArgs {
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long, default_value_t = 8100)]
    pub port: u16,
    /// Overrides the script's delay for every request.
    #[arg(long)]
    pub delay_ms: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A timings.jsonl file, a run directory or a grid directory.
    #[arg(long = "in")]
    pub input: PathBuf,
}

enum Failure {
    Config(String),
    Pipeline(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Pipeline(other.to_string()),
        }
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<PipelineConfig, Failure> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::Config(format!("reading {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Config(format!("parsing {}: {e}", p.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    let violations = validate_config(&cfg);
    if !violations.is_empty() {
        return Err(Error::Config(violations).into());
    }
    Ok(cfg)
}

fn check_variants(variants: &[Variant]) -> Result<(), Failure> {
    for v in variants {
        let violations = validate_config(&v.config);
        if !violations.is_empty() {
            return Err(Failure::Config(format!(
                "variant {}: {}",
                v.name,
                Error::Config(violations)
            )));
        }
    }
    Ok(())
}

fn prepare(common: &CommonArgs) -> Result<(PipelineConfig, Vec<DatasetRecord>), Failure> {
    let cfg = load_config(common.config.as_deref(), common.seed)?;
    let records = load_dataset(&common.dataset)?;
    Ok((cfg, records))
}

fn print_summary(run: &ExperimentRun) {
    let s = &run.summary;
    println!(
        "{:<36} accuracy {:.4} ({}/{} evaluated, {} failed)",
        s.variant, s.accuracy, s.correct, s.evaluated, s.failed
    );
}

fn all_failed(runs: &[ExperimentRun]) -> bool {
    runs.iter()
        .any(|r| r.summary.evaluated == 0 && r.summary.failed > 0)
}

async fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let (cfg, records) = prepare(&args.common)?;
            let name = match args.mode {
                RunMode::Speculative => "speculative",
                RunMode::Standard => "standard",
            };
            let variant = Variant::new(name, args.mode, cfg);
            let backends = Backends::from_config(&variant.config);
            let run = run_experiment(&records, &variant, &backends, args.common.concurrency).await?;
            write_run(&args.common.out, &run)?;
            print_summary(&run);
            println!("{}", crate::harness::report_latency(&[(name.to_string(), run.pipeline_timings())]));
            if all_failed(std::slice::from_ref(&run)) {
                return Err(Failure::Pipeline("every record failed".into()));
            }
        }
        Command::Ablate(args) => {
            let (cfg, records) = prepare(&args.common)?;
            let variants = ablation_grid(&cfg, args.grid);
            check_variants(&variants)?;
            let runs = run_grid(&records, &variants, args.common.concurrency).await?;
            write_grid(&args.common.out, &runs)?;
            runs.iter().for_each(print_summary);
            if all_failed(&runs) {
                return Err(Failure::Pipeline("a variant failed on every record".into()));
            }
        }
        Command::Sweep(args) => {
            let (cfg, records) = prepare(&args.common)?;
            let variants = sweep_grid(&cfg, &args.m_values, &args.subset_sizes);
            check_variants(&variants)?;
            let runs = run_grid(&records, &variants, args.common.concurrency).await?;
            write_grid(&args.common.out, &runs)?;
            runs.iter().for_each(print_summary);
            if all_failed(&runs) {
                return Err(Failure::Pipeline("a variant failed on every record".into()));
            }
        }
        Command::MockServe(args) => {
            let script = match &args.script {
                Some(p) => {
                    let text = std::fs::read_to_string(p)
                        .map_err(|e| Failure::Config(format!("reading {}: {e}", p.display())))?;
                    MockScript::from_json_str(&text)
                        .map_err(|e| Failure::Config(format!("script {}: {e}", p.display())))?
                }
                None => MockScript::default(),
            };
            let server = MockServer::start(script, args.port, args.delay_ms)
                .await
                .map_err(|e| Failure::Pipeline(format!("binding port {}: {e}", args.port)))?;
            println!("mock generate endpoint: {}", server.generate_url());
            println!("mock embed endpoint:    {}", server.embed_url());
            server.wait().await;
        }
        Command::Report(args) => {
            let report = report_from_path(&args.input)?;
            print!("{report}");
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and maps failures to exit codes.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: starting runtime: {e}");
            return ExitCode::from(EXIT_PIPELINE);
        }
    };
    match runtime.block_on(execute(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Pipeline(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_PIPELINE)
        }
    }
}
