//! Command-line driver for the clickbait detection pipeline.
//!
//! One binary, seven subcommands. Every subcommand resolves the same
//! [`RunConfig`], writes its outputs under `--out`, echoes the effective
//! configuration to `effective_config.toml` and appends a timestamped line
//! to `run.log`. Nothing else in the output directory carries a timestamp,
//! so identical inputs give byte-identical outputs.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use clickbait_core::eval_harness::{SummaryMode, SweepAxis};
use clickbait_core::summary_engine::DecodingMode;
use clickbait_core::verbalizer_builder::Strategy;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{what} not found: {}", path.display())]
    Missing { what: &'static str, path: PathBuf },
    #[error("cannot load {what} from {}: {message}", path.display())]
    Resource {
        what: &'static str,
        path: PathBuf,
        message: String,
    },
    #[error("{stage} failed: {source:#}")]
    Stage {
        stage: &'static str,
        #[source]
        source: anyhow::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stage { .. } => 1,
            _ => 2,
        }
    }

    pub fn stage(stage: &'static str) -> impl FnOnce(anyhow::Error) -> Self {
        move |source| CliError::Stage { stage, source }
    }
}

#[derive(Debug, Parser)]
#[command(name = "clickbait", version, about = "Prompt-based clickbait detection with summary re-ranking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate summary candidates and select one per document.
    Summarize(CommonArgs),
    /// Train the multi-metric summary re-ranker.
    RerankTrain(CommonArgs),
    /// Build the label-word verbalizer from the configured resources.
    BuildVerbalizer(CommonArgs),
    /// Score documents and write detection records.
    Detect(CommonArgs),
    /// Train the detector head on a few-shot split.
    Train(CommonArgs),
    /// Compute metrics from detection records, or run the configured experiment.
    Eval(CommonArgs),
    /// Run the experiment over a grid of learning rates or batch sizes.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory searched for relative resource paths.
    #[arg(long, env = config::RESOURCE_ROOT_ENV)]
    pub resource_root: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub template: Option<u32>,
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated experiment seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Comma-separated verbalizer strategies.
    #[arg(long, value_delimiter = ',')]
    pub strategies: Vec<String>,
    /// Comma-separated summary modes: summary, -summary, full_content.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mode: Vec<String>,
    /// Summary generator backend name or decoding mode.
    #[arg(long)]
    pub generator: Option<String>,
    /// Mask scorer backend.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub scorer: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub concepts: Option<PathBuf>,
    #[arg(long)]
    pub summaries: Option<PathBuf>,
    #[arg(long)]
    pub reranker: Option<PathBuf>,
    #[arg(long)]
    pub rerank_corpus: Option<PathBuf>,
    #[arg(long)]
    pub verbalizer: Option<PathBuf>,
    #[arg(long)]
    pub head: Option<PathBuf>,
    /// Detection records to evaluate.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    pub show_config: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// learning_rate or batch_size.
    #[arg(long)]
    pub axis: Option<String>,
    /// Comma-separated parameter values.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<f64>,
}

fn parse_list<T>(values: &[String], what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, CliError> {
    values
        .iter()
        .filter(|v| !v.trim().is_empty())
        .map(|v| parse(v.trim()).ok_or_else(|| CliError::Usage(format!("unknown {what} `{v}`"))))
        .collect()
}

/// Loads the config file, if any, and applies flag overrides on top.
pub fn resolve_config(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut c = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &args.resource_root {
        c.resource_root = Some(v.clone());
    }
    if let Some(v) = args.seed {
        c.seed = v;
    }
    if !args.seeds.is_empty() {
        c.experiment.seeds = args.seeds.clone();
    }
    if let Some(v) = args.template {
        c.template = v;
    }
    if let Some(v) = args.shots {
        c.experiment.shots = v;
    }
    if !args.strategies.is_empty() {
        c.verbalizer.strategies = parse_list(&args.strategies, "strategy", |s| s.parse::<Strategy>().ok())?
            .into_iter()
            .collect();
    }
    if !args.mode.is_empty() {
        c.experiment.modes = parse_list(&args.mode, "mode", SummaryMode::from_name)?;
    }
    if let Some(g) = &args.generator {
        match DecodingMode::from_name(g) {
            Some(mode) => c.generator.decoding_mode = mode,
            None => c.generator.backend = g.clone(),
        }
    }
    if let Some(v) = &args.backend {
        c.backend = v.clone();
    }
    if let Some(v) = &args.out {
        c.out = v.clone();
    }
    if let Some(v) = args.learning_rate {
        c.detector.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        c.detector.batch_size = v;
    }
    if let Some(v) = args.epochs {
        c.detector.epochs = v;
    }
    let p = &mut c.paths;
    for (flag, slot) in [
        (&args.dataset, &mut p.dataset),
        (&args.scorer, &mut p.scorer),
        (&args.embeddings, &mut p.embeddings),
        (&args.lexicon, &mut p.lexicon),
        (&args.concepts, &mut p.concepts),
        (&args.summaries, &mut p.summaries),
        (&args.reranker, &mut p.reranker),
        (&args.rerank_corpus, &mut p.rerank_corpus),
        (&args.verbalizer, &mut p.verbalizer),
        (&args.head, &mut p.head),
        (&args.detections, &mut p.detections),
    ] {
        if let Some(v) = flag {
            *slot = Some(v.clone());
        }
    }
    Ok(c)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let (name, common, sweep) = match &cli.command {
        Command::Summarize(a) => ("summarize", a, None),
        Command::RerankTrain(a) => ("rerank-train", a, None),
        Command::BuildVerbalizer(a) => ("build-verbalizer", a, None),
        Command::Detect(a) => ("detect", a, None),
        Command::Train(a) => ("train", a, None),
        Command::Eval(a) => ("eval", a, None),
        Command::Sweep(a) => ("sweep", &a.common, Some(a)),
    };
    let result = resolve_config(common).and_then(|mut config| {
        if let Some(s) = sweep {
            if let Some(axis) = &s.axis {
                config.experiment.sweep_axis = SweepAxis::from_name(axis)
                    .ok_or_else(|| CliError::Usage(format!("unknown sweep axis `{axis}`")))?;
            }
            if !s.grid.is_empty() {
                config.experiment.grid = s.grid.clone();
            }
        }
        if common.show_config {
            print!("{}", config.to_toml());
            return Ok(());
        }
        commands::prepare_out(&config, name)?;
        let outcome = match &cli.command {
            Command::Summarize(_) => commands::summarize(&config),
            Command::RerankTrain(_) => commands::rerank_train(&config),
            Command::BuildVerbalizer(_) => commands::build_verbalizer(&config),
            Command::Detect(_) => commands::detect(&config),
            Command::Train(_) => commands::train(&config),
            Command::Eval(_) => commands::eval(&config),
            Command::Sweep(_) => commands::sweep(&config),
        };
        commands::log_run(&config, name, outcome.as_ref().err());
        outcome
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
