//! Command-line pipeline. Each subcommand reads a flat `key = value` config,
//! consumes artifacts under `out_dir` and writes its own.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::LmOptions;
use crate::config::RunConfig;
pub use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "asymgauge", version, about = "Directional word-relatedness evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides a config key; `--key value` is accepted as shorthand.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize evocation datasets into canonical count tables.
    Ingest(Common),
    /// Build per-relation pair sets from clean pairs and the knowledge graph.
    Annotate(Common),
    /// Build the paragraph index over the corpus.
    Index(Common),
    /// Conditionals from evocation counts.
    CondEvoc(Common),
    /// Conditionals from static embeddings.
    CondStatic(Common),
    /// Conditionals from a masked language model.
    CondLm {
        #[command(flatten)]
        common: Common,
        /// Write every scoring task to this file and stop.
        #[arg(long, conflicts_with = "consume_scores")]
        emit_tasks: Option<PathBuf>,
        /// Read scores from this file instead of running a scorer.
        #[arg(long)]
        consume_scores: Option<PathBuf>,
    },
    /// Metric tables, LAR scatter data and binned accuracy.
    Report(Common),
    /// Symmetric similarity benchmarks.
    Simeval(Common),
    /// Wire-protocol scorer with closed-form answers, for testing.
    #[command(hide = true)]
    MockScorer {
        #[arg(long)]
        fail_after: Option<usize>,
    },
}

const KNOWN_FLAGS: [&str; 7] = ["--config", "--emit-tasks", "--consume-scores", "--set", "--fail-after", "--help", "--version"];

/// Rewrites `--key value` and `--key=value` for unknown keys into
/// `--set key=value`.
pub fn normalize_args(args: impl IntoIterator<Item = OsString>) -> Vec<OsString> {
    let args: Vec<OsString> = args.into_iter().collect();
    let mut out = Vec::with_capacity(args.len());
    let mut i = 0;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        let Some(body) = a.strip_prefix("--").filter(|b| !b.is_empty()) else {
            out.push(args[i].clone());
            i += 1;
            continue;
        };
        let (key, inline) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (body.to_string(), None),
        };
        if KNOWN_FLAGS.contains(&format!("--{key}").as_str()) {
            out.push(args[i].clone());
            i += 1;
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None if i + 1 < args.len() => {
                i += 1;
                args[i].to_string_lossy().into_owned()
            }
            None => String::new(),
        };
        out.push("--set".into());
        out.push(format!("{key}={value}").into());
        i += 1;
    }
    out
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let overrides = common
        .set
        .iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .filter(|(k, _)| !k.is_empty())
                .ok_or_else(|| CliError::invalid(format!("override {s:?} must be key=value")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    RunConfig::load(&common.config, &overrides)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest(c) => commands::ingest(&load(&c)?),
        Command::Annotate(c) => commands::annotate(&load(&c)?),
        Command::Index(c) => commands::index(&load(&c)?),
        Command::CondEvoc(c) => commands::cond_evoc(&load(&c)?),
        Command::CondStatic(c) => commands::cond_static(&load(&c)?),
        Command::CondLm { common, emit_tasks, consume_scores } => {
            commands::cond_lm(&load(&common)?, &LmOptions { emit_tasks, consume_scores })
        }
        Command::Report(c) => commands::report(&load(&c)?),
        Command::Simeval(c) => commands::simeval(&load(&c)?),
        Command::MockScorer { fail_after } => commands::mock_scorer(fail_after),
    }
}
