//! Command-line interface. `embed`, `rank` and `select` use the main
//! `[embedder]`, `[llm]` and `[selection]` sections and ignore `[sweep]`.
//!
//! Exit codes: 0 on success, 1 for usage or config errors, 2 for runtime
//! errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{config_schema, ConfigError, ExperimentConfig};
use crate::corpus::Split;
use crate::embedding::{embed_corpus_as, Role};
use crate::prompt::{build_prompt, PromptTemplate};
use crate::report::write_reports;
use crate::rng::query_seed;
use crate::runner::{
    apply_demo_order, build_embedder, load_split, load_summaries, open_cache, rank_all,
    rescore_record, run_experiment, RunError, RunOptions,
};
use crate::selection::select;

#[derive(Debug, Parser)]
#[command(
    name = "mmrag",
    version,
    about = "Demonstration selection experiments for in-context learning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed one split and print `{"id", "vector"}` JSON lines.
    Embed {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
    },
    /// Rank the training corpus against one test query (`rank<TAB>id<TAB>score`).
    Rank {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        query_id: String,
        /// Print only the first N entries.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Print the demonstrations chosen for one test query.
    Select {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        query_id: String,
        /// Run seed for random mode; defaults to the first of `run.seeds`.
        #[arg(long)]
        seed: Option<u64>,
        /// Print the assembled prompt instead of the ids.
        #[arg(long)]
        prompt: bool,
    },
    /// Run every cell of the experiment and write records and reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `run.output_dir`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Keep completions already journaled in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Re-score a run record directory and print its metrics as JSON.
    Score {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        record: PathBuf,
    },
    /// Rebuild the report tables of a finished run.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Print every config key with its default, or with `--config` the
    /// config as loaded with defaults filled in.
    ConfigSchema {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Run(RunError::Config(_)) | CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Errors are reported on stderr.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Embed { config, split } => {
            let config = ExperimentConfig::load(config)?;
            let task = config.task_spec()?;
            let (split, role) = match split {
                SplitArg::Train => (Split::Train, Role::Passage),
                SplitArg::Test => (Split::Test, Role::Query),
            };
            let corpus = load_split(&config, &task, split).map_err(RunError::from)?;
            let embedder = build_embedder(&config.embedder).map_err(RunError::from)?;
            let cache = open_cache(&config, &config.embedder).map_err(RunError::from)?;
            let embedded = embed_corpus_as(embedder.as_ref(), &corpus, &cache, role)
                .map_err(RunError::from)?;
            for (id, v) in embedded.iter() {
                let line = serde_json::json!({ "id": id, "vector": v });
                writeln!(out, "{line}")?;
            }
        }
        Command::Rank {
            config,
            query_id,
            top,
        } => {
            let config = ExperimentConfig::load(config)?;
            let ranked = ranked_for(&config, query_id)?;
            let tsv = ranked.to_tsv();
            let limit = top.unwrap_or(usize::MAX);
            for line in tsv.lines().take(limit) {
                writeln!(out, "{line}")?;
            }
        }
        Command::Select {
            config,
            query_id,
            seed,
            prompt,
        } => {
            let config = ExperimentConfig::load(config)?;
            let task = config.task_spec()?;
            let train = load_split(&config, &task, Split::Train).map_err(RunError::from)?;
            let test = load_split(&config, &task, Split::Test).map_err(RunError::from)?;
            let query = test
                .get(query_id)
                .ok_or_else(|| CliError::Usage(format!("no test example with id {query_id:?}")))?;
            let run_seed = seed.or(config.run.seeds.first().copied()).unwrap_or(0);
            let spec = config.selection_spec(query_seed(run_seed, query_id))?;
            let ranked = if spec.mode.needs_ranking() {
                Some(ranked_for(&config, query_id)?)
            } else {
                None
            };
            let demos =
                select(&spec, &train, ranked.as_ref()).map_err(|source| RunError::Selection {
                    query_id: query_id.clone(),
                    source,
                })?;
            let demos = apply_demo_order(config.selection.demo_order, &spec, demos);
            if *prompt {
                writeln!(
                    out,
                    "{}",
                    build_prompt(&PromptTemplate::for_task(&task), &demos, &query.text)
                )?;
            } else {
                for id in demos.ids() {
                    writeln!(out, "{id}")?;
                }
            }
        }
        Command::Run {
            config,
            output_dir,
            resume,
        } => {
            let config = ExperimentConfig::load(config)?;
            let dir = output_dir.clone().unwrap_or_else(|| config.output_dir());
            let outcome = run_experiment(&config, &dir, RunOptions { resume: *resume })?;
            writeln!(
                out,
                "{} cells written to {}",
                outcome.cells.len(),
                outcome.output_dir.display()
            )?;
        }
        Command::Score { config, record } => {
            let config = ExperimentConfig::load(config)?;
            let metrics = rescore_record(&config, record)?;
            writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&metrics).expect("serializable")
            )?;
        }
        Command::Report { config, output_dir } => {
            let config = ExperimentConfig::load(config)?;
            let dir = output_dir.clone().unwrap_or_else(|| config.output_dir());
            let cells = load_summaries(&config, &dir)?;
            write_reports(&dir, &cells)?;
            write!(out, "{}", crate::report::results_markdown(&cells))?;
        }
        Command::ConfigSchema { config } => match config {
            Some(path) => write!(out, "{}", ExperimentConfig::load(path)?.to_toml())?,
            None => write!(out, "{}", config_schema())?,
        },
    }
    Ok(())
}

fn ranked_for(
    config: &ExperimentConfig,
    query_id: &str,
) -> Result<crate::selection::RankedList, CliError> {
    let task = config.task_spec()?;
    let train = load_split(config, &task, Split::Train).map_err(RunError::from)?;
    let test = load_split(config, &task, Split::Test).map_err(RunError::from)?;
    let position = test
        .position(query_id)
        .ok_or_else(|| CliError::Usage(format!("no test example with id {query_id:?}")))?;
    let query =
        crate::corpus::Corpus::new(task, Split::Test, vec![test.examples()[position].clone()])
            .map_err(RunError::from)?;
    let embedder = build_embedder(&config.embedder).map_err(RunError::from)?;
    let cache = open_cache(config, &config.embedder).map_err(RunError::from)?;
    Ok(rank_all(embedder.as_ref(), &cache, &train, &query)?.remove(0))
}
