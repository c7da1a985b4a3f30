//! Experiment execution.
//!
//! Each sweep cell writes one directory per repeat (a run record):
//!
//! ```text
//! {output}/{cell}/run-{r}/config.resolved     cell config as TOML, seed pinned
//! {output}/{cell}/run-{r}/completions.jsonl   raw completions in test order
//! {output}/{cell}/run-{r}/metrics.json        scores and failed queries
//! {output}/{cell}/run-{r}/details.jsonl       per-query demos and counts
//! {output}/{cell}/run-{r}/timings.json        latencies (not reproducible)
//! {output}/{cell}/cell.json                   summary read by `report`
//! ```
//!
//! The first three files depend only on the config and the data, so two
//! executions of the same config produce them byte for byte. Completions
//! are journaled to `completions.partial.jsonl` as they arrive; a resumed
//! run only generates what the journal and any earlier `completions.jsonl`
//! are missing.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{
    ConfigError, DemoOrder, EmbedderConfig, EmbedderKind, ExperimentConfig, LlmConfig, LlmKind,
    ModeName,
};
use crate::corpus::{load_corpus, Corpus, CorpusError, Example, Split, TaskKind, TaskSpec};
use crate::embedding::{
    embed_corpus_as, EmbedError, Embedder, EmbeddingCache, ReferenceEmbedder, RemoteEmbedder, Role,
};
use crate::evaluation::{
    aggregate_runs, classification_counts, extraction_counts, parse_prediction, AggregateReport,
    Counts, EvalError, MetricReport, Payload,
};
use crate::generation::{GenerationError, GenerationRequest, LlmClient, MockClient, RemoteLlm};
use crate::prompt::{build_prompt, PromptTemplate};
use crate::report;
use crate::rng::query_seed;
use crate::selection::{
    rank, select, Demonstrations, RankedList, SelectionError, SelectionMode, SelectionSpec,
};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("selection failed for query {query_id:?}: {source}")]
    Selection {
        query_id: String,
        #[source]
        source: SelectionError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("cannot build LLM client: {0}")]
    Client(GenerationError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line_number}: {message}")]
    BadRecord {
        path: PathBuf,
        line_number: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

/// One line of `completions.jsonl`. Exactly one of `raw_text` and `error` is set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub query_id: String,
    pub client: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CompletionRecord {
    pub fn is_failed(&self) -> bool {
        self.raw_text.is_none()
    }
}

/// One line of `details.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDetail {
    pub query_id: String,
    pub demo_ids: Vec<String>,
    pub prediction: Payload,
    pub parse_ok: bool,
    pub failed: bool,
    #[serde(flatten)]
    pub counts: Counts,
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    #[serde(flatten)]
    pub metrics: MetricReport,
    /// Queries whose generation failed; scored as wrong.
    pub failed_queries: Vec<String>,
    /// Queries whose completion could not be parsed into the task's format.
    pub unparsed_queries: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// 1-based repeat index.
    pub repeat: usize,
    pub seed: Option<u64>,
    /// Record directory relative to the output directory.
    pub dir: String,
    pub metrics: MetricReport,
    pub failed_queries: Vec<String>,
}

/// Contents of `cell.json`: everything the report tables need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub label: String,
    pub task: TaskKind,
    pub dataset: String,
    pub model: String,
    pub retriever: String,
    pub mode: ModeName,
    pub k: usize,
    pub gap: Option<usize>,
    pub runs: Vec<RunSummary>,
    pub aggregate: AggregateReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub output_dir: PathBuf,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Reuse journaled completions instead of regenerating them.
    pub resume: bool,
}

pub fn build_embedder(config: &EmbedderConfig) -> Result<Box<dyn Embedder>, EmbedError> {
    Ok(match config.kind {
        EmbedderKind::Reference => {
            Box::new(ReferenceEmbedder::named(config.name.clone(), config.dims)?)
        }
        EmbedderKind::Remote => {
            let endpoint = config.endpoint.clone().unwrap_or_default();
            let mut e = RemoteEmbedder::new(endpoint, config.name.clone(), config.dims)?
                .with_retry(config.retry())
                .with_batch_size(config.batch_size);
            if let Some(q) = &config.query_name {
                e = e.with_query_model(q.clone());
            }
            Box::new(e)
        }
    })
}

/// Embedding cache named by the config, or a fresh in-memory one.
pub fn open_cache(
    config: &ExperimentConfig,
    embedder: &EmbedderConfig,
) -> Result<EmbeddingCache, EmbedError> {
    Ok(match &embedder.cache {
        Some(path) => EmbeddingCache::open(&config.resolve(path))?,
        None => EmbeddingCache::in_memory(),
    })
}

/// Client for one repeat. `plan` is the test ids in file order.
pub fn build_client(config: &LlmConfig, plan: &[String]) -> Result<Box<dyn LlmClient>, RunError> {
    Ok(match config.kind {
        LlmKind::Mock => {
            let client = MockClient::new(config.mock_spec()?, plan)
                .with_rate_by_k(config.rate_by_k()?)
                .map_err(RunError::Client)?;
            Box::new(client)
        }
        LlmKind::Remote => {
            let endpoint = config.endpoint.clone().unwrap_or_default();
            let model = config.name.clone().unwrap_or_default();
            Box::new(
                RemoteLlm::new(endpoint, model, config.params())
                    .map_err(RunError::Client)?
                    .with_retry(config.retry()),
            )
        }
    })
}

pub fn load_split(
    config: &ExperimentConfig,
    task: &TaskSpec,
    split: Split,
) -> Result<Corpus, CorpusError> {
    let path = match split {
        Split::Train => &config.data.train,
        Split::Test => &config.data.test,
    };
    load_corpus(&config.resolve(path), task.clone(), split)
}

/// Ranks the training corpus against every test query, in test order.
pub fn rank_all(
    embedder: &dyn Embedder,
    cache: &EmbeddingCache,
    train: &Corpus,
    test: &Corpus,
) -> Result<Vec<RankedList>, RunError> {
    let train_vecs = embed_corpus_as(embedder, train, cache, Role::Passage)?;
    let test_vecs = embed_corpus_as(embedder, test, cache, Role::Query)?;
    test_vecs
        .iter()
        .map(|(id, v)| {
            rank(&train_vecs, v, id).map_err(|source| RunError::Selection {
                query_id: id.to_string(),
                source,
            })
        })
        .collect()
}

/// Number of repeats a cell actually runs, and the seed of each.
///
/// Deterministic selection with a deterministic LLM gives the same result
/// every time, so it runs once whatever `run.repeats` says.
pub fn planned_repeats(cell: &ExperimentConfig) -> Vec<Option<u64>> {
    match cell.selection.mode {
        ModeName::Random => cell.run.seeds.iter().copied().map(Some).collect(),
        _ if cell.llm.is_deterministic() => {
            if cell.run.repeats > 1 {
                log::warn!(
                    "{}: deterministic selection and LLM, running 1 repeat instead of {}",
                    cell.cell_label(),
                    cell.run.repeats
                );
            }
            vec![None]
        }
        _ => vec![None; cell.run.repeats],
    }
}

/// Selection spec for one query of one repeat.
fn query_spec(
    cell: &ExperimentConfig,
    run_seed: Option<u64>,
    query_id: &str,
) -> Result<SelectionSpec, ConfigError> {
    let seed = run_seed.map(|s| query_seed(s, query_id)).unwrap_or(0);
    cell.selection_spec(seed)
}

/// Puts the most similar demonstration last when asked to. Only the ranked
/// modes have a similarity order; Random and Class keep theirs.
pub fn apply_demo_order(
    order: DemoOrder,
    spec: &SelectionSpec,
    demos: Demonstrations,
) -> Demonstrations {
    match (order, spec.mode) {
        (DemoOrder::MostSimilarLast, SelectionMode::Top | SelectionMode::Diversity { .. }) => {
            demos.reversed()
        }
        _ => demos,
    }
}

struct Prepared<'a> {
    task: &'a TaskSpec,
    train: &'a Corpus,
    test: &'a Corpus,
    ranked: Option<Arc<Vec<RankedList>>>,
}

/// Runs every cell of `config` into `output_dir` and writes the reports.
pub fn run_experiment(
    config: &ExperimentConfig,
    output_dir: &Path,
    options: RunOptions,
) -> Result<ExperimentOutcome, RunError> {
    let task = config.task_spec()?;
    let train = load_split(config, &task, Split::Train)?;
    let test = load_split(config, &task, Split::Test)?;
    log::info!(
        "loaded {} training and {} test examples",
        train.len(),
        test.len()
    );

    let mut rankings: HashMap<String, Arc<Vec<RankedList>>> = HashMap::new();
    let mut cells = Vec::new();
    for cell in config.cells() {
        let ranked = if cell.selection.mode == ModeName::Random {
            None
        } else {
            let key = toml::to_string(&cell.embedder).expect("embedder config serializes");
            if !rankings.contains_key(&key) {
                let embedder = build_embedder(&cell.embedder)?;
                let cache = open_cache(&cell, &cell.embedder)?;
                rankings.insert(
                    key.clone(),
                    Arc::new(rank_all(embedder.as_ref(), &cache, &train, &test)?),
                );
            }
            Some(rankings[&key].clone())
        };
        let prepared = Prepared {
            task: &task,
            train: &train,
            test: &test,
            ranked,
        };
        cells.push(run_cell(&cell, &prepared, output_dir, options)?);
    }
    report::write_reports(output_dir, &cells)?;
    Ok(ExperimentOutcome {
        output_dir: output_dir.to_path_buf(),
        cells,
    })
}

fn run_cell(
    cell: &ExperimentConfig,
    prepared: &Prepared<'_>,
    output_dir: &Path,
    options: RunOptions,
) -> Result<CellSummary, RunError> {
    let label = cell.cell_label();
    let cell_dir = output_dir.join(&label);
    let mut runs = Vec::new();
    for (i, seed) in planned_repeats(cell).into_iter().enumerate() {
        let repeat = i + 1;
        let dir_name = format!("{label}/run-{repeat}");
        log::info!("running {dir_name}");
        let metrics = run_repeat(cell, prepared, seed, &output_dir.join(&dir_name), options)?;
        runs.push(RunSummary {
            repeat,
            seed,
            dir: dir_name,
            metrics: metrics.metrics,
            failed_queries: metrics.failed_queries,
        });
    }
    let aggregate = aggregate_runs(&runs.iter().map(|r| r.metrics).collect::<Vec<_>>())?;
    let summary = CellSummary {
        label,
        task: cell.task.kind,
        dataset: cell.task.dataset.clone(),
        model: cell.llm.label().to_string(),
        retriever: cell.embedder.label().to_string(),
        mode: cell.selection.mode,
        k: cell.effective_k(),
        gap: (cell.selection.mode == ModeName::Diversity).then_some(cell.selection.gap),
        runs,
        aggregate,
    };
    write_file(&cell_dir.join("cell.json"), &to_json(&summary))?;
    Ok(summary)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn to_jsonl<T: Serialize>(values: &[T]) -> String {
    values
        .iter()
        .map(|v| serde_json::to_string(v).expect("serializable") + "\n")
        .collect()
}

/// Cell config as written into `config.resolved`: no sweep, one repeat, the
/// repeat's seed, and the task's instruction and output format spelled out.
pub fn resolved_config(cell: &ExperimentConfig, seed: Option<u64>) -> String {
    let mut resolved = cell.clone();
    resolved.sweep = None;
    resolved.run.repeats = 1;
    resolved.run.seeds = seed.into_iter().collect();
    resolved.task.output_format = Some(cell.task.output_format());
    if let Ok(task) = cell.task_spec() {
        resolved.task.instruction = Some(task.instruction);
    }
    resolved.to_toml()
}

struct QueryOutcome {
    record: CompletionRecord,
    demo_ids: Vec<String>,
    latency_ms: u64,
}

fn run_repeat(
    cell: &ExperimentConfig,
    prepared: &Prepared<'_>,
    seed: Option<u64>,
    dir: &Path,
    options: RunOptions,
) -> Result<RunMetrics, RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let started = Instant::now();
    let test = prepared.test;
    let plan: Vec<String> = test.iter().map(|e| e.id.clone()).collect();
    let client = build_client(&cell.llm, &plan)?;
    let template = PromptTemplate::for_task(prepared.task);

    // Demonstrations are computed up front so selection errors abort the run
    // before any LLM call is made.
    let demos = test
        .iter()
        .enumerate()
        .map(|(i, query)| {
            let spec = query_spec(cell, seed, &query.id)?;
            let ranked = prepared.ranked.as_ref().map(|r| &r[i]);
            let chosen =
                select(&spec, prepared.train, ranked).map_err(|source| RunError::Selection {
                    query_id: query.id.clone(),
                    source,
                })?;
            Ok(apply_demo_order(cell.selection.demo_order, &spec, chosen))
        })
        .collect::<Result<Vec<_>, RunError>>()?;

    let journal_path = dir.join("completions.partial.jsonl");
    let final_path = dir.join("completions.jsonl");
    let mut done: HashMap<String, CompletionRecord> = HashMap::new();
    if options.resume {
        for path in [&final_path, &journal_path] {
            if path.exists() {
                for record in read_completions(path)? {
                    if !record.is_failed() {
                        done.insert(record.query_id.clone(), record);
                    }
                }
            }
        }
        log::info!("resuming with {} of {} completions", done.len(), test.len());
    } else if journal_path.exists() {
        fs::remove_file(&journal_path).map_err(io_err(&journal_path))?;
    }
    let journal = Mutex::new(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&journal_path)
            .map_err(io_err(&journal_path))?,
    );

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cell.run.max_inflight)
        .build()
        .expect("thread pool");
    let k = cell.effective_k();
    let outcomes: Vec<QueryOutcome> = pool.install(|| {
        test.examples()
            .par_iter()
            .zip(demos.par_iter())
            .map(|(query, chosen)| {
                let demo_ids = chosen.ids().into_iter().map(str::to_string).collect();
                if let Some(record) = done.get(&query.id) {
                    return Ok(QueryOutcome {
                        record: record.clone(),
                        demo_ids,
                        latency_ms: 0,
                    });
                }
                let prompt = build_prompt(&template, chosen, &query.text);
                let request = GenerationRequest {
                    query,
                    prompt: &prompt,
                    k,
                };
                let outcome = match client.generate(&request) {
                    Ok(c) => QueryOutcome {
                        record: CompletionRecord {
                            query_id: query.id.clone(),
                            client: c.client_name,
                            raw_text: Some(c.raw_text),
                            error: None,
                        },
                        demo_ids,
                        latency_ms: c.latency_ms,
                    },
                    Err(e) => {
                        log::warn!("generation failed for {}: {e}", query.id);
                        QueryOutcome {
                            record: CompletionRecord {
                                query_id: query.id.clone(),
                                client: client.name().to_string(),
                                raw_text: None,
                                error: Some(e.to_string()),
                            },
                            demo_ids,
                            latency_ms: 0,
                        }
                    }
                };
                if !outcome.record.is_failed() {
                    let line = serde_json::to_string(&outcome.record).expect("serializable") + "\n";
                    let mut file = journal.lock().expect("journal lock");
                    file.write_all(line.as_bytes())
                        .and_then(|_| file.flush())
                        .map_err(io_err(&journal_path))?;
                }
                Ok(outcome)
            })
            .collect::<Result<Vec<_>, RunError>>()
    })?;

    let records: Vec<CompletionRecord> = outcomes.iter().map(|o| o.record.clone()).collect();
    let (metrics, details) = score_records(
        prepared.task,
        test,
        &records,
        outcomes.iter().map(|o| o.demo_ids.clone()),
    )?;

    write_file(&dir.join("config.resolved"), &resolved_config(cell, seed))?;
    write_file(&final_path, &to_jsonl(&records))?;
    write_file(&dir.join("details.jsonl"), &to_jsonl(&details))?;
    write_file(&dir.join("metrics.json"), &to_json(&metrics))?;
    let timings = serde_json::json!({
        "wall_ms": started.elapsed().as_millis() as u64,
        "queries": outcomes
            .iter()
            .map(|o| serde_json::json!({ "query_id": o.record.query_id, "latency_ms": o.latency_ms }))
            .collect::<Vec<_>>(),
    });
    write_file(&dir.join("timings.json"), &to_json(&timings))?;
    drop(journal);
    fs::remove_file(&journal_path).map_err(io_err(&journal_path))?;
    Ok(metrics)
}

/// Reads a completions file, tolerating an unterminated last line as left
/// behind by an interrupted journal write.
pub fn read_completions(path: &Path) -> Result<Vec<CompletionRecord>, RunError> {
    let file = File::open(path).map_err(io_err(path))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(io_err(path))?;
    let last = lines.len();
    let mut records = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => records.push(r),
            Err(_) if i + 1 == last => {
                log::warn!("{}: ignoring truncated last line", path.display())
            }
            Err(e) => {
                return Err(RunError::BadRecord {
                    path: path.to_path_buf(),
                    line_number: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(records)
}

/// Scores completions against the test corpus. Every test query needs a
/// record; failed generations count as wrong.
pub fn score_records(
    task: &TaskSpec,
    test: &Corpus,
    records: &[CompletionRecord],
    demo_ids: impl Iterator<Item = Vec<String>>,
) -> Result<(RunMetrics, Vec<QueryDetail>), RunError> {
    let by_id: HashMap<&str, &CompletionRecord> =
        records.iter().map(|r| (r.query_id.as_str(), r)).collect();
    if by_id.len() != test.len() {
        return Err(EvalError::LengthMismatch {
            preds: by_id.len(),
            golds: test.len(),
        }
        .into());
    }
    let mut demo_ids = demo_ids.fuse();
    let mut total = Counts::default();
    let mut failed_queries = Vec::new();
    let mut unparsed_queries = Vec::new();
    let mut details = Vec::with_capacity(test.len());
    for (index, gold) in test.iter().enumerate() {
        let record = by_id
            .get(gold.id.as_str())
            .ok_or_else(|| EvalError::AlignmentError {
                index,
                pred: String::new(),
                gold: gold.id.clone(),
            })?;
        let detail = score_one(task, gold, record, demo_ids.next().unwrap_or_default());
        if detail.failed {
            failed_queries.push(gold.id.clone());
        } else if !detail.parse_ok {
            unparsed_queries.push(gold.id.clone());
        }
        total = total + detail.counts;
        details.push(detail);
    }
    Ok((
        RunMetrics {
            metrics: MetricReport::from_counts(total, test.len()),
            failed_queries,
            unparsed_queries,
        },
        details,
    ))
}

fn score_one(
    task: &TaskSpec,
    gold: &Example,
    record: &CompletionRecord,
    demo_ids: Vec<String>,
) -> QueryDetail {
    let prediction = match &record.raw_text {
        Some(raw) => parse_prediction(task, &gold.id, raw),
        None => crate::evaluation::Prediction::failed(&gold.id, task.output_format),
    };
    let counts = if task.output_format.is_set_extraction() {
        extraction_counts(&prediction, gold)
    } else {
        classification_counts(&prediction, gold)
    };
    QueryDetail {
        query_id: gold.id.clone(),
        demo_ids,
        prediction: prediction.payload,
        parse_ok: prediction.parse_ok,
        failed: record.is_failed(),
        counts,
    }
}

/// Re-scores a run record directory against the test split of `config`.
pub fn rescore_record(
    config: &ExperimentConfig,
    record_dir: &Path,
) -> Result<RunMetrics, RunError> {
    let task = config.task_spec()?;
    let test = load_split(config, &task, Split::Test)?;
    let records = read_completions(&record_dir.join("completions.jsonl"))?;
    Ok(score_records(&task, &test, &records, std::iter::empty())?.0)
}

/// Reads the cell summaries of a finished experiment, in grid order.
pub fn load_summaries(
    config: &ExperimentConfig,
    output_dir: &Path,
) -> Result<Vec<CellSummary>, RunError> {
    config
        .cells()
        .iter()
        .map(|cell| {
            let path = output_dir.join(cell.cell_label()).join("cell.json");
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            serde_json::from_str(&text).map_err(|e| RunError::BadRecord {
                path: path.clone(),
                line_number: e.line(),
                message: e.to_string(),
            })
        })
        .collect()
}
