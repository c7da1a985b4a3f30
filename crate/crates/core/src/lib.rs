//! In-context learning experiments for biomedical NLP: embed a training
//! corpus, pick demonstrations for each test query, prompt an LLM and score
//! the completions.
//!
//! The pipeline stages map onto modules:
//!
//! - [`corpus`]: unified JSONL corpora and task specs
//! - [`embedding`]: embedders, cosine similarity, the embedding cache
//! - [`selection`]: ranking and the four demonstration selection modes
//! - [`prompt`] and [`generation`]: prompt assembly and LLM clients
//! - [`evaluation`]: parsing completions and micro P/R/F1
//! - [`runner`] and [`report`]: experiment grids, run records and tables

pub mod cli;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod evaluation;
pub mod generation;
pub mod http;
pub mod prompt;
pub mod report;
pub mod rng;
pub mod runner;
pub mod selection;
pub mod synthetic;

pub use config::{ConfigError, ExperimentConfig};
pub use corpus::{
    load_corpus, Corpus, CorpusError, Example, OutputFormat, Split, TaskKind, TaskSpec,
};
pub use embedding::{
    cosine, EmbedError, Embedder, EmbeddingCache, EmbeddingVector, ReferenceEmbedder,
};
pub use evaluation::{aggregate_runs, score, AggregateReport, MetricReport, Prediction};
pub use generation::{Completion, LlmClient, MockClient, MockSpec, RemoteLlm};
pub use prompt::{build_prompt, PromptTemplate};
pub use runner::{run_experiment, CellSummary, RunError, RunOptions};
pub use selection::{
    rank, select, Demonstrations, RankedList, SelectionError, SelectionMode, SelectionSpec,
};
