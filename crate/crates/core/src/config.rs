//! Experiment configuration.
//!
//! Configs are TOML. Relative paths are resolved against the directory of
//! the config file. `mmrag config-schema` prints every key with its default;
//! see [`config_schema`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{OutputFormat, TaskKind, TaskSpec};
use crate::embedding::MIN_REFERENCE_DIMS;
use crate::generation::{GenerationParams, MockSpec};
use crate::http::RetryPolicy;
use crate::prompt::default_instruction;
use crate::selection::{SelectionMode, SelectionSpec};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config at `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub kind: TaskKind,
    #[serde(default)]
    pub dataset: String,
    #[serde(default)]
    pub label_set: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_format: Option<OutputFormat>,
}

impl TaskConfig {
    pub fn output_format(&self) -> OutputFormat {
        self.output_format.unwrap_or(match self.kind {
            TaskKind::Ner => OutputFormat::EntityList,
            TaskKind::Re | TaskKind::Tc => OutputFormat::SingleLabel,
        })
    }

    pub fn task_spec(&self) -> Result<TaskSpec, ConfigError> {
        let format = self.output_format();
        let instruction = self
            .instruction
            .clone()
            .unwrap_or_else(|| default_instruction(format, &self.label_set));
        TaskSpec::new(self.kind, self.label_set.clone(), instruction, format)
            .map_err(|e| invalid("task", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: PathBuf,
    pub test: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Reference,
    Remote,
}

fn default_embedder_name() -> String {
    "reference".into()
}
fn default_dims() -> usize {
    256
}
fn default_batch_size() -> usize {
    32
}
fn default_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    #[serde(default = "default_embedder_name")]
    pub name: String,
    /// Name used in reports; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default = "default_dims")]
    pub dims: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Separate query encoder, when the retriever has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_name: Option<String>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl EmbedderConfig {
    pub fn reference(dims: usize) -> Self {
        Self {
            kind: EmbedderKind::Reference,
            name: default_embedder_name(),
            label: None,
            dims,
            endpoint: None,
            query_name: None,
            batch_size: default_batch_size(),
            cache: None,
            max_retries: default_retries(),
            backoff_ms: default_backoff_ms(),
        }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }

    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base_delay: Duration::from_millis(self.backoff_ms),
        }
    }

    fn validate(&self, field: &str) -> Result<(), ConfigError> {
        if self.name.is_empty() {
            return Err(invalid(&format!("{field}.name"), "must not be empty"));
        }
        if self.dims == 0 {
            return Err(invalid(&format!("{field}.dims"), "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(invalid(&format!("{field}.batch_size"), "must be positive"));
        }
        match self.kind {
            EmbedderKind::Reference if self.dims < MIN_REFERENCE_DIMS => Err(invalid(
                &format!("{field}.dims"),
                format!("reference embedder needs at least {MIN_REFERENCE_DIMS} dims"),
            )),
            EmbedderKind::Remote if self.endpoint.is_none() => Err(invalid(
                &format!("{field}.endpoint"),
                "required for remote embedders",
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmKind {
    Mock,
    Remote,
}

fn default_max_tokens() -> u32 {
    GenerationParams::default().max_tokens
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmConfig {
    pub kind: LlmKind,
    /// Mock declaration, e.g. `mock:oracle` or `mock:corrupt:7:0.3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client: Option<String>,
    /// Remote model name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Name used in reports; defaults to `name` or `client`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub stop: Vec<String>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// Corruption rate per demonstration count for `mock:corrupt`, keyed by k.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub corrupt_rate_by_k: BTreeMap<String, f64>,
}

impl LlmConfig {
    pub fn mock(client: &str) -> Self {
        Self {
            kind: LlmKind::Mock,
            client: Some(client.to_string()),
            name: None,
            label: None,
            endpoint: None,
            max_tokens: default_max_tokens(),
            temperature: 0.0,
            stop: Vec::new(),
            max_retries: default_retries(),
            backoff_ms: default_backoff_ms(),
            corrupt_rate_by_k: BTreeMap::new(),
        }
    }

    pub fn label(&self) -> &str {
        self.label
            .as_deref()
            .or(self.name.as_deref())
            .or(self.client.as_deref())
            .unwrap_or("llm")
    }

    pub fn params(&self) -> GenerationParams {
        GenerationParams {
            max_tokens: self.max_tokens,
            temperature: self.temperature,
            stop: self.stop.clone(),
        }
    }

    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base_delay: Duration::from_millis(self.backoff_ms),
        }
    }

    pub fn mock_spec(&self) -> Result<MockSpec, ConfigError> {
        self.client
            .as_deref()
            .ok_or_else(|| invalid("llm.client", "required for mock clients"))?
            .parse()
            .map_err(|e: crate::generation::GenerationError| invalid("llm.client", e.to_string()))
    }

    pub fn rate_by_k(&self) -> Result<BTreeMap<usize, f64>, ConfigError> {
        self.corrupt_rate_by_k
            .iter()
            .map(|(k, rate)| {
                let k: usize = k.parse().map_err(|_| {
                    invalid(
                        "llm.corrupt_rate_by_k",
                        format!("key {k:?} is not a demonstration count"),
                    )
                })?;
                if !(0.0..=1.0).contains(rate) {
                    return Err(invalid(
                        "llm.corrupt_rate_by_k",
                        format!("rate {rate} outside [0, 1]"),
                    ));
                }
                Ok((k, *rate))
            })
            .collect()
    }

    /// Whether repeated runs can differ.
    pub fn is_deterministic(&self) -> bool {
        self.kind == LlmKind::Mock || self.temperature == 0.0
    }

    fn validate(&self, field: &str) -> Result<(), ConfigError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(invalid(
                &format!("{field}.temperature"),
                "must be a non-negative number",
            ));
        }
        if self.max_tokens == 0 {
            return Err(invalid(&format!("{field}.max_tokens"), "must be positive"));
        }
        match self.kind {
            LlmKind::Mock => {
                self.mock_spec().map_err(|e| rename_field(e, field))?;
                self.rate_by_k().map_err(|e| rename_field(e, field))?;
            }
            LlmKind::Remote => {
                if self.endpoint.is_none() {
                    return Err(invalid(
                        &format!("{field}.endpoint"),
                        "required for remote LLMs",
                    ));
                }
                if self.name.as_deref().is_none_or(str::is_empty) {
                    return Err(invalid(
                        &format!("{field}.name"),
                        "required for remote LLMs",
                    ));
                }
            }
        }
        Ok(())
    }
}

fn rename_field(e: ConfigError, prefix: &str) -> ConfigError {
    match e {
        ConfigError::Invalid { field, message } => ConfigError::Invalid {
            field: field.replacen("llm", prefix, 1),
            message,
        },
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Random,
    Top,
    Diversity,
    Class,
}

impl fmt::Display for ModeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeName::Random => "random",
            ModeName::Top => "top",
            ModeName::Diversity => "diversity",
            ModeName::Class => "class",
        })
    }
}

/// Where the most similar demonstration sits in the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoOrder {
    #[default]
    MostSimilarFirst,
    MostSimilarLast,
}

fn default_k() -> usize {
    5
}
fn default_gap() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    pub mode: ModeName,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_gap")]
    pub gap: usize,
    #[serde(default)]
    pub demo_order: DemoOrder,
}

fn default_repeats() -> usize {
    1
}
fn default_inflight() -> usize {
    4
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_inflight")]
    pub max_inflight: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            repeats: default_repeats(),
            seeds: Vec::new(),
            max_inflight: default_inflight(),
            output_dir: default_output_dir(),
        }
    }
}

/// Axes of an experiment grid. Missing axes fall back to the single value
/// in the main sections.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<ModeName>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedders: Option<Vec<EmbedderConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llms: Option<Vec<LlmConfig>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    pub data: DataConfig,
    pub embedder: EmbedderConfig,
    pub llm: LlmConfig,
    pub selection: SelectionConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    /// Parses and validates TOML text; relative paths resolve against the
    /// current directory.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<inline>"),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.run.output_dir)
    }

    pub fn task_spec(&self) -> Result<TaskSpec, ConfigError> {
        self.task.task_spec()
    }

    /// Selection spec of a non-sweep config; Random uses `seed`.
    pub fn selection_spec(&self, seed: u64) -> Result<SelectionSpec, ConfigError> {
        let mode = match self.selection.mode {
            ModeName::Random => SelectionMode::Random { seed },
            ModeName::Top => SelectionMode::Top,
            ModeName::Diversity => SelectionMode::Diversity {
                gap: self.selection.gap,
            },
            ModeName::Class => SelectionMode::Class,
        };
        let k = match self.selection.mode {
            ModeName::Class => self.task.label_set.len(),
            _ => self.selection.k,
        };
        SelectionSpec::new(mode, k).map_err(|e| invalid("selection", e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.task_spec()?;
        if self.run.max_inflight == 0 {
            return Err(invalid("run.max_inflight", "must be at least 1"));
        }
        if self.run.repeats == 0 {
            return Err(invalid("run.repeats", "must be at least 1"));
        }
        if let Some(sweep) = &self.sweep {
            for (name, empty) in [
                (
                    "sweep.modes",
                    sweep.modes.as_ref().is_some_and(Vec::is_empty),
                ),
                ("sweep.k", sweep.k.as_ref().is_some_and(Vec::is_empty)),
                ("sweep.gap", sweep.gap.as_ref().is_some_and(Vec::is_empty)),
                (
                    "sweep.embedders",
                    sweep.embedders.as_ref().is_some_and(Vec::is_empty),
                ),
                ("sweep.llms", sweep.llms.as_ref().is_some_and(Vec::is_empty)),
            ] {
                if empty {
                    return Err(invalid(name, "must not be empty"));
                }
            }
            for (i, e) in sweep.embedders.iter().flatten().enumerate() {
                e.validate(&format!("sweep.embedders[{i}]"))?;
            }
            for (i, l) in sweep.llms.iter().flatten().enumerate() {
                l.validate(&format!("sweep.llms[{i}]"))?;
            }
        }
        for cell in self.cells() {
            cell.validate_cell()?;
        }
        Ok(())
    }

    /// Expands the sweep (or the single main configuration) into cells.
    ///
    /// The gap axis only multiplies Diversity cells and the k axis does not
    /// multiply Class cells, whose size is the label count.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let sweep = self.sweep.clone().unwrap_or_default();
        let modes = sweep.modes.unwrap_or_else(|| vec![self.selection.mode]);
        let ks = sweep.k.unwrap_or_else(|| vec![self.selection.k]);
        let gaps = sweep.gap.unwrap_or_else(|| vec![self.selection.gap]);
        let embedders = sweep
            .embedders
            .unwrap_or_else(|| vec![self.embedder.clone()]);
        let llms = sweep.llms.unwrap_or_else(|| vec![self.llm.clone()]);

        let mut cells = Vec::new();
        for embedder in &embedders {
            for llm in &llms {
                for &mode in &modes {
                    let mode_ks: &[usize] = if mode == ModeName::Class {
                        &ks[..1]
                    } else {
                        &ks
                    };
                    let mode_gaps: &[usize] = if mode == ModeName::Diversity {
                        &gaps
                    } else {
                        &gaps[..1]
                    };
                    for &k in mode_ks {
                        for &gap in mode_gaps {
                            let mut cell = self.clone();
                            cell.sweep = None;
                            cell.embedder = embedder.clone();
                            cell.llm = llm.clone();
                            cell.selection.mode = mode;
                            cell.selection.k = k;
                            cell.selection.gap = if mode == ModeName::Diversity {
                                gap
                            } else {
                                default_gap()
                            };
                            cells.push(cell);
                        }
                    }
                }
            }
        }
        cells
    }

    fn validate_cell(&self) -> Result<(), ConfigError> {
        self.embedder.validate("embedder")?;
        self.llm.validate("llm")?;
        let sel = &self.selection;
        if sel.k == 0 {
            return Err(invalid("selection.k", "must be at least 1"));
        }
        match sel.mode {
            ModeName::Diversity if sel.gap == 0 => {
                Err(invalid("selection.gap", "must be at least 1"))
            }
            ModeName::Class if self.task.kind == TaskKind::Ner => Err(invalid(
                "selection.mode",
                "class mode is not available for NER tasks",
            )),
            ModeName::Class if self.task.label_set.is_empty() => {
                Err(invalid("selection.mode", "class mode needs task.label_set"))
            }
            ModeName::Random if self.run.seeds.is_empty() => Err(invalid(
                "run.seeds",
                "random mode needs one seed per repeat",
            )),
            ModeName::Random if self.run.seeds.len() != self.run.repeats => Err(invalid(
                "run.seeds",
                format!(
                    "{} seeds for {} repeats",
                    self.run.seeds.len(),
                    self.run.repeats
                ),
            )),
            _ => Ok(()),
        }
    }

    /// Short stable name of a cell, used for its output directory.
    pub fn cell_label(&self) -> String {
        let mut label = format!("{}-k{}", self.selection.mode, self.effective_k());
        if self.selection.mode == ModeName::Diversity {
            label.push_str(&format!("-gap{}", self.selection.gap));
        }
        label.push('-');
        label.push_str(self.embedder.label());
        label.push('-');
        label.push_str(self.llm.label());
        label
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                    c
                } else {
                    '_'
                }
            })
            .collect()
    }

    /// Demonstration count actually used: the label count for Class Mode.
    pub fn effective_k(&self) -> usize {
        match self.selection.mode {
            ModeName::Class => self.task.label_set.len(),
            _ => self.selection.k,
        }
    }
}

/// Annotated TOML listing every key with its default value.
pub fn config_schema() -> String {
    let params = GenerationParams::default();
    format!(
        r#"# mmrag experiment config. Relative paths resolve against this file's directory.

[task]
kind = "NER"                 # NER | RE | TC (required)
dataset = ""                 # name used in reports
label_set = []               # required for RE/TC and for class mode; empty for NER
# instruction = "..."        # default: a neutral instruction derived from output_format
# output_format = "..."      # single_label | entity_list | triple_list; default: NER entity_list, RE/TC single_label

[data]
train = "train.jsonl"        # required; unified JSONL
test = "test.jsonl"          # required; unified JSONL

[embedder]
kind = "reference"           # reference | remote (required)
name = "{name}"              # remote model name
# label = "..."              # report name; default: name
dims = {dims}                # reference needs >= {min_dims}
# endpoint = "http://..."    # required for remote; POST {{endpoint}}/v1/embeddings
# query_name = "..."         # separate query encoder
batch_size = {batch}
# cache = "cache.jsonl"      # append-only JSONL embedding cache
max_retries = {retries}
backoff_ms = {backoff}

[llm]
kind = "mock"                # mock | remote (required)
client = "mock:oracle"       # mock:oracle | mock:corrupt:<seed>:<rate> | mock:fixed:<text>
# name = "..."               # remote model name
# label = "..."              # report name; default: name, else client
# endpoint = "http://..."    # required for remote; POST {{endpoint}}/v1/chat/completions
max_tokens = {max_tokens}
temperature = {temperature:?}
stop = []
max_retries = {retries}
backoff_ms = {backoff}
# corrupt_rate_by_k = {{ "1" = 0.3, "5" = 0.1 }}   # mock:corrupt rate per demonstration count

[selection]
mode = "top"                 # random | top | diversity | class (required)
k = {k}                      # ignored by class mode (k = number of labels)
gap = {gap}                  # diversity mode rank stride
demo_order = "most_similar_first"   # most_similar_first | most_similar_last

[run]
repeats = {repeats}          # >1 only for random mode or a nondeterministic remote LLM
seeds = []                   # random mode: one seed per repeat
max_inflight = {inflight}
output_dir = "{output_dir}"

# [sweep]                    # optional grid; each axis defaults to the value above
# modes = ["top", "diversity"]
# k = [1, 5, 10]
# gap = [1, 2, 3]            # multiplies diversity cells only
# [[sweep.embedders]]        # full [embedder] tables
# [[sweep.llms]]             # full [llm] tables
"#,
        name = default_embedder_name(),
        dims = default_dims(),
        min_dims = MIN_REFERENCE_DIMS,
        batch = default_batch_size(),
        retries = default_retries(),
        backoff = default_backoff_ms(),
        max_tokens = params.max_tokens,
        temperature = params.temperature,
        k = default_k(),
        gap = default_gap(),
        repeats = default_repeats(),
        inflight = default_inflight(),
        output_dir = default_output_dir().display(),
    )
}
