//! Task and dataset model, plus ingestion of the unified JSONL format.
//!
//! One record per line:
//!
//! ```text
//! {"id":"e1","text":"...","gold":"...","class":"ddi-effect"}
//! ```
//!
//! `class` may be `null`. The task description (kind, label set, output
//! format) lives in the experiment config, never in the data file.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line_number}: {message}")]
    MalformedRecord { line_number: usize, message: String },
    #[error("duplicate id {id:?} at line {line_number}")]
    DuplicateId { id: String, line_number: usize },
    #[error("example {id:?} has class {label:?} which is not in the label set")]
    LabelOutsideSet { id: String, label: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("example {id:?} has no class label")]
    MissingClassLabel { id: String },
    #[error("invalid task: {0}")]
    InvalidTask(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "NER")]
    Ner,
    #[serde(rename = "RE")]
    Re,
    #[serde(rename = "TC")]
    Tc,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Ner => "NER",
            TaskKind::Re => "RE",
            TaskKind::Tc => "TC",
        })
    }
}

/// How the gold string of an example is shaped, and therefore how it is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// One label out of the task's label set.
    SingleLabel,
    /// `"; "`-separated entity mentions.
    EntityList,
    /// `"; "`-separated `head | relation | tail` triples.
    TripleList,
}

impl OutputFormat {
    pub fn is_set_extraction(self) -> bool {
        !matches!(self, OutputFormat::SingleLabel)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    #[serde(default)]
    pub label_set: Vec<String>,
    pub instruction: String,
    pub output_format: OutputFormat,
}

impl TaskSpec {
    pub fn new(
        kind: TaskKind,
        label_set: Vec<String>,
        instruction: impl Into<String>,
        output_format: OutputFormat,
    ) -> Result<Self, CorpusError> {
        let task = Self {
            kind,
            label_set,
            instruction: instruction.into(),
            output_format,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        match self.kind {
            TaskKind::Ner if !self.label_set.is_empty() => {
                return Err(CorpusError::InvalidTask(
                    "NER tasks take no label_set".into(),
                ))
            }
            TaskKind::Re | TaskKind::Tc if self.label_set.is_empty() => {
                return Err(CorpusError::InvalidTask(format!(
                    "{} tasks need a non-empty label_set",
                    self.kind
                )))
            }
            _ => {}
        }
        let mut seen = std::collections::HashSet::new();
        for label in &self.label_set {
            if label.is_empty() {
                return Err(CorpusError::InvalidTask("empty label in label_set".into()));
            }
            if !seen.insert(label.as_str()) {
                return Err(CorpusError::InvalidTask(format!(
                    "label {label:?} listed twice"
                )));
            }
        }
        if self.output_format == OutputFormat::SingleLabel && self.label_set.is_empty() {
            return Err(CorpusError::InvalidTask(
                "single_label output needs a label_set".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One labeled record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub text: String,
    pub gold: String,
    #[serde(rename = "class", default, skip_serializing_if = "Option::is_none")]
    pub class_label: Option<String>,
}

impl Example {
    pub fn new(id: impl Into<String>, text: impl Into<String>, gold: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            gold: gold.into(),
            class_label: None,
        }
    }

    pub fn with_class(mut self, label: impl Into<String>) -> Self {
        self.class_label = Some(label.into());
        self
    }
}

/// An immutable, id-indexed list of examples in file order.
#[derive(Debug, Clone)]
pub struct Corpus {
    task: TaskSpec,
    split: Split,
    examples: Vec<Example>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    /// Validates every example against `task` and builds the id index.
    pub fn new(task: TaskSpec, split: Split, examples: Vec<Example>) -> Result<Self, CorpusError> {
        task.validate()?;
        if examples.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut by_id = HashMap::with_capacity(examples.len());
        for (i, example) in examples.iter().enumerate() {
            check_example(&task, example, i + 1)?;
            if by_id.insert(example.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId {
                    id: example.id.clone(),
                    line_number: i + 1,
                });
            }
        }
        Ok(Self {
            task,
            split,
            examples,
            by_id,
        })
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Example> {
        self.by_id.get(id).map(|&i| &self.examples[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Example> {
        self.examples.iter()
    }

    /// Serializes back to the unified JSONL format, one LF-terminated line per example.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for example in &self.examples {
            out.push_str(&serde_json::to_string(example).expect("example serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), CorpusError> {
        let io = |source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = fs::File::create(path).map_err(io)?;
        file.write_all(self.to_jsonl().as_bytes()).map_err(io)
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Example;
    type IntoIter = std::slice::Iter<'a, Example>;

    fn into_iter(self) -> Self::IntoIter {
        self.examples.iter()
    }
}

fn check_example(
    task: &TaskSpec,
    example: &Example,
    line_number: usize,
) -> Result<(), CorpusError> {
    if example.id.is_empty() {
        return Err(CorpusError::MalformedRecord {
            line_number,
            message: "empty id".into(),
        });
    }
    if let Some(label) = &example.class_label {
        if !task.label_set.is_empty() && !task.label_set.contains(label) {
            return Err(CorpusError::LabelOutsideSet {
                id: example.id.clone(),
                label: label.clone(),
            });
        }
    }
    for (field, value) in [("text", &example.text), ("gold", &example.gold)] {
        if value.split('\n').any(|line| line.starts_with("Input: ")) {
            log::warn!(
                "example {:?}: {field} has a line starting with \"Input: \"; prompts built from it are ambiguous",
                example.id
            );
        }
    }
    Ok(())
}

/// Parses unified-format JSONL text. A single trailing newline is allowed;
/// blank lines elsewhere are malformed records.
pub fn parse_corpus(contents: &str, task: TaskSpec, split: Split) -> Result<Corpus, CorpusError> {
    let body = contents.strip_suffix('\n').unwrap_or(contents);
    if body.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut examples = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in body.split('\n').enumerate() {
        let line_number = i + 1;
        let example: Example =
            serde_json::from_str(line).map_err(|e| CorpusError::MalformedRecord {
                line_number,
                message: e.to_string(),
            })?;
        if seen.insert(example.id.clone(), line_number).is_some() {
            return Err(CorpusError::DuplicateId {
                id: example.id,
                line_number,
            });
        }
        examples.push(example);
    }
    Corpus::new(task, split, examples)
}

pub fn load_corpus(path: &Path, task: TaskSpec, split: Split) -> Result<Corpus, CorpusError> {
    let contents = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(&contents, task, split)
}

/// Example ids grouped by class label, keyed in label-set order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPartition {
    buckets: Vec<(String, Vec<String>)>,
}

impl ClassPartition {
    pub fn buckets(&self) -> &[(String, Vec<String>)] {
        &self.buckets
    }

    pub fn get(&self, label: &str) -> Option<&[String]> {
        self.buckets
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, ids)| ids.as_slice())
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }
}

/// Partitions a corpus by class label. Labels of the task's label set that
/// have no examples appear as empty buckets. Without a label set, buckets
/// follow first appearance.
pub fn class_partition(corpus: &Corpus) -> Result<ClassPartition, CorpusError> {
    let mut buckets: Vec<(String, Vec<String>)> = corpus
        .task()
        .label_set
        .iter()
        .map(|l| (l.clone(), Vec::new()))
        .collect();
    for example in corpus {
        let label = example
            .class_label
            .as_ref()
            .ok_or_else(|| CorpusError::MissingClassLabel {
                id: example.id.clone(),
            })?;
        match buckets.iter_mut().find(|(l, _)| l == label) {
            Some((_, ids)) => ids.push(example.id.clone()),
            None => buckets.push((label.clone(), vec![example.id.clone()])),
        }
    }
    Ok(ClassPartition { buckets })
}
