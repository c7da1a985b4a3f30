//! Similarity ranking and the four demonstration selection modes.
//!
//! | mode      | picks                                                     | order          |
//! |-----------|-----------------------------------------------------------|----------------|
//! | Random    | k examples drawn without replacement, ignores similarity  | draw order     |
//! | Top       | ranks `0..k`                                              | rank order     |
//! | Diversity | ranks `0, gap, 2*gap, .., (k-1)*gap`                      | rank order     |
//! | Class     | the best-ranked example of every label in the label set   | label-set order|
//!
//! Diversity with `gap = 1` is Top, and every Diversity selection starts
//! with the most similar example.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Example};
use crate::embedding::{cosine, EmbeddedCorpus, EmbeddingVector};
use crate::rng::shuffled_prefix;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SelectionError {
    #[error("dimension mismatch: corpus has {expected}, query has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("k = {k} exceeds the {n} available examples")]
    KTooLarge { k: usize, n: usize },
    #[error("diversity selection needs {needed} ranked examples, have {have}")]
    InsufficientCorpus { needed: usize, have: usize },
    #[error("no training example has class {label:?}")]
    EmptyClass { label: String },
    #[error("training example {id:?} has no class label")]
    MissingClassLabel { id: String },
    #[error("class mode needs a task with a label set")]
    NoLabelSet,
    #[error("ranked example {0:?} is not in the training corpus")]
    UnknownExample(String),
    #[error("invalid selection: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub example_id: String,
    pub score: f64,
}

/// Full ordering of a training corpus against one query: scores
/// non-increasing, ties broken by ascending example id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.example_id.as_str())
    }

    /// `rank<TAB>id<TAB>score` lines, scores with six decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (rank, entry) in self.entries.iter().enumerate() {
            out.push_str(&format!(
                "{rank}\t{}\t{:.6}\n",
                entry.example_id, entry.score
            ));
        }
        out
    }
}

pub fn rank(
    embedded_train: &EmbeddedCorpus,
    query_vector: &EmbeddingVector,
    query_id: &str,
) -> Result<RankedList, SelectionError> {
    if embedded_train.is_empty() {
        return Err(SelectionError::EmptyCorpus);
    }
    if embedded_train.dims != query_vector.dims() {
        return Err(SelectionError::DimensionMismatch {
            expected: embedded_train.dims,
            got: query_vector.dims(),
        });
    }
    let mut entries: Vec<RankedEntry> = embedded_train
        .iter()
        .map(|(id, v)| RankedEntry {
            example_id: id.to_string(),
            score: cosine(v, query_vector).expect("dims checked above"),
        })
        .collect();
    entries.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("cosine scores are finite")
            .then_with(|| a.example_id.cmp(&b.example_id))
    });
    Ok(RankedList {
        query_id: query_id.to_string(),
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SelectionMode {
    Random { seed: u64 },
    Top,
    Diversity { gap: usize },
    Class,
}

impl SelectionMode {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionMode::Random { .. } => "random",
            SelectionMode::Top => "top",
            SelectionMode::Diversity { .. } => "diversity",
            SelectionMode::Class => "class",
        }
    }

    pub fn needs_ranking(&self) -> bool {
        !matches!(self, SelectionMode::Random { .. })
    }
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionMode::Random { seed } => write!(f, "random(seed={seed})"),
            SelectionMode::Diversity { gap } => write!(f, "diversity(gap={gap})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Mode plus demonstration count. `k` is ignored by Class Mode, which picks
/// one example per label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SelectionSpec {
    pub mode: SelectionMode,
    pub k: usize,
}

impl SelectionSpec {
    pub fn new(mode: SelectionMode, k: usize) -> Result<Self, SelectionError> {
        if k == 0 {
            return Err(SelectionError::InvalidSpec("k must be at least 1".into()));
        }
        if let SelectionMode::Diversity { gap: 0 } = mode {
            return Err(SelectionError::InvalidSpec("gap must be at least 1".into()));
        }
        Ok(Self { mode, k })
    }
}

/// Chosen in-context examples, in prompt order, without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Demonstrations(Vec<Example>);

impl Demonstrations {
    pub fn new(examples: Vec<Example>) -> Result<Self, SelectionError> {
        let mut seen = HashSet::new();
        for e in &examples {
            if !seen.insert(e.id.as_str()) {
                return Err(SelectionError::InvalidSpec(format!(
                    "example {:?} selected twice",
                    e.id
                )));
            }
        }
        Ok(Self(examples))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn examples(&self) -> &[Example] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.0.iter().map(|e| e.id.as_str()).collect()
    }

    pub fn reversed(mut self) -> Self {
        self.0.reverse();
        self
    }

    pub fn into_inner(self) -> Vec<Example> {
        self.0
    }
}

fn lookup(train: &Corpus, id: &str) -> Result<Example, SelectionError> {
    train
        .get(id)
        .cloned()
        .ok_or_else(|| SelectionError::UnknownExample(id.to_string()))
}

fn from_ranks(
    ranked: &RankedList,
    train: &Corpus,
    ranks: impl Iterator<Item = usize>,
) -> Result<Demonstrations, SelectionError> {
    let examples = ranks
        .map(|r| lookup(train, &ranked.entries[r].example_id))
        .collect::<Result<Vec<_>, _>>()?;
    Demonstrations::new(examples)
}

/// k examples drawn uniformly without replacement with a seeded Fisher-Yates prefix.
pub fn select_random(
    train: &Corpus,
    k: usize,
    seed: u64,
) -> Result<Demonstrations, SelectionError> {
    let n = train.len();
    if k > n {
        return Err(SelectionError::KTooLarge { k, n });
    }
    let examples = shuffled_prefix(n, k, seed)
        .into_iter()
        .map(|i| train.examples()[i].clone())
        .collect();
    Demonstrations::new(examples)
}

pub fn select_top(
    ranked: &RankedList,
    train: &Corpus,
    k: usize,
) -> Result<Demonstrations, SelectionError> {
    if k > ranked.len() {
        return Err(SelectionError::KTooLarge { k, n: ranked.len() });
    }
    from_ranks(ranked, train, 0..k)
}

pub fn select_diversity(
    ranked: &RankedList,
    train: &Corpus,
    k: usize,
    gap: usize,
) -> Result<Demonstrations, SelectionError> {
    if gap == 0 {
        return Err(SelectionError::InvalidSpec("gap must be at least 1".into()));
    }
    if k == 0 {
        return Ok(Demonstrations::empty());
    }
    let needed = (k - 1)
        .checked_mul(gap)
        .and_then(|last| last.checked_add(1))
        .ok_or(SelectionError::InsufficientCorpus {
            needed: usize::MAX,
            have: ranked.len(),
        })?;
    if needed > ranked.len() {
        return Err(SelectionError::InsufficientCorpus {
            needed,
            have: ranked.len(),
        });
    }
    from_ranks(ranked, train, (0..k).map(|i| i * gap))
}

/// Best-ranked example of each label, in `label_set` order.
pub fn select_class(
    ranked: &RankedList,
    train: &Corpus,
    label_set: &[String],
) -> Result<Demonstrations, SelectionError> {
    if label_set.is_empty() {
        return Err(SelectionError::NoLabelSet);
    }
    if let Some(e) = train.iter().find(|e| e.class_label.is_none()) {
        return Err(SelectionError::MissingClassLabel { id: e.id.clone() });
    }
    let mut chosen: Vec<Option<Example>> = vec![None; label_set.len()];
    let mut remaining = label_set.len();
    for entry in &ranked.entries {
        let example = train
            .get(&entry.example_id)
            .ok_or_else(|| SelectionError::UnknownExample(entry.example_id.clone()))?;
        let label = example.class_label.as_deref().expect("checked above");
        if let Some(slot) = label_set.iter().position(|l| l == label) {
            if chosen[slot].is_none() {
                chosen[slot] = Some(example.clone());
                remaining -= 1;
                if remaining == 0 {
                    break;
                }
            }
        }
    }
    let examples = chosen
        .into_iter()
        .zip(label_set)
        .map(|(c, label)| {
            c.ok_or_else(|| SelectionError::EmptyClass {
                label: label.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Demonstrations::new(examples)
}

/// Dispatches on `spec.mode`. `ranked` is required for every mode but Random.
pub fn select(
    spec: &SelectionSpec,
    train: &Corpus,
    ranked: Option<&RankedList>,
) -> Result<Demonstrations, SelectionError> {
    let need_ranked = || {
        ranked.ok_or_else(|| {
            SelectionError::InvalidSpec(format!("{} mode needs a ranked list", spec.mode.name()))
        })
    };
    match spec.mode {
        SelectionMode::Random { seed } => select_random(train, spec.k, seed),
        SelectionMode::Top => select_top(need_ranked()?, train, spec.k),
        SelectionMode::Diversity { gap } => select_diversity(need_ranked()?, train, spec.k, gap),
        SelectionMode::Class => select_class(need_ranked()?, train, &train.task().label_set),
    }
}
