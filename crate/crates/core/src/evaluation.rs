//! Output parsing and strict exact-match micro precision / recall / F1.
//!
//! A prediction only counts when it equals the gold output byte for byte
//! after trimming outer whitespace; case and inner whitespace matter.
//! Entity and triple lists are `"; "`-separated (a triple is written
//! `head | relation | tail`) and compared as multisets, so a gold mention
//! listed twice has to be predicted twice.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Example, OutputFormat, TaskSpec};

pub const ITEM_SEPARATOR: &str = "; ";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("prediction {index} is for {pred:?} but gold is {gold:?}")]
    AlignmentError {
        index: usize,
        pred: String,
        gold: String,
    },
    #[error("{preds} predictions for {golds} gold examples")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("nothing to score")]
    EmptyInput,
    #[error("runs disagree on query count ({first} vs {other})")]
    ShapeMismatch { first: usize, other: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Label(String),
    Items(Vec<String>),
}

impl Payload {
    /// Payload as a list: a label is a one-item list, a failed label an empty one.
    pub fn as_items(&self) -> Vec<String> {
        match self {
            Payload::Label(l) if l.is_empty() => Vec::new(),
            Payload::Label(l) => vec![l.clone()],
            Payload::Items(items) => items.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub query_id: String,
    pub payload: Payload,
    pub parse_ok: bool,
}

impl Prediction {
    /// Empty, unparsed prediction for a query whose generation failed.
    pub fn failed(query_id: impl Into<String>, format: OutputFormat) -> Self {
        Self {
            query_id: query_id.into(),
            payload: empty_payload(format),
            parse_ok: false,
        }
    }
}

fn empty_payload(format: OutputFormat) -> Payload {
    match format {
        OutputFormat::SingleLabel => Payload::Label(String::new()),
        _ => Payload::Items(Vec::new()),
    }
}

/// Splits a `"; "`-separated list into trimmed, non-empty items.
pub fn parse_items(raw: &str) -> Vec<String> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Vec::new();
    }
    trimmed
        .split(ITEM_SEPARATOR)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn parse_prediction(task: &TaskSpec, query_id: &str, raw: &str) -> Prediction {
    match task.output_format {
        OutputFormat::SingleLabel => {
            let label = raw.trim();
            if task.label_set.iter().any(|l| l == label) {
                Prediction {
                    query_id: query_id.to_string(),
                    payload: Payload::Label(label.to_string()),
                    parse_ok: true,
                }
            } else {
                Prediction::failed(query_id, task.output_format)
            }
        }
        _ => Prediction {
            query_id: query_id.to_string(),
            payload: Payload::Items(parse_items(raw)),
            parse_ok: true,
        },
    }
}

/// tp / fp / fn counts, either for one query or summed over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_queries: usize,
}

impl MetricReport {
    pub fn from_counts(counts: Counts, n_queries: usize) -> Self {
        let (precision, recall, f1) = micro_metrics(counts.tp, counts.fp, counts.fn_);
        Self {
            tp: counts.tp,
            fp: counts.fp,
            fn_: counts.fn_,
            precision,
            recall,
            f1,
            n_queries,
        }
    }
}

/// Micro precision, recall and F1; each is 0 when its denominator is 0.
pub fn micro_metrics(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64) {
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = f1_from(precision, recall);
    (precision, recall, f1)
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision == recall {
        // Exact: 2pp/(2p) can round one ulp away from p.
        precision
    } else if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn check_aligned(preds: &[Prediction], golds: &[Example]) -> Result<(), EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    for (index, (p, g)) in preds.iter().zip(golds).enumerate() {
        if p.query_id != g.id {
            return Err(EvalError::AlignmentError {
                index,
                pred: p.query_id.clone(),
                gold: g.id.clone(),
            });
        }
    }
    Ok(())
}

/// Counts for one classification query: (1,0,0) on an exact match, else (0,1,1).
pub fn classification_counts(pred: &Prediction, gold: &Example) -> Counts {
    let hit = pred.parse_ok && matches!(&pred.payload, Payload::Label(l) if *l == gold.gold.trim());
    if hit {
        Counts {
            tp: 1,
            fp: 0,
            fn_: 0,
        }
    } else {
        Counts {
            tp: 0,
            fp: 1,
            fn_: 1,
        }
    }
}

/// Counts for one extraction query, comparing item multisets.
pub fn extraction_counts(pred: &Prediction, gold: &Example) -> Counts {
    let predicted = if pred.parse_ok {
        pred.payload.as_items()
    } else {
        Vec::new()
    };
    let expected = parse_items(&gold.gold);
    let mut remaining: HashMap<&str, u64> = HashMap::new();
    for item in &expected {
        *remaining.entry(item.as_str()).or_default() += 1;
    }
    let mut tp = 0u64;
    for item in &predicted {
        if let Some(n) = remaining.get_mut(item.as_str()).filter(|n| **n > 0) {
            *n -= 1;
            tp += 1;
        }
    }
    Counts {
        tp,
        fp: predicted.len() as u64 - tp,
        fn_: expected.len() as u64 - tp,
    }
}

pub fn score_classification(
    preds: &[Prediction],
    golds: &[Example],
) -> Result<MetricReport, EvalError> {
    check_aligned(preds, golds)?;
    let counts = preds
        .iter()
        .zip(golds)
        .map(|(p, g)| classification_counts(p, g))
        .fold(Counts::default(), |a, b| a + b);
    Ok(MetricReport::from_counts(counts, preds.len()))
}

pub fn score_set_extraction(
    preds: &[Prediction],
    golds: &[Example],
) -> Result<MetricReport, EvalError> {
    check_aligned(preds, golds)?;
    let counts = preds
        .iter()
        .zip(golds)
        .map(|(p, g)| extraction_counts(p, g))
        .fold(Counts::default(), |a, b| a + b);
    Ok(MetricReport::from_counts(counts, preds.len()))
}

/// Scores with the rule that fits the task's output format.
pub fn score(
    task: &TaskSpec,
    preds: &[Prediction],
    golds: &[Example],
) -> Result<MetricReport, EvalError> {
    match task.output_format {
        OutputFormat::SingleLabel => score_classification(preds, golds),
        _ => score_set_extraction(preds, golds),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample (n-1) standard deviation. One value gives std 0.
    /// Identical values give exactly that value and exactly 0.
    pub fn of(values: &[f64]) -> Option<Self> {
        let first = *values.first()?;
        let n = values.len() as f64;
        // Shifting by the first value keeps identical runs exact.
        let mean_shift = values.iter().map(|v| v - first).sum::<f64>() / n;
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(*v), hi.max(*v))
            });
        let mean = (first + mean_shift).clamp(lo, hi);
        let std = if values.len() < 2 {
            0.0
        } else {
            let ss: f64 = values
                .iter()
                .map(|v| (v - first - mean_shift).powi(2))
                .sum();
            (ss / (n - 1.0)).sqrt()
        };
        Some(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub n_runs: usize,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    /// Set when only one run was aggregated, so std is 0 by convention.
    pub single_run: bool,
    pub runs: Vec<MetricReport>,
}

pub fn aggregate_runs(reports: &[MetricReport]) -> Result<AggregateReport, EvalError> {
    let first = reports.first().ok_or(EvalError::EmptyInput)?;
    if let Some(other) = reports.iter().find(|r| r.n_queries != first.n_queries) {
        return Err(EvalError::ShapeMismatch {
            first: first.n_queries,
            other: other.n_queries,
        });
    }
    let column = |f: fn(&MetricReport) -> f64| {
        MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>()).expect("non-empty")
    };
    Ok(AggregateReport {
        n_runs: reports.len(),
        precision: column(|r| r.precision),
        recall: column(|r| r.recall),
        f1: column(|r| r.f1),
        single_run: reports.len() == 1,
        runs: reports.to_vec(),
    })
}
