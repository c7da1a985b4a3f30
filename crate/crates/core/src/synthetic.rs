//! Small seeded corpora shaped like the biomedical benchmarks, for tests,
//! examples and offline smoke runs. Same seed, same bytes.
//!
//! Sentences are stitched from label-specific phrases and shared filler so
//! that similarity-based selection has something to find.

use std::path::Path;

use crate::corpus::{Corpus, CorpusError, Example, OutputFormat, Split, TaskKind, TaskSpec};
use crate::prompt::default_instruction;
use crate::rng::SplitMix64;

pub const DDI_LABELS: [&str; 4] = ["ddi-mechanism", "ddi-effect", "ddi-advise", "ddi-int"];

pub const HEALTH_ADVICE_LABELS: [&str; 3] = ["no advice", "weak advice", "strong advice"];

pub const GIT_RELATIONS: [&str; 22] = [
    "ADMINISTERED_TO",
    "AFFECTS",
    "ASSOCIATED_WITH",
    "AUGMENTS",
    "CAUSES",
    "COEXISTS_WITH",
    "COMPLICATES",
    "DIAGNOSES",
    "DISRUPTS",
    "INHIBITS",
    "INTERACTS_WITH",
    "ISA",
    "LOCATION_OF",
    "MANIFESTATION_OF",
    "PART_OF",
    "PRECEDES",
    "PREDISPOSES",
    "PREVENTS",
    "PROCESS_OF",
    "PRODUCES",
    "STIMULATES",
    "TREATS",
];

const DRUGS: [&str; 12] = [
    "warfarin",
    "aspirin",
    "ketoconazole",
    "simvastatin",
    "digoxin",
    "amiodarone",
    "rifampin",
    "fluoxetine",
    "methotrexate",
    "lithium",
    "clarithromycin",
    "cyclosporine",
];

const GENES: [&str; 12] = [
    "BRCA1", "TP53", "EGFR", "KRAS", "MDM2", "PTEN", "MYC", "CDK4", "ERBB2", "APOE", "IL6", "TNF",
];

const DISEASES: [&str; 10] = [
    "hypertension",
    "asthma",
    "melanoma",
    "diabetes",
    "psoriasis",
    "anemia",
    "migraine",
    "sepsis",
    "glaucoma",
    "arthritis",
];

const FILLER: [&str; 10] = [
    "in adult patients",
    "during the trial",
    "in a cohort study",
    "at therapeutic doses",
    "according to the label",
    "in vitro",
    "after four weeks",
    "in elderly subjects",
    "in the treated group",
    "at baseline",
];

/// Train and test splits of one task.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub task: TaskSpec,
    pub train: Corpus,
    pub test: Corpus,
}

impl Dataset {
    /// Writes `train.jsonl` and `test.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), CorpusError> {
        std::fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        self.train.write_jsonl(&dir.join("train.jsonl"))?;
        self.test.write_jsonl(&dir.join("test.jsonl"))
    }
}

fn pick<'a>(rng: &mut SplitMix64, items: &[&'a str]) -> &'a str {
    items[rng.below(items.len() as u64) as usize]
}

fn label_sequence(rng: &mut SplitMix64, n_labels: usize, n: usize) -> Vec<usize> {
    // Every label occurs at least once when n allows it.
    (0..n)
        .map(|i| {
            if i < n_labels {
                i
            } else {
                rng.below(n_labels as u64) as usize
            }
        })
        .collect()
}

fn build(
    name: &str,
    task: TaskSpec,
    seed: u64,
    n_train: usize,
    n_test: usize,
    mut make: impl FnMut(&mut SplitMix64, usize) -> (String, String, Option<String>),
) -> Dataset {
    let mut rng = SplitMix64::new(seed);
    let n_labels = task.label_set.len().max(1);
    let mut split = |split: Split, prefix: &str, n: usize| {
        let labels = label_sequence(&mut rng, n_labels, n);
        let examples = labels
            .into_iter()
            .enumerate()
            .map(|(i, label)| {
                let (text, gold, class) = make(&mut rng, label);
                let e = Example::new(format!("{prefix}-{:04}", i + 1), text, gold);
                match class {
                    Some(c) => e.with_class(c),
                    None => e,
                }
            })
            .collect();
        Corpus::new(task.clone(), split, examples).expect("generated corpus is valid")
    };
    let train = split(Split::Train, "train", n_train);
    let test = split(Split::Test, "test", n_test);
    Dataset {
        name: name.to_string(),
        task,
        train,
        test,
    }
}

fn labels(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn classification_task(kind: TaskKind, label_set: Vec<String>) -> TaskSpec {
    let instruction = default_instruction(OutputFormat::SingleLabel, &label_set);
    TaskSpec::new(kind, label_set, instruction, OutputFormat::SingleLabel).expect("valid task")
}

/// Drug-drug interaction classification, four labels.
pub fn ddi(seed: u64, n_train: usize, n_test: usize) -> Dataset {
    const CUES: [[&str; 3]; 4] = [
        [
            "increases the plasma concentration of",
            "inhibits the metabolism of",
            "reduces the clearance of",
        ],
        [
            "may potentiate the effect of",
            "enhances the toxicity of",
            "can increase the risk of bleeding with",
        ],
        [
            "should not be coadministered with",
            "requires dose adjustment of",
            "is contraindicated with",
        ],
        [
            "interacts with",
            "has a reported interaction with",
            "was noted to interact with",
        ],
    ];
    let task = classification_task(TaskKind::Re, labels(&DDI_LABELS));
    build("DDI", task, seed, n_train, n_test, |rng, l| {
        let a = pick(rng, &DRUGS);
        let b = pick(rng, &DRUGS);
        let text = format!("{a} {} {b} {}.", pick(rng, &CUES[l]), pick(rng, &FILLER));
        (
            text,
            DDI_LABELS[l].to_string(),
            Some(DDI_LABELS[l].to_string()),
        )
    })
}

/// Strength of health advice in a sentence, three labels.
pub fn health_advice(seed: u64, n_train: usize, n_test: usize) -> Dataset {
    const CUES: [[&str; 3]; 3] = [
        [
            "was associated with",
            "was observed together with",
            "correlated with",
        ],
        [
            "may help reduce",
            "could be considered for",
            "might lower the risk of",
        ],
        [
            "should be used to treat",
            "is recommended for all patients with",
            "must be started for",
        ],
    ];
    let task = classification_task(TaskKind::Tc, labels(&HEALTH_ADVICE_LABELS));
    build("HealthAdvice", task, seed, n_train, n_test, |rng, l| {
        let text = format!(
            "{} {} {} {}.",
            pick(rng, &DRUGS),
            pick(rng, &CUES[l]),
            pick(rng, &DISEASES),
            pick(rng, &FILLER)
        );
        (
            text,
            HEALTH_ADVICE_LABELS[l].to_string(),
            Some(HEALTH_ADVICE_LABELS[l].to_string()),
        )
    })
}

/// Triple extraction over 22 relations. The class label is the relation
/// of the first gold triple.
pub fn git(seed: u64, n_train: usize, n_test: usize) -> Dataset {
    let relations = labels(&GIT_RELATIONS);
    let instruction = default_instruction(OutputFormat::TripleList, &relations);
    let task = TaskSpec::new(
        TaskKind::Re,
        relations,
        instruction,
        OutputFormat::TripleList,
    )
    .expect("valid task");
    build("GIT", task, seed, n_train, n_test, |rng, l| {
        let rel = GIT_RELATIONS[l];
        let head = pick(rng, &DRUGS);
        let tail = pick(rng, &DISEASES);
        let verb = rel.to_lowercase().replace('_', " ");
        let mut text = format!("{head} {verb} {tail} {}.", pick(rng, &FILLER));
        let mut gold = format!("{head} | {rel} | {tail}");
        if rng.below(3) == 0 {
            let rel2 = pick(rng, &GIT_RELATIONS);
            let gene = pick(rng, &GENES);
            text.push_str(&format!(
                " {gene} {} {tail}.",
                rel2.to_lowercase().replace('_', " ")
            ));
            gold.push_str(&format!("; {gene} | {rel2} | {tail}"));
        }
        (text, gold, Some(rel.to_string()))
    })
}

/// Gene mention recognition. Some sentences mention no gene.
pub fn gene_ner(seed: u64, n_train: usize, n_test: usize) -> Dataset {
    const FRAMES: [&str; 4] = [
        "Mutations in {} were found in tumour samples",
        "Expression of {} was elevated",
        "The {} pathway was activated",
        "Loss of {} predicted poor survival",
    ];
    let instruction = default_instruction(OutputFormat::EntityList, &[]);
    let task = TaskSpec::new(TaskKind::Ner, vec![], instruction, OutputFormat::EntityList)
        .expect("valid task");
    build("GeneNER", task, seed, n_train, n_test, |rng, _| {
        let n_genes = rng.below(3) as usize;
        if n_genes == 0 {
            let text = format!(
                "Patients with {} were enrolled {}.",
                pick(rng, &DISEASES),
                pick(rng, &FILLER)
            );
            return (text, String::new(), None);
        }
        let genes: Vec<&str> = (0..n_genes).map(|_| pick(rng, &GENES)).collect();
        let text = genes
            .iter()
            .map(|g| pick(rng, &FRAMES).replace("{}", g))
            .collect::<Vec<_>>()
            .join(" and ")
            + &format!(" {}.", pick(rng, &FILLER));
        (text, genes.join("; "), None)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::class_partition;

    #[test]
    fn same_seed_same_bytes() {
        assert_eq!(
            ddi(3, 20, 5).train.to_jsonl(),
            ddi(3, 20, 5).train.to_jsonl()
        );
        assert_ne!(
            ddi(3, 20, 5).train.to_jsonl(),
            ddi(4, 20, 5).train.to_jsonl()
        );
    }

    #[test]
    fn every_class_is_populated() {
        for d in [ddi(1, 30, 5), health_advice(1, 30, 5), git(1, 30, 5)] {
            let partition = class_partition(&d.train).unwrap();
            assert_eq!(partition.len(), d.task.label_set.len());
            assert!(
                partition.buckets().iter().all(|(_, ids)| !ids.is_empty()),
                "{}",
                d.name
            );
        }
    }

    #[test]
    fn git_gold_uses_triple_syntax() {
        let d = git(9, 40, 10);
        for e in d.train.iter() {
            for triple in e.gold.split("; ") {
                assert_eq!(triple.split(" | ").count(), 3, "{triple}");
            }
        }
    }

    #[test]
    fn ner_has_empty_golds() {
        let d = gene_ner(2, 60, 10);
        assert!(d.train.iter().any(|e| e.gold.is_empty()));
        assert!(d.train.iter().any(|e| e.gold.contains("; ")));
    }
}
