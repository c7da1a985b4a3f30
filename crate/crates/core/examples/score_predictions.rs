//! Scores raw completions for the three output formats and aggregates
//! repeated runs.

use mmrag::corpus::{Example, OutputFormat, TaskKind, TaskSpec};
use mmrag::evaluation::{aggregate_runs, parse_prediction, score, MetricReport};

fn report(
    task: &TaskSpec,
    golds: &[Example],
    raw: &[&str],
) -> Result<MetricReport, Box<dyn std::error::Error>> {
    let preds: Vec<_> = golds
        .iter()
        .zip(raw)
        .map(|(g, r)| parse_prediction(task, &g.id, r))
        .collect();
    Ok(score(task, &preds, golds)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ner = TaskSpec::new(
        TaskKind::Ner,
        vec![],
        "Extract genes.",
        OutputFormat::EntityList,
    )?;
    let golds = vec![
        Example::new("q1", "BRCA1 and TP53 ...", "BRCA1; TP53"),
        Example::new("q2", "no genes", ""),
        Example::new("q3", "EGFR ...", "EGFR"),
    ];
    // q1: one hit, one miss; q2: one false positive; q3: case matters.
    let r = report(&ner, &golds, &["BRCA1", "KRAS", "egfr"])?;
    println!(
        "NER  tp={} fp={} fn={}  P={:.4} R={:.4} F1={:.4}",
        r.tp, r.fp, r.fn_, r.precision, r.recall, r.f1
    );

    let triples = TaskSpec::new(
        TaskKind::Re,
        vec!["TREATS".into(), "CAUSES".into()],
        "Extract triples.",
        OutputFormat::TripleList,
    )?;
    let golds = vec![Example::new(
        "q1",
        "...",
        "aspirin | TREATS | migraine; aspirin | CAUSES | bleeding",
    )];
    let r = report(
        &triples,
        &golds,
        &[" aspirin | TREATS | migraine ; aspirin | TREATS | bleeding"],
    )?;
    println!("RE   tp={} fp={} fn={}  F1={:.4}", r.tp, r.fp, r.fn_, r.f1);

    let labels = vec![
        "no advice".into(),
        "weak advice".into(),
        "strong advice".into(),
    ];
    let tc = TaskSpec::new(TaskKind::Tc, labels, "Classify.", OutputFormat::SingleLabel)?;
    let golds: Vec<Example> = (0..4)
        .map(|i| Example::new(format!("q{i}"), "...", "weak advice"))
        .collect();
    let runs = [
        report(
            &tc,
            &golds,
            &["weak advice", "weak advice", "strong advice", "weak advice"],
        )?,
        report(
            &tc,
            &golds,
            &["weak advice", "Weak advice", "weak advice", "weak advice"],
        )?,
        report(
            &tc,
            &golds,
            &["weak advice", "weak advice", "weak advice", "weak advice"],
        )?,
    ];
    for (i, r) in runs.iter().enumerate() {
        println!("TC run {}  P=R=F1={:.4}", i + 1, r.f1);
    }
    let agg = aggregate_runs(&runs)?;
    println!(
        "TC mean F1 {:.4} +/- {:.4} over {} runs",
        agg.f1.mean, agg.f1.std, agg.n_runs
    );
    Ok(())
}
