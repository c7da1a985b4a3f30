//! Result tables: CSV, a markdown summary and plot data.
//!
//! All outputs are pure functions of the cell summaries, so they are
//! reproducible whenever the summaries are.

use std::path::Path;

use crate::config::ModeName;
use crate::evaluation::MeanStd;
use crate::runner::{write_file, CellSummary, RunError};

pub const RESULTS_HEADER: [&str; 13] = [
    "task",
    "dataset",
    "model",
    "retriever",
    "mode",
    "k",
    "gap",
    "seed",
    "repeat",
    "precision",
    "recall",
    "f1",
    "n_queries",
];

pub const PLOTDATA_HEADER: [&str; 11] = [
    "task",
    "dataset",
    "mode",
    "k",
    "gap",
    "retriever",
    "model",
    "metric",
    "mean",
    "std",
    "n_runs",
];

fn fixed4(x: f64) -> String {
    format!("{x:.4}")
}

fn gap_field(cell: &CellSummary) -> String {
    cell.gap.map(|g| g.to_string()).unwrap_or_default()
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn prefix(cell: &CellSummary) -> Vec<String> {
    vec![
        cell.task.to_string(),
        cell.dataset.clone(),
        cell.model.clone(),
        cell.retriever.clone(),
        cell.mode.to_string(),
        cell.k.to_string(),
        gap_field(cell),
    ]
}

/// One row per cell with metrics averaged over its runs. `repeat` is the
/// run count and `seed` lists the Random Mode seeds, `;`-separated.
pub fn results_csv(cells: &[CellSummary]) -> String {
    let rows = cells
        .iter()
        .map(|cell| {
            let seeds: Vec<String> = cell
                .runs
                .iter()
                .filter_map(|r| r.seed)
                .map(|s| s.to_string())
                .collect();
            let mut row = prefix(cell);
            row.extend([
                seeds.join(";"),
                cell.aggregate.n_runs.to_string(),
                fixed4(cell.aggregate.precision.mean),
                fixed4(cell.aggregate.recall.mean),
                fixed4(cell.aggregate.f1.mean),
                cell.runs
                    .first()
                    .map(|r| r.metrics.n_queries)
                    .unwrap_or(0)
                    .to_string(),
            ]);
            row
        })
        .collect();
    csv_string(&RESULTS_HEADER, rows)
}

/// One row per run.
pub fn runs_csv(cells: &[CellSummary]) -> String {
    let rows = cells
        .iter()
        .flat_map(|cell| {
            cell.runs.iter().map(move |run| {
                let mut row = prefix(cell);
                row.extend([
                    run.seed.map(|s| s.to_string()).unwrap_or_default(),
                    run.repeat.to_string(),
                    fixed4(run.metrics.precision),
                    fixed4(run.metrics.recall),
                    fixed4(run.metrics.f1),
                    run.metrics.n_queries.to_string(),
                ]);
                row
            })
        })
        .collect();
    csv_string(&RESULTS_HEADER, rows)
}

/// One row per (mode, k, gap, retriever, model, metric).
pub fn plotdata_csv(cells: &[CellSummary]) -> String {
    let rows = cells
        .iter()
        .flat_map(|cell| {
            let a = &cell.aggregate;
            [
                ("precision", a.precision),
                ("recall", a.recall),
                ("f1", a.f1),
            ]
            .into_iter()
            .map(move |(metric, ms)| {
                vec![
                    cell.task.to_string(),
                    cell.dataset.clone(),
                    cell.mode.to_string(),
                    cell.k.to_string(),
                    gap_field(cell),
                    cell.retriever.clone(),
                    cell.model.clone(),
                    metric.to_string(),
                    format!("{}", ms.mean),
                    format!("{}", ms.std),
                    a.n_runs.to_string(),
                ]
            })
        })
        .collect();
    csv_string(&PLOTDATA_HEADER, rows)
}

fn cell_metric(ms: MeanStd, n_runs: usize) -> String {
    if n_runs > 1 {
        format!("{} ± {}", fixed4(ms.mean), fixed4(ms.std))
    } else {
        fixed4(ms.mean)
    }
}

/// Markdown table with one P/R/F1 column group per model.
pub fn results_markdown(cells: &[CellSummary]) -> String {
    let mut models: Vec<&str> = Vec::new();
    type RowKey<'a> = (String, &'a str, &'a str, ModeName, usize, Option<usize>);
    let mut rows: Vec<(RowKey<'_>, Vec<&CellSummary>)> = Vec::new();
    for cell in cells {
        if !models.contains(&cell.model.as_str()) {
            models.push(&cell.model);
        }
        let key = (
            cell.task.to_string(),
            cell.dataset.as_str(),
            cell.retriever.as_str(),
            cell.mode,
            cell.k,
            cell.gap,
        );
        match rows.iter_mut().find(|(k, _)| *k == key) {
            Some((_, group)) => group.push(cell),
            None => rows.push((key, vec![cell])),
        }
    }

    let mut out = String::from("| Task | Dataset | Retriever | Mode | k | gap |");
    for m in &models {
        out.push_str(&format!(" {m} P | {m} R | {m} F1 |"));
    }
    out.push_str("\n|---|---|---|---|---:|---:|");
    for _ in &models {
        out.push_str("---:|---:|---:|");
    }
    out.push('\n');
    for ((task, dataset, retriever, mode, k, gap), group) in &rows {
        let gap = gap.map(|g| g.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "| {task} | {dataset} | {retriever} | {mode} | {k} | {gap} |"
        ));
        for m in &models {
            match group.iter().find(|c| c.model == *m) {
                Some(c) => {
                    let a = &c.aggregate;
                    out.push_str(&format!(
                        " {} | {} | {} |",
                        cell_metric(a.precision, a.n_runs),
                        cell_metric(a.recall, a.n_runs),
                        cell_metric(a.f1, a.n_runs)
                    ));
                }
                None => out.push_str("  |  |  |"),
            }
        }
        out.push('\n');
    }

    let failures: Vec<String> = cells
        .iter()
        .flat_map(|c| c.runs.iter())
        .filter(|r| !r.failed_queries.is_empty())
        .map(|r| format!("- {}: {}", r.dir, r.failed_queries.join(", ")))
        .collect();
    if !failures.is_empty() {
        out.push_str("\nFailed generations (scored as wrong):\n\n");
        for line in failures {
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

/// Writes `results.csv`, `runs.csv`, `results.md` and `plotdata.csv`.
pub fn write_reports(output_dir: &Path, cells: &[CellSummary]) -> Result<(), RunError> {
    write_file(&output_dir.join("results.csv"), &results_csv(cells))?;
    write_file(&output_dir.join("runs.csv"), &runs_csv(cells))?;
    write_file(&output_dir.join("results.md"), &results_markdown(cells))?;
    write_file(&output_dir.join("plotdata.csv"), &plotdata_csv(cells))?;
    Ok(())
}
