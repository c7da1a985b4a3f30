//! Sweeps k and the diversity gap over a synthetic corpus with a mock LLM
//! whose error rate shrinks as k grows, then prints the plot data.

use std::collections::BTreeMap;

use mmrag::config::{
    DataConfig, EmbedderConfig, LlmConfig, ModeName, RunConfig, SelectionConfig, SweepConfig,
    TaskConfig,
};
use mmrag::report::plotdata_csv;
use mmrag::{run_experiment, synthetic, ExperimentConfig, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("mmrag-diversity-sweep");
    let data = synthetic::health_advice(5, 60, 20);
    data.write(&dir)?;

    let mut llm = LlmConfig::mock("mock:corrupt:3:0.5");
    llm.label = Some("mock".into());
    llm.corrupt_rate_by_k =
        BTreeMap::from([("1".into(), 0.5), ("3".into(), 0.3), ("5".into(), 0.1)]);

    let config = ExperimentConfig {
        task: TaskConfig {
            kind: data.task.kind,
            dataset: data.name.clone(),
            label_set: data.task.label_set.clone(),
            instruction: None,
            output_format: None,
        },
        data: DataConfig {
            train: "train.jsonl".into(),
            test: "test.jsonl".into(),
        },
        embedder: EmbedderConfig::reference(128),
        llm,
        selection: SelectionConfig {
            mode: ModeName::Diversity,
            k: 1,
            gap: 1,
            demo_order: Default::default(),
        },
        run: RunConfig::default(),
        sweep: Some(SweepConfig {
            modes: Some(vec![ModeName::Top, ModeName::Diversity]),
            k: Some(vec![1, 3, 5]),
            gap: Some(vec![1, 2, 4]),
            ..Default::default()
        }),
        base_dir: dir.clone(),
    };
    config.validate()?;

    let outcome = run_experiment(&config, &dir.join("results"), RunOptions::default())?;
    for line in plotdata_csv(&outcome.cells)
        .lines()
        .filter(|l| l.contains(",f1,") || l.starts_with("task"))
    {
        println!("{line}");
    }
    Ok(())
}
