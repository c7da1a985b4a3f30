//! Runs an experiment config end to end with the mock LLM and prints the
//! markdown summary.
//!
//! ```text
//! cargo run -p mmrag --example run_experiment -- [config.toml] [output-dir]
//! ```

use std::path::PathBuf;

use mmrag::report::results_markdown;
use mmrag::{run_experiment, ExperimentConfig, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let config_path = args.next().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/ddi/experiment.toml")
    });
    let output = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("mmrag-run-experiment"));

    let config = ExperimentConfig::load(&config_path)?;
    println!(
        "{} cells in {}",
        config.cells().len(),
        config_path.display()
    );
    let outcome = run_experiment(&config, &output, RunOptions::default())?;
    print!("{}", results_markdown(&outcome.cells));
    println!("\nrecords and tables in {}", outcome.output_dir.display());
    Ok(())
}
