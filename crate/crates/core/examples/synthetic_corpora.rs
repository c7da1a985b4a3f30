//! Writes the seeded synthetic corpora as unified JSONL.
//!
//! ```text
//! cargo run -p mmrag --example synthetic_corpora -- <out-dir> [seed]
//! ```

use std::path::PathBuf;

use mmrag::synthetic;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synthetic".into()));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2024);

    for (dir, data) in [
        ("ddi", synthetic::ddi(seed, 40, 12)),
        ("health_advice", synthetic::health_advice(seed, 30, 10)),
        ("git", synthetic::git(seed, 66, 12)),
        ("gene_ner", synthetic::gene_ner(seed, 30, 10)),
    ] {
        data.write(&out.join(dir))?;
        println!(
            "{:<14} {:>3} train {:>3} test  -> {}",
            data.name,
            data.train.len(),
            data.test.len(),
            out.join(dir).display()
        );
    }
    Ok(())
}
