//! Assembles a few-shot prompt for gene mention extraction.

use mmrag::corpus::{Example, OutputFormat};
use mmrag::prompt::{build_prompt, default_instruction, PromptTemplate};
use mmrag::selection::Demonstrations;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let template = PromptTemplate::new(default_instruction(OutputFormat::EntityList, &[]));
    let demos = Demonstrations::new(vec![
        Example::new(
            "d1",
            "Mutations in BRCA1 and TP53 were found.",
            "BRCA1; TP53",
        ),
        Example::new("d2", "Patients with asthma were enrolled.", ""),
    ])?;

    println!("--- zero-shot ---");
    println!(
        "{}",
        build_prompt(
            &template,
            &Demonstrations::empty(),
            "Expression of EGFR was elevated."
        )
    );
    println!("--- two demonstrations ---");
    println!(
        "{}",
        build_prompt(&template, &demos, "Expression of EGFR was elevated.")
    );
    Ok(())
}
