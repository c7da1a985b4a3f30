//! Few-shot prompt assembly.
//!
//! Layout, byte for byte:
//!
//! ```text
//! {instruction}
//!
//! Input: {demo text}
//! Output: {demo gold}
//!
//! Input: {query text}
//! Output:
//! ```
//!
//! With no demonstrations this is a zero-shot prompt. The layout is only
//! unambiguous if no demo text or gold has a line starting with `Input: `;
//! corpus loading warns about such records.

use serde::{Deserialize, Serialize};

use crate::corpus::{OutputFormat, TaskSpec};
use crate::selection::Demonstrations;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub instruction: String,
}

impl PromptTemplate {
    pub fn new(instruction: impl Into<String>) -> Self {
        Self {
            instruction: instruction.into(),
        }
    }

    pub fn for_task(task: &TaskSpec) -> Self {
        Self::new(task.instruction.clone())
    }
}

pub fn build_prompt(template: &PromptTemplate, demos: &Demonstrations, query_text: &str) -> String {
    let demo_bytes: usize = demos
        .examples()
        .iter()
        .map(|e| e.text.len() + e.gold.len() + 18)
        .sum();
    let mut prompt =
        String::with_capacity(template.instruction.len() + demo_bytes + query_text.len() + 16);
    prompt.push_str(&template.instruction);
    prompt.push_str("\n\n");
    for demo in demos.examples() {
        prompt.push_str("Input: ");
        prompt.push_str(&demo.text);
        prompt.push_str("\nOutput: ");
        prompt.push_str(&demo.gold);
        prompt.push_str("\n\n");
    }
    prompt.push_str("Input: ");
    prompt.push_str(query_text);
    prompt.push_str("\nOutput:");
    prompt
}

/// Neutral instruction used when the config does not supply one.
pub fn default_instruction(format: OutputFormat, label_set: &[String]) -> String {
    match format {
        OutputFormat::SingleLabel => format!(
            "Classify the input. Answer with exactly one of: {}.",
            label_set.join(", ")
        ),
        OutputFormat::EntityList => {
            "Extract every entity mention from the input. Answer with the mentions separated by \"; \", or nothing if there are none.".to_string()
        }
        OutputFormat::TripleList => format!(
            "Extract every relation triple from the input as \"head | relation | tail\", separated by \"; \". Relations: {}.",
            label_set.join(", ")
        ),
    }
}
