use std::path::Path;

use serde::{Deserialize, Serialize};

const TEMPLATE: &str = include_str!("../../assets/prompt_template.txt");
const ONE_SHOT: &str = include_str!("../../fixtures/one_shot.merge");

/// The fixed generation prompt sent to a remote generator. It embeds a
/// one-shot example and ends inside an open code block right after the
/// strategy-comment prefix, so completions start by describing a strategy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub text: String,
}

impl PromptTemplate {
    /// Fills `{one_shot}` in `template` with `one_shot`.
    pub fn from_parts(template: &str, one_shot: &str) -> Self {
        Self {
            text: template.replace("{one_shot}", one_shot.trim_end()),
        }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let template = std::fs::read_to_string(path)?;
        Ok(Self::from_parts(&template, ONE_SHOT))
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::from_parts(TEMPLATE, ONE_SHOT)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{MergeProgram, Provenance};
    use crate::generator::extract_program;

    #[test]
    fn default_prompt_embeds_a_valid_example() {
        let p = PromptTemplate::default();
        assert!(!p.text.contains("{one_shot}"));
        assert!(p.text.starts_with("# Task"));
        assert!(p.text.trim_end().ends_with("# New strategies for merging the task vectors:"));
        let example = p.text.split("### Example1").nth(1).unwrap();
        let src = extract_program(example).unwrap();
        MergeProgram::compile(src, Provenance::default()).unwrap();
    }
}
