use serde::{Deserialize, Serialize};

/// Retrieved data for one question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RagContext {
    pub question: String,
    pub items: Vec<String>,
}

impl RagContext {
    pub fn new(question: impl Into<String>, items: Vec<String>) -> Self {
        Self {
            question: question.into(),
            items,
        }
    }

    pub fn k(&self) -> usize {
        self.items.len()
    }
}

pub const GROUNDING_PHRASE: &str = "based ONLY on these data";

/// "Given the following data: [d_1, …, d_k], provide an answer to this
/// question: Q, based ONLY on these data, and indicate which data support
/// your answer."
pub fn rag_prompt(ctx: &RagContext) -> String {
    let mut out = String::from("Given the following data:\n");
    for (i, item) in ctx.items.iter().enumerate() {
        out.push_str(&format!("[d{}]\n{}\n", i + 1, item));
    }
    out.push_str(&format!(
        "provide an answer to this question:\n{}\n{GROUNDING_PHRASE}, and indicate which data support your answer.",
        ctx.question
    ));
    out
}
