use serde::{Deserialize, Serialize};

use super::backend::Role;
use super::tools::{Tool, ToolCall};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    /// The current pending message handed to the agent.
    Message { role: Role, content: String },
    /// Free-text reply.
    Reply { content: String },
    ToolCall { call: ToolCall },
    ToolResult { tool: Tool, ok: bool, content: String },
    PermissionDenied { tool: Tool },
    InvalidToolCall { raw: String, error: String },
    Nudge { content: String },
    Delegate { to: String, content: String },
    Verdict { round: usize, approved: bool, comments: String },
    TaskEnd { steps: usize, completed: bool },
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: usize,
    pub agent: String,
    #[serde(flatten)]
    pub event: Event,
}

/// Append-only event log of a session.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn push(&mut self, agent: &str, event: Event) {
        let seq = self.entries.len();
        self.entries.push(TranscriptEntry {
            seq,
            agent: agent.to_string(),
            event,
        });
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// JSON Lines, one entry per line.
    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("transcript entries serialize") + "\n")
            .collect()
    }
}
