//! Multi-agent question answering over the dependency graph.
//!
//! Four agents cooperate. The assistant decomposes a user question and
//! routes sub-questions with the `question` tool; the dependency-graph agent
//! builds and queries the graph; the search agent consults OSV and the web;
//! the critic reviews the assistant's final answer. Every language-model
//! call goes through an [`LlmBackend`], so runs with a [`ScriptedBackend`]
//! are fully reproducible.

mod backend;
mod orchestrator;
mod rag;
mod report;
mod tools;
mod transcript;

pub use backend::{
    parse_chat_completion, BackendError, BackendReply, ChatMessage, LlmBackend, Observed, OpenAiBackend,
    OpenAiConfig, Role, Script, ScriptStep, ScriptedBackend,
};
pub use orchestrator::{
    Caps, CriticOutcome, CypherOutcome, FinalAnswer, Orchestrator, PendingContent, PendingMessage, Services,
    TaskOutcome, ToolEvent, UserChannel, Verdict,
};
pub use rag::{rag_prompt, RagContext, GROUNDING_PHRASE};
pub use report::{PackageVulnerabilities, QueryRecord, Report, SearchRecord, TopPackage};
pub use tools::{PackageArg, Tool, ToolCall, ToolCallError, ToolSpec, VizFormat};
pub use transcript::{Event, Transcript, TranscriptEntry};

use serde::{Deserialize, Serialize};

use crate::ingest::IngestError;

pub const ASSISTANT: &str = "AssistantAgent";
pub const DEPENDENCY_GRAPH: &str = "DependencyGraphAgent";
pub const SEARCH: &str = "SearchAgent";
pub const CRITIC: &str = "CriticAgent";
pub const AGENT_NAMES: [&str; 4] = [ASSISTANT, DEPENDENCY_GRAPH, SEARCH, CRITIC];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("UnknownAgent: no agent named `{0}` is registered")]
    UnknownAgent(String),
    #[error("InvalidTarget: questions can only be sent to DependencyGraphAgent or SearchAgent, not `{0}`")]
    InvalidTarget(String),
    #[error("AgentBusy: `{0}` is already working on a task")]
    AgentBusy(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("QueryGenerationFailed after {} attempts: {}", .errors.len(), .errors.join(" | "))]
    QueryGenerationFailed { errors: Vec<String> },
    #[error("NoGraph: no dependency graph has been constructed yet")]
    NoGraph,
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub name: String,
    pub instructions: String,
    pub allowed_tools: Vec<Tool>,
}

impl AgentSpec {
    /// `done` is always permitted so that every agent can finish a task.
    pub fn allows(&self, tool: Tool) -> bool {
        tool == Tool::Done || self.allowed_tools.contains(&tool)
    }

    pub fn tool_specs(&self) -> Vec<ToolSpec> {
        let mut tools = self.allowed_tools.clone();
        if !tools.contains(&Tool::Done) {
            tools.push(Tool::Done);
        }
        tools.into_iter().map(Tool::spec).collect()
    }

    pub fn standard(name: &str) -> Option<AgentSpec> {
        let (tools, instructions): (&[Tool], &str) = match name {
            ASSISTANT => (
                &[Tool::UserInteraction, Tool::Question, Tool::Forward, Tool::Done],
                "You coordinate a team that answers questions about software dependencies. \
                 Break the user's question into simple sub-questions and send each one with the \
                 `question` tool, setting target_agent to DependencyGraphAgent for anything about \
                 the dependency graph (building it, its structure, Cypher queries) or to SearchAgent \
                 for vulnerabilities and web information. Ask about vulnerabilities one package at a \
                 time. Combine the answers into one report and finish with `done`. If a reviewer \
                 sends comments, revise the answer and call `done` again.",
            ),
            DEPENDENCY_GRAPH => (
                &[Tool::ConstructKg, Tool::GraphSchema, Tool::CypherQuery, Tool::VisualizeKg, Tool::Question],
                "You manage a dependency knowledge graph of `Package` nodes (properties `name` and \
                 `version`) connected by `DEPENDS_ON` relationships. Build the graph with \
                 `construct_kg` when asked about a package. Before writing a query, call \
                 `graph_schema`. Answer questions with `cypher_query`; if a query fails, read the \
                 error and send a corrected query. Finish with `done`, giving the answer and the \
                 data it rests on.",
            ),
            SEARCH => (
                &[Tool::WebSearch, Tool::Vulnerability, Tool::Question],
                "You look up information outside the dependency graph. Use `vulnerability` to find \
                 known vulnerabilities of a package version in OSV and `web_search` for anything \
                 else. Finish with `done`, citing the records you relied on.",
            ),
            CRITIC => (
                &[Tool::Forward, Tool::Feedback],
                "You review answers about software dependencies. Check that the answer addresses the \
                 question, agrees with the data it cites, and is complete. Reply with `feedback`: \
                 approved=true if the answer is correct, otherwise approved=false with comments \
                 explaining exactly what must change.",
            ),
            _ => return None,
        };
        Some(AgentSpec {
            name: name.to_string(),
            instructions: instructions.to_string(),
            allowed_tools: tools.to_vec(),
        })
    }
}
