use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::backend::{BackendReply, ChatMessage, LlmBackend, Role};
use super::rag::{rag_prompt, RagContext};
use super::report::Report;
use super::tools::{Tool, ToolCall, VizFormat};
use super::transcript::{Event, Transcript};
use super::{AgentError, AgentSpec, AGENT_NAMES, ASSISTANT, CRITIC, DEPENDENCY_GRAPH, SEARCH};
use crate::analytics;
use crate::enrich::{NoSearchProvider, OsvClient, SearchProvider, SearchResult, VulnRecord, DEFAULT_SEARCH_K};
use crate::graph::{DependencyGraph, PackageCoordinates};
use crate::ingest::{ConstructionReport, DepsDevClient};
use crate::query::{self, ResultTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub max_steps: usize,
    pub max_retries: usize,
    pub critic_rounds: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            max_steps: 40,
            max_retries: 3,
            critic_rounds: 10,
        }
    }
}

/// External systems reachable from tools.
#[derive(Clone)]
pub struct Services {
    pub depsdev: Option<DepsDevClient>,
    pub osv: Option<OsvClient>,
    pub search: Arc<dyn SearchProvider>,
}

impl Default for Services {
    fn default() -> Self {
        Self {
            depsdev: None,
            osv: None,
            search: Arc::new(NoSearchProvider),
        }
    }
}

/// Answers `user_interaction` prompts; `None` means nobody is there.
pub type UserChannel = Box<dyn FnMut(&str) -> Option<String> + Send>;

#[derive(Debug, Clone, PartialEq)]
pub enum PendingContent {
    Message(ChatMessage),
    Tool(ToolCall),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendingMessage {
    pub content: PendingContent,
    pub sender: String,
    pub recipient: Option<String>,
}

impl PendingMessage {
    pub fn user(text: impl Into<String>) -> Self {
        Self {
            content: PendingContent::Message(ChatMessage::user(text)),
            sender: "user".into(),
            recipient: None,
        }
    }

    fn into_message(self) -> ChatMessage {
        match self.content {
            PendingContent::Message(m) => m,
            PendingContent::Tool(call) => ChatMessage::user(call.to_json().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskOutcome {
    /// `None` when the step cap was reached first.
    pub answer: Option<String>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub approved: bool,
    pub comments: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticOutcome {
    pub answer: String,
    pub rounds: usize,
    pub approved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CypherOutcome {
    pub query: String,
    pub table: ResultTable,
    pub retries: usize,
    /// Error texts of the failed attempts, in order.
    pub errors: Vec<String>,
}

/// Structured outcome of an executed tool, used to assemble reports.
#[derive(Debug, Clone, PartialEq)]
pub enum ToolEvent {
    Constructed(ConstructionReport),
    Query {
        query: String,
        result: Result<ResultTable, String>,
    },
    Vulnerabilities {
        package: PackageCoordinates,
        result: Result<Vec<VulnRecord>, String>,
    },
    Search {
        query: String,
        results: Vec<SearchResult>,
    },
    Failed {
        tool: Tool,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalAnswer {
    pub answer: String,
    pub report: Report,
    /// Critic rounds used; zero when the critic is disabled.
    pub rounds: usize,
    /// Critic approval; `None` when the critic is disabled or never ran.
    pub approved: Option<bool>,
    /// Transcript entries `[transcript_from, transcript_to)` belong to this turn.
    pub transcript_from: usize,
    pub transcript_to: usize,
    /// First error that stopped the assistant or the critic.
    #[serde(skip)]
    pub failure: Option<AgentError>,
}

struct Agent {
    spec: AgentSpec,
    backend: Box<dyn LlmBackend>,
    history: Vec<ChatMessage>,
}

const TEXT_NUDGE: &str = "You replied without using a tool. Use one of your tools, or call `done` with your final answer.";
const REPEAT_NUDGE: &str = "You repeated your previous tool call with identical arguments. Its result is above; use it, try something different, or call `done` with your final answer.";

/// One session's agents, graph and transcript.
pub struct Orchestrator {
    agents: BTreeMap<String, Option<Agent>>,
    graph: Option<Arc<DependencyGraph>>,
    graph_revision: u64,
    services: Services,
    caps: Caps,
    critic_enabled: bool,
    transcript: Transcript,
    events: Vec<ToolEvent>,
    user: Option<UserChannel>,
}

impl Orchestrator {
    /// An orchestrator with the four standard agents, each backed by
    /// `backend_for(agent_name)`.
    pub fn new(
        services: Services,
        caps: Caps,
        backend_for: &mut dyn FnMut(&str) -> Box<dyn LlmBackend>,
    ) -> Self {
        let mut o = Self::empty(services, caps);
        for name in AGENT_NAMES {
            o.register(AgentSpec::standard(name).expect("standard agent"), backend_for(name));
        }
        o
    }

    pub fn empty(services: Services, caps: Caps) -> Self {
        Self {
            agents: BTreeMap::new(),
            graph: None,
            graph_revision: 0,
            services,
            caps,
            critic_enabled: false,
            transcript: Transcript::default(),
            events: Vec::new(),
            user: None,
        }
    }

    pub fn register(&mut self, spec: AgentSpec, backend: Box<dyn LlmBackend>) {
        let history = vec![ChatMessage::system(spec.instructions.clone())];
        self.agents.insert(
            spec.name.clone(),
            Some(Agent {
                spec,
                backend,
                history,
            }),
        );
    }

    pub fn set_instructions(&mut self, agent: &str, instructions: &str) -> Result<(), AgentError> {
        let a = self
            .agents
            .get_mut(agent)
            .ok_or_else(|| AgentError::UnknownAgent(agent.to_string()))?
            .as_mut()
            .ok_or_else(|| AgentError::AgentBusy(agent.to_string()))?;
        a.spec.instructions = instructions.to_string();
        a.history[0] = ChatMessage::system(instructions);
        Ok(())
    }

    pub fn spec(&self, agent: &str) -> Option<&AgentSpec> {
        self.agents.get(agent)?.as_ref().map(|a| &a.spec)
    }

    pub fn with_critic(mut self, enabled: bool) -> Self {
        self.critic_enabled = enabled;
        self
    }

    pub fn critic_enabled(&self) -> bool {
        self.critic_enabled
    }

    pub fn set_critic(&mut self, enabled: bool) {
        self.critic_enabled = enabled;
    }

    pub fn with_graph(mut self, graph: Arc<DependencyGraph>) -> Self {
        self.set_graph(graph);
        self
    }

    pub fn set_graph(&mut self, graph: Arc<DependencyGraph>) {
        self.graph = Some(graph);
        self.graph_revision += 1;
    }

    pub fn graph(&self) -> Option<&Arc<DependencyGraph>> {
        self.graph.as_ref()
    }

    /// Increments whenever the session graph is replaced.
    pub fn graph_revision(&self) -> u64 {
        self.graph_revision
    }

    pub fn set_user_channel(&mut self, channel: UserChannel) {
        self.user = Some(channel);
    }

    pub fn caps(&self) -> Caps {
        self.caps
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn tool_events(&self) -> &[ToolEvent] {
        &self.events
    }

    fn record(&mut self, agent: &str, event: Event) {
        self.transcript.push(agent, event);
    }

    fn take(&mut self, name: &str) -> Result<Agent, AgentError> {
        self.agents
            .get_mut(name)
            .ok_or_else(|| AgentError::UnknownAgent(name.to_string()))?
            .take()
            .ok_or_else(|| AgentError::AgentBusy(name.to_string()))
    }

    fn restore(&mut self, agent: Agent) {
        self.agents.insert(agent.spec.name.clone(), Some(agent));
    }

    /// Runs `agent` on `input` until it calls `done` or the step cap is hit.
    pub fn run_task(&mut self, agent: &str, input: PendingMessage) -> Result<TaskOutcome, AgentError> {
        let mut a = self.take(agent)?;
        let result = self.drive(&mut a, input.into_message());
        self.restore(a);
        result
    }

    fn drive(&mut self, agent: &mut Agent, first: ChatMessage) -> Result<TaskOutcome, AgentError> {
        let name = agent.spec.name.clone();
        let question = first.content.clone();
        let tool_specs = agent.spec.tool_specs();
        let mut cpm = first;
        let mut last_call: Option<ToolCall> = None;
        let mut query_errors: Vec<String> = Vec::new();
        let mut retrieved: Vec<String> = Vec::new();
        let mut steps = 0;
        loop {
            if steps == self.caps.max_steps {
                self.record(&name, Event::TaskEnd { steps, completed: false });
                return Ok(TaskOutcome { answer: None, steps });
            }
            steps += 1;
            self.record(
                &name,
                Event::Message {
                    role: cpm.role,
                    content: cpm.content.clone(),
                },
            );
            agent.history.push(cpm);
            let reply = match agent.backend.respond(&agent.history, &tool_specs) {
                Ok(r) => r,
                Err(e) => {
                    self.record(&name, Event::Error { message: e.to_string() });
                    return Err(e.into());
                }
            };
            let call = match reply {
                BackendReply::Text(text) => {
                    self.record(&name, Event::Reply { content: text.clone() });
                    agent.history.push(ChatMessage::assistant(text));
                    self.record(&name, Event::Nudge { content: TEXT_NUDGE.into() });
                    cpm = ChatMessage::user(TEXT_NUDGE);
                    continue;
                }
                BackendReply::Malformed { raw, error } => {
                    self.record(&name, Event::InvalidToolCall { raw: raw.clone(), error: error.clone() });
                    agent.history.push(ChatMessage::assistant(raw));
                    cpm = ChatMessage::tool(format!("Invalid tool call: {error}"));
                    continue;
                }
                BackendReply::Tool(call) => call,
            };
            self.record(&name, Event::ToolCall { call: call.clone() });
            agent.history.push(ChatMessage::assistant(call.to_json().to_string()));
            let tool = call.tool();
            if !agent.spec.allows(tool) {
                self.record(&name, Event::PermissionDenied { tool });
                let allowed: Vec<String> = agent.spec.tool_specs().into_iter().map(|t| t.name).collect();
                cpm = ChatMessage::tool(format!(
                    "PermissionDenied: {name} may not use `{tool}`. Allowed tools: {}.",
                    allowed.join(", ")
                ));
                last_call = None;
                continue;
            }
            if last_call.as_ref() == Some(&call) {
                self.record(&name, Event::Nudge { content: REPEAT_NUDGE.into() });
                cpm = ChatMessage::user(REPEAT_NUDGE);
                continue;
            }
            last_call = Some(call.clone());

            match call {
                ToolCall::Done { answer } => {
                    self.record(&name, Event::TaskEnd { steps, completed: true });
                    return Ok(TaskOutcome {
                        answer: Some(answer),
                        steps,
                    });
                }
                ToolCall::Feedback { approved, comments } => {
                    let verdict = verdict(approved, comments);
                    self.record(&name, Event::TaskEnd { steps, completed: true });
                    return Ok(TaskOutcome {
                        answer: Some(serde_json::to_string(&verdict).expect("verdict serializes")),
                        steps,
                    });
                }
                ToolCall::Question { question: q, target_agent } => {
                    let (ok, content) = match self.route_question(&name, &q, &target_agent) {
                        Ok(answer) => (true, answer),
                        Err(e @ AgentError::Backend(_)) => return Err(e),
                        Err(e) => (false, e.to_string()),
                    };
                    self.record(&name, Event::ToolResult { tool, ok, content: content.clone() });
                    cpm = ChatMessage::tool(content);
                }
                ToolCall::Forward { agent: target } => {
                    let payload = agent
                        .history
                        .iter()
                        .rev()
                        .skip(1)
                        .find(|m| m.role == Role::Assistant)
                        .or_else(|| agent.history.iter().rev().find(|m| m.role != Role::Assistant))
                        .map(|m| m.content.clone())
                        .unwrap_or_default();
                    let (ok, content) = match self.forward(&name, &target, &payload) {
                        Ok(answer) => (true, answer),
                        Err(e @ AgentError::Backend(_)) => return Err(e),
                        Err(e) => (false, e.to_string()),
                    };
                    self.record(&name, Event::ToolResult { tool, ok, content: content.clone() });
                    cpm = ChatMessage::tool(content);
                }
                other => {
                    let (ok, content) = self.execute(&other);
                    self.record(&name, Event::ToolResult { tool, ok, content: content.clone() });
                    if tool == Tool::CypherQuery {
                        if ok {
                            query_errors.clear();
                        } else {
                            query_errors.push(content.clone());
                            if query_errors.len() > self.caps.max_retries {
                                let err = AgentError::QueryGenerationFailed { errors: query_errors };
                                self.record(&name, Event::Error { message: err.to_string() });
                                self.record(&name, Event::TaskEnd { steps, completed: false });
                                return Err(err);
                            }
                        }
                    }
                    let retrieval = matches!(tool, Tool::CypherQuery | Tool::WebSearch | Tool::Vulnerability);
                    cpm = if ok && retrieval {
                        retrieved.push(content);
                        ChatMessage::tool(rag_prompt(&RagContext::new(question.clone(), retrieved.clone())))
                    } else if !ok && tool == Tool::CypherQuery {
                        ChatMessage::tool(format!("{content}\nCorrect the query and call cypher_query again."))
                    } else {
                        ChatMessage::tool(content)
                    };
                }
            }
        }
    }

    /// Delivers a question to a retriever agent and returns its answer.
    pub fn route_question(&mut self, sender: &str, question: &str, target: &str) -> Result<String, AgentError> {
        if !self.agents.contains_key(target) {
            return Err(AgentError::UnknownAgent(target.to_string()));
        }
        if target != DEPENDENCY_GRAPH && target != SEARCH {
            return Err(AgentError::InvalidTarget(target.to_string()));
        }
        self.record(
            sender,
            Event::Delegate {
                to: target.to_string(),
                content: question.to_string(),
            },
        );
        let outcome = self.run_task(target, PendingMessage {
            content: PendingContent::Message(ChatMessage::user(question)),
            sender: sender.to_string(),
            recipient: Some(target.to_string()),
        })?;
        Ok(outcome
            .answer
            .unwrap_or_else(|| format!("{target} did not reach an answer within {} steps.", outcome.steps)))
    }

    fn forward(&mut self, sender: &str, target: &str, payload: &str) -> Result<String, AgentError> {
        if !self.agents.contains_key(target) {
            return Err(AgentError::UnknownAgent(target.to_string()));
        }
        self.record(
            sender,
            Event::Delegate {
                to: target.to_string(),
                content: payload.to_string(),
            },
        );
        let outcome = self.run_task(target, PendingMessage {
            content: PendingContent::Message(ChatMessage::user(payload)),
            sender: sender.to_string(),
            recipient: Some(target.to_string()),
        })?;
        Ok(outcome.answer.unwrap_or_else(|| format!("{target} gave no answer.")))
    }

    /// Executes a data tool directly, with no model involvement. Returns
    /// whether it succeeded and the text handed back to the agent.
    pub fn execute(&mut self, call: &ToolCall) -> (bool, String) {
        let result = self.execute_inner(call);
        if let Err(message) = &result {
            self.events.push(ToolEvent::Failed {
                tool: call.tool(),
                message: message.clone(),
            });
        }
        match result {
            Ok(text) => (true, text),
            Err(text) => (false, text),
        }
    }

    fn require_graph(&self) -> Result<Arc<DependencyGraph>, String> {
        self.graph.clone().ok_or_else(|| AgentError::NoGraph.to_string())
    }

    fn execute_inner(&mut self, call: &ToolCall) -> Result<String, String> {
        match call {
            ToolCall::ConstructKg(package) => {
                let coords = package.resolve(None)?;
                let client = self
                    .services
                    .depsdev
                    .clone()
                    .ok_or("deps.dev is not configured for this session")?;
                let (graph, report) = client.construct(&coords).map_err(|e| e.to_string())?;
                self.set_graph(Arc::new(graph));
                let summary = report.summary();
                self.events.push(ToolEvent::Constructed(report));
                Ok(summary)
            }
            ToolCall::GraphSchema => {
                let schema = crate::graph::SchemaDescription::dependency_schema().describe();
                Ok(match &self.graph {
                    Some(g) => format!("{schema}\nThe graph holds {} packages and {} edges.", g.node_count(), g.edge_count()),
                    None => format!("{schema}\nNo graph has been constructed yet."),
                })
            }
            ToolCall::CypherQuery { query } => {
                let graph = self.require_graph()?;
                let result = query::run(&graph, query).map_err(|e| e.to_string());
                self.events.push(ToolEvent::Query {
                    query: query.clone(),
                    result: result.clone(),
                });
                result.map(|t| t.render_text())
            }
            ToolCall::VisualizeKg { format } => {
                let graph = self.require_graph()?;
                Ok(match format {
                    VizFormat::Dot => analytics::render_dot(&graph),
                    VizFormat::NodeLink => {
                        serde_json::to_string(&graph.export_node_link()).expect("node-link serializes")
                    }
                })
            }
            ToolCall::WebSearch { query, k } => {
                let results = self
                    .services
                    .search
                    .search(query, k.unwrap_or(DEFAULT_SEARCH_K))
                    .map_err(|e| e.to_string())?;
                let text = if results.is_empty() {
                    format!("No results for \"{query}\".")
                } else {
                    results
                        .iter()
                        .enumerate()
                        .map(|(i, r)| format!("[{}] {} ({}): {}", i + 1, r.title, r.url, r.snippet))
                        .collect::<Vec<_>>()
                        .join("\n")
                };
                self.events.push(ToolEvent::Search {
                    query: query.clone(),
                    results,
                });
                Ok(text)
            }
            ToolCall::Vulnerability { packages } => {
                let default = self.graph.as_ref().map(|g| g.ecosystem());
                let coords = packages
                    .iter()
                    .map(|p| p.resolve(default))
                    .collect::<Result<Vec<_>, _>>()?;
                let client = self.services.osv.clone().ok_or("OSV is not configured for this session")?;
                let results = client.query_batch(&coords);
                let mut lines = Vec::new();
                let mut any_ok = false;
                for (c, result) in coords.into_iter().zip(results) {
                    let label = format!("{}@{}", c.name, c.version);
                    match &result {
                        Ok(records) if records.is_empty() => {
                            any_ok = true;
                            lines.push(format!("{label}: no known vulnerabilities"));
                        }
                        Ok(records) => {
                            any_ok = true;
                            let items: Vec<String> = records
                                .iter()
                                .map(|r| match &r.severity {
                                    Some(s) => format!("{} ({s}): {}", r.id, r.summary),
                                    None => format!("{}: {}", r.id, r.summary),
                                })
                                .collect();
                            lines.push(format!("{label}: {} known vulnerabilities; {}", records.len(), items.join("; ")));
                        }
                        Err(e) => lines.push(format!("{label}: lookup failed: {e}")),
                    }
                    self.events.push(ToolEvent::Vulnerabilities {
                        package: c,
                        result: result.map_err(|e| e.to_string()),
                    });
                }
                let text = lines.join("\n");
                if any_ok {
                    Ok(text)
                } else {
                    Err(text)
                }
            }
            ToolCall::UserInteraction { message } => Ok(self
                .user
                .as_mut()
                .and_then(|ask| ask(message))
                .unwrap_or_else(|| "No user is available to answer. Continue with the information you have.".into())),
            ToolCall::Done { .. } | ToolCall::Feedback { .. } | ToolCall::Question { .. } | ToolCall::Forward { .. } => {
                Err(format!("`{}` is handled by the task loop", call.tool()))
            }
        }
    }

    /// Has the dependency-graph agent write a query for `question`, feeding
    /// each failure's error text back until one executes cleanly or
    /// `max_retries` retries are spent.
    pub fn generate_cypher_with_retry(&mut self, question: &str) -> Result<CypherOutcome, AgentError> {
        let graph = self.graph.clone().ok_or(AgentError::NoGraph)?;
        let mut agent = self.take(DEPENDENCY_GRAPH)?;
        let result = self.cypher_attempts(&mut agent, &graph, question);
        self.restore(agent);
        result
    }

    fn cypher_attempts(
        &mut self,
        agent: &mut Agent,
        graph: &DependencyGraph,
        question: &str,
    ) -> Result<CypherOutcome, AgentError> {
        let name = agent.spec.name.clone();
        self.record(&name, Event::ToolCall { call: ToolCall::GraphSchema });
        let (_, schema) = self.execute(&ToolCall::GraphSchema);
        self.record(&name, Event::ToolResult { tool: Tool::GraphSchema, ok: true, content: schema.clone() });
        let tools = [Tool::CypherQuery.spec()];
        let mut cpm = ChatMessage::user(format!(
            "{question}\n\nGraph schema:\n{schema}\nAnswer by calling cypher_query with one Cypher query."
        ));
        let mut errors = Vec::new();
        for attempt in 0..=self.caps.max_retries {
            self.record(&name, Event::Message { role: cpm.role, content: cpm.content.clone() });
            agent.history.push(cpm);
            let reply = agent.backend.respond(&agent.history, &tools)?;
            let failure = match reply {
                BackendReply::Tool(ToolCall::CypherQuery { query }) => {
                    let call = ToolCall::CypherQuery { query: query.clone() };
                    self.record(&name, Event::ToolCall { call: call.clone() });
                    agent.history.push(ChatMessage::assistant(call.to_json().to_string()));
                    let result = query::run(graph, &query);
                    self.events.push(ToolEvent::Query {
                        query: query.clone(),
                        result: result.clone().map_err(|e| e.to_string()),
                    });
                    match result {
                        Ok(table) => {
                            self.record(&name, Event::ToolResult { tool: Tool::CypherQuery, ok: true, content: table.render_text() });
                            agent.history.push(ChatMessage::tool(table.render_text()));
                            return Ok(CypherOutcome {
                                query,
                                table,
                                retries: attempt,
                                errors,
                            });
                        }
                        Err(e) => e.to_string(),
                    }
                }
                BackendReply::Tool(other) => {
                    self.record(&name, Event::ToolCall { call: other.clone() });
                    agent.history.push(ChatMessage::assistant(other.to_json().to_string()));
                    format!("expected a cypher_query tool call, got `{}`", other.tool())
                }
                BackendReply::Text(text) => {
                    self.record(&name, Event::Reply { content: text.clone() });
                    agent.history.push(ChatMessage::assistant(text));
                    "expected a cypher_query tool call, got free text".to_string()
                }
                BackendReply::Malformed { raw, error } => {
                    self.record(&name, Event::InvalidToolCall { raw: raw.clone(), error: error.clone() });
                    agent.history.push(ChatMessage::assistant(raw));
                    format!("Invalid tool call: {error}")
                }
            };
            self.record(&name, Event::ToolResult { tool: Tool::CypherQuery, ok: false, content: failure.clone() });
            errors.push(failure.clone());
            cpm = ChatMessage::tool(format!("{failure}\nCorrect the query and call cypher_query again."));
        }
        let err = AgentError::QueryGenerationFailed { errors };
        self.record(&name, Event::Error { message: err.to_string() });
        Err(err)
    }

    /// Asks the critic for one verdict on `draft`.
    pub fn critic_review(&mut self, question: &str, draft: &str, round: usize) -> Result<Verdict, AgentError> {
        let mut critic = self.take(CRITIC)?;
        let result = self.review_with(&mut critic, question, draft, round);
        self.restore(critic);
        result
    }

    fn review_with(&mut self, critic: &mut Agent, question: &str, draft: &str, round: usize) -> Result<Verdict, AgentError> {
        let name = critic.spec.name.clone();
        let prompt = ChatMessage::user(format!(
            "Question:\n{question}\n\nProposed answer:\n{draft}\n\nReview the answer and reply with the feedback tool."
        ));
        self.record(&name, Event::Message { role: prompt.role, content: prompt.content.clone() });
        critic.history.push(prompt);
        let reply = critic.backend.respond(&critic.history, &critic.spec.tool_specs())?;
        let verdict = match reply {
            BackendReply::Tool(call) => {
                self.record(&name, Event::ToolCall { call: call.clone() });
                critic.history.push(ChatMessage::assistant(call.to_json().to_string()));
                match call {
                    ToolCall::Feedback { approved, comments } => verdict(approved, comments),
                    other if !critic.spec.allows(other.tool()) => {
                        self.record(&name, Event::PermissionDenied { tool: other.tool() });
                        verdict(false, String::new())
                    }
                    _ => verdict(false, String::new()),
                }
            }
            BackendReply::Text(text) => {
                self.record(&name, Event::Reply { content: text.clone() });
                critic.history.push(ChatMessage::assistant(text.clone()));
                verdict(false, text)
            }
            BackendReply::Malformed { raw, error } => {
                self.record(&name, Event::InvalidToolCall { raw: raw.clone(), error });
                critic.history.push(ChatMessage::assistant(raw));
                verdict(false, String::new())
            }
        };
        self.record(
            &name,
            Event::Verdict {
                round,
                approved: verdict.approved,
                comments: verdict.comments.clone(),
            },
        );
        Ok(verdict)
    }

    /// Reviews `draft` until the critic approves or `critic_rounds` verdicts
    /// have been given; `revise` turns critic comments into a new draft.
    pub fn critic_loop(
        &mut self,
        question: &str,
        draft: String,
        revise: &mut dyn FnMut(&mut Orchestrator, &str) -> Result<String, AgentError>,
    ) -> Result<CriticOutcome, AgentError> {
        let mut draft = draft;
        let cap = self.caps.critic_rounds.max(1);
        for round in 1..=cap {
            let v = self.critic_review(question, &draft, round)?;
            if v.approved {
                return Ok(CriticOutcome {
                    answer: draft,
                    rounds: round,
                    approved: true,
                });
            }
            if round == cap {
                break;
            }
            draft = revise(self, &v.comments)?;
        }
        Ok(CriticOutcome {
            answer: draft,
            rounds: cap,
            approved: false,
        })
    }

    /// One user turn: the assistant answers (delegating as it sees fit), the
    /// critic reviews when enabled, and a report is assembled from the tool
    /// results of the turn. Failures land in the report's error section.
    pub fn ask(&mut self, question: &str) -> FinalAnswer {
        let transcript_from = self.transcript.len();
        let events_from = self.events.len();
        let mut errors = Vec::new();
        let mut rounds = 0;
        let mut approved = None;
        let mut failure = None;

        let first = self.run_task(ASSISTANT, PendingMessage::user(question));
        let mut answer = match first {
            Ok(TaskOutcome { answer: Some(a), .. }) => Some(a),
            Ok(TaskOutcome { answer: None, steps }) => {
                errors.push(format!("{ASSISTANT} did not finish within {steps} steps"));
                None
            }
            Err(e) => {
                errors.push(e.to_string());
                failure = Some(e);
                None
            }
        };

        if let (true, Some(draft)) = (self.critic_enabled, answer.clone()) {
            let mut revise = |o: &mut Orchestrator, comments: &str| -> Result<String, AgentError> {
                let outcome = o.run_task(
                    ASSISTANT,
                    PendingMessage::user(format!(
                        "The reviewer did not approve your answer.\nComments: {comments}\nRevise the answer and call done with the corrected version."
                    )),
                )?;
                Ok(outcome.answer.unwrap_or_default())
            };
            match self.critic_loop(question, draft, &mut revise) {
                Ok(outcome) => {
                    rounds = outcome.rounds;
                    approved = Some(outcome.approved);
                    if !outcome.approved {
                        errors.push(format!("the reviewer did not approve the answer after {} rounds", outcome.rounds));
                    }
                    answer = Some(outcome.answer);
                }
                Err(e) => {
                    errors.push(e.to_string());
                    failure.get_or_insert(e);
                }
            }
        }

        let answer = answer.unwrap_or_else(|| "I could not complete this request; see the error section of the report.".to_string());
        let report = Report::build(self.graph.as_deref(), &self.events[events_from..], errors);
        FinalAnswer {
            answer,
            report,
            rounds,
            approved,
            transcript_from,
            transcript_to: self.transcript.len(),
            failure,
        }
    }
}

fn verdict(approved: bool, comments: String) -> Verdict {
    let comments = if !approved && comments.trim().is_empty() {
        "The reviewer gave no verdict or comments.".to_string()
    } else {
        comments
    };
    Verdict { approved, comments }
}
