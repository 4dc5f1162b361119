use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::tools::{ToolCall, ToolSpec};
use crate::http::{endpoint, HttpClient};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }

    pub fn tool(content: impl Into<String>) -> Self {
        Self::new(Role::Tool, content)
    }
}

/// A backend's answer to one turn: free text or exactly one tool call.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendReply {
    Text(String),
    Tool(ToolCall),
    /// Something shaped like a tool call that failed to validate.
    Malformed { raw: String, error: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("ScriptExhausted: the script for {agent} has no step {step}")]
    ScriptExhausted { agent: String, step: usize },
    #[error("BackendError: {0}")]
    Http(String),
    #[error("invalid script: {0}")]
    InvalidScript(String),
}

pub trait LlmBackend: Send {
    fn respond(&mut self, history: &[ChatMessage], tools: &[ToolSpec]) -> Result<BackendReply, BackendError>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptStep {
    Text(String),
    Tool(ToolCall),
    Malformed(Value),
}

impl ScriptStep {
    fn from_json(value: Value) -> Result<Self, BackendError> {
        match value {
            Value::String(s) => Ok(ScriptStep::Text(s)),
            Value::Object(_) if value.get("tool").is_some() => Ok(match ToolCall::from_json(&value) {
                Ok(call) => ScriptStep::Tool(call),
                Err(_) => ScriptStep::Malformed(value),
            }),
            other => Err(BackendError::InvalidScript(format!(
                "a step must be a string or a {{\"tool\", \"arguments\"}} object, got {other}"
            ))),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            ScriptStep::Text(s) => json!(s),
            ScriptStep::Tool(call) => call.to_json(),
            ScriptStep::Malformed(v) => v.clone(),
        }
    }
}

impl From<ToolCall> for ScriptStep {
    fn from(call: ToolCall) -> Self {
        ScriptStep::Tool(call)
    }
}

impl From<&str> for ScriptStep {
    fn from(text: &str) -> Self {
        ScriptStep::Text(text.to_string())
    }
}

/// Every prompt history a scripted backend was shown, in call order.
pub type Observed = Arc<Mutex<Vec<Vec<ChatMessage>>>>;

/// Replays canned replies, one per call.
pub struct ScriptedBackend {
    agent: String,
    steps: VecDeque<ScriptStep>,
    consumed: usize,
    observed: Observed,
}

impl ScriptedBackend {
    pub fn new(agent: impl Into<String>, steps: impl IntoIterator<Item = ScriptStep>) -> Self {
        Self {
            agent: agent.into(),
            steps: steps.into_iter().collect(),
            consumed: 0,
            observed: Arc::default(),
        }
    }

    pub fn observer(&self) -> Observed {
        self.observed.clone()
    }

    pub fn remaining(&self) -> usize {
        self.steps.len()
    }
}

impl LlmBackend for ScriptedBackend {
    fn respond(&mut self, history: &[ChatMessage], _tools: &[ToolSpec]) -> Result<BackendReply, BackendError> {
        self.observed.lock().unwrap().push(history.to_vec());
        let step = self.steps.pop_front().ok_or_else(|| BackendError::ScriptExhausted {
            agent: self.agent.clone(),
            step: self.consumed + 1,
        })?;
        self.consumed += 1;
        Ok(match step {
            ScriptStep::Text(text) => BackendReply::Text(text),
            ScriptStep::Tool(call) => BackendReply::Tool(call),
            ScriptStep::Malformed(value) => BackendReply::Malformed {
                error: ToolCall::from_json(&value).err().map(|e| e.to_string()).unwrap_or_default(),
                raw: value.to_string(),
            },
        })
    }
}

/// Per-agent scripts. The JSON form is either an object keyed by agent name
/// or a bare array, which is taken as the AssistantAgent's script.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Script {
    pub agents: BTreeMap<String, Vec<ScriptStep>>,
}

impl Script {
    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let value: Value = serde_json::from_str(text).map_err(|e| BackendError::InvalidScript(e.to_string()))?;
        let steps = |v: Value| -> Result<Vec<ScriptStep>, BackendError> {
            match v {
                Value::Array(items) => items.into_iter().map(ScriptStep::from_json).collect(),
                other => Err(BackendError::InvalidScript(format!("expected an array of steps, got {other}"))),
            }
        };
        let mut agents = BTreeMap::new();
        match value {
            Value::Array(_) => {
                agents.insert(super::ASSISTANT.to_string(), steps(value)?);
            }
            Value::Object(map) => {
                for (agent, v) in map {
                    agents.insert(agent, steps(v)?);
                }
            }
            other => return Err(BackendError::InvalidScript(format!("expected an object or array, got {other}"))),
        }
        Ok(Self { agents })
    }

    pub fn from_path(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::InvalidScript(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn agent(mut self, name: &str, steps: impl IntoIterator<Item = ScriptStep>) -> Self {
        self.agents.insert(name.to_string(), steps.into_iter().collect());
        self
    }

    pub fn to_json(&self) -> Value {
        Value::Object(
            self.agents
                .iter()
                .map(|(k, v)| (k.clone(), Value::Array(v.iter().map(ScriptStep::to_json).collect())))
                .collect(),
        )
    }

    /// A backend for `agent`; agents without a script get an empty one.
    pub fn backend(&self, agent: &str) -> ScriptedBackend {
        ScriptedBackend::new(agent, self.agents.get(agent).cloned().unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenAiConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

/// Chat-completion client for OpenAI-compatible endpoints. Tool results and
/// prior tool calls are sent as plain user/assistant text, which keeps the
/// exchange valid for servers without native tool-call ids.
pub struct OpenAiBackend {
    config: OpenAiConfig,
    http: HttpClient,
}

impl OpenAiBackend {
    pub fn new(config: OpenAiConfig) -> Self {
        let http = HttpClient::new(config.timeout);
        Self { config, http }
    }

    fn request_body(&self, history: &[ChatMessage], tools: &[ToolSpec]) -> Value {
        let messages: Vec<Value> = history
            .iter()
            .map(|m| match m.role {
                Role::System => json!({"role": "system", "content": m.content}),
                Role::User => json!({"role": "user", "content": m.content}),
                Role::Assistant => json!({"role": "assistant", "content": m.content}),
                Role::Tool => json!({"role": "user", "content": format!("Tool result:\n{}", m.content)}),
            })
            .collect();
        let tools: Vec<Value> = tools
            .iter()
            .map(|t| json!({"type": "function", "function": {"name": t.name, "description": t.description, "parameters": t.parameters}}))
            .collect();
        let mut body = json!({"model": self.config.model, "messages": messages});
        if !tools.is_empty() {
            body["tools"] = json!(tools);
        }
        body
    }
}

/// Interprets one chat-completion response body.
pub fn parse_chat_completion(body: &str) -> Result<BackendReply, BackendError> {
    let value: Value =
        serde_json::from_str(body).map_err(|e| BackendError::Http(format!("invalid completion body: {e}")))?;
    let message = value
        .pointer("/choices/0/message")
        .ok_or_else(|| BackendError::Http("completion has no choices[0].message".into()))?;
    if let Some(call) = message.pointer("/tool_calls/0/function") {
        let name = call.get("name").and_then(Value::as_str).unwrap_or_default();
        let raw_args = call.get("arguments").cloned().unwrap_or(Value::Null);
        let args = match &raw_args {
            Value::String(s) if s.trim().is_empty() => Value::Null,
            Value::String(s) => match serde_json::from_str(s) {
                Ok(v) => v,
                Err(e) => {
                    return Ok(BackendReply::Malformed {
                        raw: s.clone(),
                        error: format!("arguments are not JSON: {e}"),
                    })
                }
            },
            other => other.clone(),
        };
        return Ok(match ToolCall::from_parts(name, args.clone()) {
            Ok(call) => BackendReply::Tool(call),
            Err(e) => BackendReply::Malformed {
                raw: json!({"tool": name, "arguments": args}).to_string(),
                error: e.to_string(),
            },
        });
    }
    let content = message.get("content").and_then(Value::as_str).unwrap_or_default().to_string();
    Ok(match ToolCall::from_text(&content) {
        Some(Ok(call)) => BackendReply::Tool(call),
        Some(Err(e)) => BackendReply::Malformed {
            raw: content,
            error: e.to_string(),
        },
        None => BackendReply::Text(content),
    })
}

impl LlmBackend for OpenAiBackend {
    fn respond(&mut self, history: &[ChatMessage], tools: &[ToolSpec]) -> Result<BackendReply, BackendError> {
        let url = endpoint(&self.config.base_url, &["chat", "completions"]).map_err(|e| BackendError::Http(e.0))?;
        let auth = self.config.api_key.as_ref().map(|k| format!("Bearer {k}"));
        let headers: Vec<(&str, &str)> = auth.iter().map(|a| ("authorization", a.as_str())).collect();
        let response = self
            .http
            .post_json(&url, &self.request_body(history, tools), &headers)
            .map_err(|e| BackendError::Http(e.0))?;
        if response.status != 200 {
            let snippet: String = response.body.chars().take(300).collect();
            return Err(BackendError::Http(format!("HTTP {}: {snippet}", response.status)));
        }
        parse_chat_completion(&response.body)
    }
}
