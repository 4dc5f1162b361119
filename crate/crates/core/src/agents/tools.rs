use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::graph::{Ecosystem, PackageCoordinates};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tool {
    ConstructKg,
    GraphSchema,
    CypherQuery,
    VisualizeKg,
    WebSearch,
    Vulnerability,
    Question,
    Forward,
    UserInteraction,
    Done,
    Feedback,
}

impl Tool {
    pub const ALL: [Tool; 11] = [
        Tool::ConstructKg,
        Tool::GraphSchema,
        Tool::CypherQuery,
        Tool::VisualizeKg,
        Tool::WebSearch,
        Tool::Vulnerability,
        Tool::Question,
        Tool::Forward,
        Tool::UserInteraction,
        Tool::Done,
        Tool::Feedback,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tool::ConstructKg => "construct_kg",
            Tool::GraphSchema => "graph_schema",
            Tool::CypherQuery => "cypher_query",
            Tool::VisualizeKg => "visualize_kg",
            Tool::WebSearch => "web_search",
            Tool::Vulnerability => "vulnerability",
            Tool::Question => "question",
            Tool::Forward => "forward",
            Tool::UserInteraction => "user_interaction",
            Tool::Done => "done",
            Tool::Feedback => "feedback",
        }
    }

    pub fn from_name(name: &str) -> Option<Tool> {
        Tool::ALL.into_iter().find(|t| t.name() == name)
    }

    pub fn description(self) -> &'static str {
        match self {
            Tool::ConstructKg => "Fetch the dependency closure of a package from deps.dev and build the dependency graph.",
            Tool::GraphSchema => "Return the schema of the dependency graph: node labels, properties and relationship types.",
            Tool::CypherQuery => "Run a Cypher query against the dependency graph and return the result table.",
            Tool::VisualizeKg => "Render the dependency graph as Graphviz DOT or node-link JSON.",
            Tool::WebSearch => "Search the web and return the top results.",
            Tool::Vulnerability => "Look up known vulnerabilities of one or more packages in the OSV database.",
            Tool::Question => "Ask another agent a question; target_agent is DependencyGraphAgent or SearchAgent.",
            Tool::Forward => "Hand the current message to another agent without adding content.",
            Tool::UserInteraction => "Ask the user for clarification.",
            Tool::Done => "Finish the current task with a final answer.",
            Tool::Feedback => "Approve a draft answer or return comments explaining what must change.",
        }
    }

    /// JSON schema of the tool's arguments object.
    pub fn parameters(self) -> Value {
        let coords = json!({
            "type": "object",
            "properties": {
                "ecosystem": {"type": "string", "enum": ["pypi", "npm", "cargo", "go"]},
                "name": {"type": "string"},
                "version": {"type": "string"}
            },
            "required": ["ecosystem", "name", "version"]
        });
        let object = |props: Value, required: &[&str]| {
            json!({"type": "object", "properties": props, "required": required})
        };
        match self {
            Tool::ConstructKg => coords,
            Tool::GraphSchema => object(json!({}), &[]),
            Tool::CypherQuery => object(json!({"query": {"type": "string"}}), &["query"]),
            Tool::VisualizeKg => object(
                json!({"format": {"type": "string", "enum": ["dot", "node-link"]}}),
                &[],
            ),
            Tool::WebSearch => object(
                json!({"query": {"type": "string"}, "k": {"type": "integer", "minimum": 1}}),
                &["query"],
            ),
            Tool::Vulnerability => json!({
                "type": "object",
                "properties": {
                    "ecosystem": {"type": "string"},
                    "name": {"type": "string"},
                    "version": {"type": "string"},
                    "packages": {"type": "array", "items": coords}
                }
            }),
            Tool::Question => object(
                json!({
                    "question": {"type": "string"},
                    "target_agent": {"type": "string", "enum": ["DependencyGraphAgent", "SearchAgent"]}
                }),
                &["question", "target_agent"],
            ),
            Tool::Forward => object(json!({"agent": {"type": "string"}}), &["agent"]),
            Tool::UserInteraction => object(json!({"message": {"type": "string"}}), &["message"]),
            Tool::Done => object(json!({"answer": {"type": "string"}}), &["answer"]),
            Tool::Feedback => object(
                json!({"approved": {"type": "boolean"}, "comments": {"type": "string"}}),
                &["approved"],
            ),
        }
    }

    pub fn spec(self) -> ToolSpec {
        ToolSpec {
            name: self.name().to_string(),
            description: self.description().to_string(),
            parameters: self.parameters(),
        }
    }
}

impl fmt::Display for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What a backend is told about one tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub parameters: Value,
}

/// Package reference in tool arguments. The ecosystem may be omitted, in
/// which case the session graph's ecosystem applies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageArg {
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "lenient_ecosystem")]
    pub ecosystem: Option<Ecosystem>,
    pub name: String,
    pub version: String,
}

fn lenient_ecosystem<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Ecosystem>, D::Error> {
    let raw: Option<String> = Option::deserialize(d)?;
    raw.map(|s| {
        s.parse::<Ecosystem>()
            .or_else(|_| Ecosystem::from_deps_dev_system(&s).ok_or(()))
            .or_else(|_| {
                Ecosystem::ALL
                    .into_iter()
                    .find(|e| e.osv_name().eq_ignore_ascii_case(&s))
                    .ok_or(())
            })
            .map_err(|_| serde::de::Error::custom(format!("unsupported ecosystem `{s}`")))
    })
    .transpose()
}

impl PackageArg {
    pub fn resolve(&self, default: Option<Ecosystem>) -> Result<PackageCoordinates, String> {
        let ecosystem = self
            .ecosystem
            .or(default)
            .ok_or_else(|| format!("no ecosystem given for {}@{}", self.name, self.version))?;
        PackageCoordinates::new(ecosystem, self.name.clone(), self.version.clone()).map_err(|e| e.to_string())
    }
}

impl From<&PackageCoordinates> for PackageArg {
    fn from(c: &PackageCoordinates) -> Self {
        Self {
            ecosystem: Some(c.ecosystem),
            name: c.name.clone(),
            version: c.version.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VizFormat {
    #[serde(rename = "dot")]
    Dot,
    #[serde(rename = "node-link")]
    NodeLink,
}

/// A structured action emitted by a backend. On the wire it is
/// `{"tool": "<name>", "arguments": {...}}`.
#[derive(Debug, Clone, PartialEq)]
pub enum ToolCall {
    ConstructKg(PackageArg),
    GraphSchema,
    CypherQuery { query: String },
    VisualizeKg { format: VizFormat },
    WebSearch { query: String, k: Option<usize> },
    Vulnerability { packages: Vec<PackageArg> },
    Question { question: String, target_agent: String },
    Forward { agent: String },
    UserInteraction { message: String },
    Done { answer: String },
    Feedback { approved: bool, comments: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ToolCallError {
    #[error("not a tool call: {0}")]
    NotAToolCall(String),
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("invalid arguments for `{tool}`: {reason}")]
    InvalidArguments { tool: &'static str, reason: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Empty {}

#[derive(Deserialize)]
struct QueryArgs {
    query: String,
}

#[derive(Deserialize)]
struct VizArgs {
    #[serde(default)]
    format: Option<VizFormat>,
}

#[derive(Deserialize)]
struct SearchArgs {
    query: String,
    #[serde(default)]
    k: Option<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum VulnArgs {
    Many { packages: Vec<PackageArg> },
    One(PackageArg),
}

#[derive(Deserialize)]
struct QuestionArgs {
    question: String,
    target_agent: String,
}

#[derive(Deserialize)]
struct ForwardArgs {
    agent: String,
}

#[derive(Deserialize)]
struct MessageArgs {
    message: String,
}

#[derive(Deserialize)]
struct DoneArgs {
    answer: String,
}

#[derive(Deserialize)]
struct FeedbackArgs {
    approved: bool,
    #[serde(default)]
    comments: String,
}

impl ToolCall {
    pub fn tool(&self) -> Tool {
        match self {
            ToolCall::ConstructKg(_) => Tool::ConstructKg,
            ToolCall::GraphSchema => Tool::GraphSchema,
            ToolCall::CypherQuery { .. } => Tool::CypherQuery,
            ToolCall::VisualizeKg { .. } => Tool::VisualizeKg,
            ToolCall::WebSearch { .. } => Tool::WebSearch,
            ToolCall::Vulnerability { .. } => Tool::Vulnerability,
            ToolCall::Question { .. } => Tool::Question,
            ToolCall::Forward { .. } => Tool::Forward,
            ToolCall::UserInteraction { .. } => Tool::UserInteraction,
            ToolCall::Done { .. } => Tool::Done,
            ToolCall::Feedback { .. } => Tool::Feedback,
        }
    }

    pub fn arguments(&self) -> Value {
        match self {
            ToolCall::ConstructKg(p) => json!(p),
            ToolCall::GraphSchema => json!({}),
            ToolCall::CypherQuery { query } => json!({ "query": query }),
            ToolCall::VisualizeKg { format } => json!({ "format": format }),
            ToolCall::WebSearch { query, k } => match k {
                Some(k) => json!({ "query": query, "k": k }),
                None => json!({ "query": query }),
            },
            ToolCall::Vulnerability { packages } => match packages.as_slice() {
                [one] => json!(one),
                many => json!({ "packages": many }),
            },
            ToolCall::Question { question, target_agent } => {
                json!({ "question": question, "target_agent": target_agent })
            }
            ToolCall::Forward { agent } => json!({ "agent": agent }),
            ToolCall::UserInteraction { message } => json!({ "message": message }),
            ToolCall::Done { answer } => json!({ "answer": answer }),
            ToolCall::Feedback { approved, comments } => {
                json!({ "approved": approved, "comments": comments })
            }
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "tool": self.tool().name(), "arguments": self.arguments() })
    }

    pub fn from_parts(name: &str, arguments: Value) -> Result<ToolCall, ToolCallError> {
        let tool = Tool::from_name(name).ok_or_else(|| ToolCallError::UnknownTool(name.to_string()))?;
        let arguments = if arguments.is_null() { json!({}) } else { arguments };
        fn args<T: serde::de::DeserializeOwned>(tool: Tool, v: Value) -> Result<T, ToolCallError> {
            serde_json::from_value(v).map_err(|e| ToolCallError::InvalidArguments {
                tool: tool.name(),
                reason: e.to_string(),
            })
        }
        let invalid = |reason: &str| ToolCallError::InvalidArguments {
            tool: tool.name(),
            reason: reason.to_string(),
        };
        Ok(match tool {
            Tool::ConstructKg => {
                let p: PackageArg = args(tool, arguments)?;
                if p.ecosystem.is_none() {
                    return Err(invalid("missing field `ecosystem`"));
                }
                ToolCall::ConstructKg(p)
            }
            Tool::GraphSchema => {
                args::<Empty>(tool, arguments)?;
                ToolCall::GraphSchema
            }
            Tool::CypherQuery => ToolCall::CypherQuery {
                query: args::<QueryArgs>(tool, arguments)?.query,
            },
            Tool::VisualizeKg => ToolCall::VisualizeKg {
                format: args::<VizArgs>(tool, arguments)?.format.unwrap_or(VizFormat::Dot),
            },
            Tool::WebSearch => {
                let a: SearchArgs = args(tool, arguments)?;
                if a.k == Some(0) {
                    return Err(invalid("k must be at least 1"));
                }
                ToolCall::WebSearch { query: a.query, k: a.k }
            }
            Tool::Vulnerability => {
                let packages = match args::<VulnArgs>(tool, arguments)? {
                    VulnArgs::Many { packages } => packages,
                    VulnArgs::One(p) => vec![p],
                };
                if packages.is_empty() {
                    return Err(invalid("no packages given"));
                }
                ToolCall::Vulnerability { packages }
            }
            Tool::Question => {
                let a: QuestionArgs = args(tool, arguments)?;
                ToolCall::Question {
                    question: a.question,
                    target_agent: a.target_agent,
                }
            }
            Tool::Forward => ToolCall::Forward {
                agent: args::<ForwardArgs>(tool, arguments)?.agent,
            },
            Tool::UserInteraction => ToolCall::UserInteraction {
                message: args::<MessageArgs>(tool, arguments)?.message,
            },
            Tool::Done => ToolCall::Done {
                answer: args::<DoneArgs>(tool, arguments)?.answer,
            },
            Tool::Feedback => {
                let a: FeedbackArgs = args(tool, arguments)?;
                ToolCall::Feedback {
                    approved: a.approved,
                    comments: a.comments,
                }
            }
        })
    }

    pub fn from_json(value: &Value) -> Result<ToolCall, ToolCallError> {
        let name = value
            .get("tool")
            .and_then(Value::as_str)
            .ok_or_else(|| ToolCallError::NotAToolCall("missing string field `tool`".into()))?;
        ToolCall::from_parts(name, value.get("arguments").cloned().unwrap_or(Value::Null))
    }

    /// Extracts a tool call from free text: the whole text, or the first
    /// fenced or brace-delimited JSON object in it.
    pub fn from_text(text: &str) -> Option<Result<ToolCall, ToolCallError>> {
        let trimmed = text.trim();
        let candidates = std::iter::once(trimmed).chain(trimmed.find('{').and_then(|start| {
            trimmed.rfind('}').filter(|end| *end > start).map(|end| &trimmed[start..=end])
        }));
        for candidate in candidates {
            let candidate = candidate
                .trim_start_matches("```json")
                .trim_start_matches("```")
                .trim_end_matches("```")
                .trim();
            if let Ok(value) = serde_json::from_str::<Value>(candidate) {
                if value.get("tool").is_some() {
                    return Some(ToolCall::from_json(&value));
                }
            }
        }
        None
    }
}

impl Serialize for ToolCall {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ToolCall {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(d)?;
        ToolCall::from_json(&value).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for ToolCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}
