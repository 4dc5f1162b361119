//! Runtime configuration.
//!
//! Settings are `KEY=VALUE` pairs layered as defaults < config file <
//! environment < command-line flags. The config file holds one pair per
//! line; blank lines and lines starting with `#` are ignored, and values may
//! be wrapped in single or double quotes.
//!
//! | key | default |
//! |---|---|
//! | `LLM_BASE_URL` | unset (no live backend) |
//! | `LLM_API_KEY` | unset |
//! | `LLM_MODEL` | `gpt-4-turbo` |
//! | `LLM_SCRIPT` | unset; a JSON script file selects the scripted backend |
//! | `AGENT_PROMPTS` | unset; JSON object of agent name to system prompt |
//! | `DEPSDEV_BASE_URL` | `https://api.deps.dev` |
//! | `OSV_BASE_URL` | `https://api.osv.dev` |
//! | `HTTP_TIMEOUT_SECS` | `30` |
//! | `SEARCH_PROVIDER` | `none` (`stub` reads `SEARCH_FIXTURE_PATH`) |
//! | `SEARCH_FIXTURE_PATH` | unset |
//! | `CRITIC_ENABLED` | `false` |
//! | `MAX_STEPS` | `40` |
//! | `MAX_RETRIES` | `3` |
//! | `CRITIC_ROUNDS` | `10` |
//! | `OSV_CONCURRENCY` | `4` |
//! | `OUTPUT_FORMAT` | `text` |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use crate::agents::{
    AgentError, Caps, LlmBackend, OpenAiBackend, OpenAiConfig, Orchestrator, Script, Services, AGENT_NAMES,
};
use crate::enrich::{NoSearchProvider, OsvClient, SearchProvider, StubSearchProvider};
use crate::graph::DependencyGraph;
use crate::ingest::DepsDevClient;

pub const KEYS: [&str; 16] = [
    "LLM_BASE_URL",
    "LLM_API_KEY",
    "LLM_MODEL",
    "LLM_SCRIPT",
    "AGENT_PROMPTS",
    "DEPSDEV_BASE_URL",
    "OSV_BASE_URL",
    "HTTP_TIMEOUT_SECS",
    "SEARCH_PROVIDER",
    "SEARCH_FIXTURE_PATH",
    "CRITIC_ENABLED",
    "MAX_STEPS",
    "MAX_RETRIES",
    "CRITIC_ROUNDS",
    "OSV_CONCURRENCY",
    "OUTPUT_FORMAT",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}: expected KEY=VALUE")]
    Syntax { path: String, line: usize },
    #[error("{origin}: unknown configuration key `{key}`")]
    UnknownKey { origin: String, key: String },
    #[error("invalid value for {key}: {reason}")]
    InvalidValue { key: &'static str, reason: String },
    #[error("cannot read {0}")]
    Unreadable(String),
    #[error("no language model configured; set LLM_SCRIPT or LLM_BASE_URL")]
    NoBackend,
    #[error("{0}")]
    Backend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchKind {
    None,
    Stub(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub llm_base_url: Option<String>,
    pub llm_api_key: Option<String>,
    pub llm_model: String,
    pub llm_script: Option<PathBuf>,
    pub agent_prompts: Option<PathBuf>,
    pub depsdev_base_url: String,
    pub osv_base_url: String,
    pub http_timeout: Duration,
    pub search: SearchKind,
    pub critic_enabled: bool,
    pub caps: Caps,
    pub osv_concurrency: usize,
    pub output: OutputFormat,
}

impl Default for Config {
    fn default() -> Self {
        Self::from_pairs(&BTreeMap::new()).expect("defaults are valid")
    }
}

/// Parses the `KEY=VALUE` config-file format.
pub fn parse_config_file(text: &str, path: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut pairs = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
            path: path.to_string(),
            line: i + 1,
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                origin: format!("{path}:{}", i + 1),
                key: key.to_string(),
            });
        }
        let value = value.trim();
        let unquoted = ['"', '\'']
            .iter()
            .find_map(|q| value.strip_prefix(*q).and_then(|v| v.strip_suffix(*q)))
            .unwrap_or(value);
        pairs.insert(key.to_string(), unquoted.to_string());
    }
    Ok(pairs)
}

fn url(key: &'static str, value: &str) -> Result<String, ConfigError> {
    url::Url::parse(value).map_err(|e| ConfigError::InvalidValue {
        key,
        reason: format!("`{value}` is not a URL ({e})"),
    })?;
    Ok(value.trim_end_matches('/').to_string())
}

fn positive(key: &'static str, value: &str) -> Result<usize, ConfigError> {
    match value.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(ConfigError::InvalidValue {
            key,
            reason: format!("`{value}` is not a positive integer"),
        }),
    }
}

fn boolean(key: &'static str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            key,
            reason: format!("`{value}` is not a boolean"),
        }),
    }
}

impl Config {
    /// Layers the sources, later ones winning.
    pub fn resolve(
        file: Option<&Path>,
        env: &dyn Fn(&str) -> Option<String>,
        flags: &BTreeMap<String, String>,
    ) -> Result<Config, ConfigError> {
        let mut pairs = BTreeMap::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable(format!("{}: {e}", path.display())))?;
            pairs.extend(parse_config_file(&text, &path.display().to_string())?);
        }
        for key in KEYS {
            if let Some(v) = env(key) {
                pairs.insert(key.to_string(), v);
            }
        }
        for (k, v) in flags {
            if !KEYS.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey {
                    origin: "flags".into(),
                    key: k.clone(),
                });
            }
            pairs.insert(k.clone(), v.clone());
        }
        Self::from_pairs(&pairs)
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Config, ConfigError> {
        let get = |k: &str| pairs.get(k).map(String::as_str).filter(|v| !v.is_empty());
        let caps = Caps {
            max_steps: get("MAX_STEPS").map(|v| positive("MAX_STEPS", v)).transpose()?.unwrap_or(40),
            max_retries: get("MAX_RETRIES").map(|v| positive("MAX_RETRIES", v)).transpose()?.unwrap_or(3),
            critic_rounds: get("CRITIC_ROUNDS").map(|v| positive("CRITIC_ROUNDS", v)).transpose()?.unwrap_or(10),
        };
        let search = match get("SEARCH_PROVIDER").unwrap_or("none") {
            "none" => SearchKind::None,
            "stub" => SearchKind::Stub(
                get("SEARCH_FIXTURE_PATH")
                    .map(PathBuf::from)
                    .ok_or(ConfigError::InvalidValue {
                        key: "SEARCH_FIXTURE_PATH",
                        reason: "required when SEARCH_PROVIDER=stub".into(),
                    })?,
            ),
            other => {
                return Err(ConfigError::InvalidValue {
                    key: "SEARCH_PROVIDER",
                    reason: format!("`{other}` is not one of none, stub"),
                })
            }
        };
        let output = match get("OUTPUT_FORMAT").unwrap_or("text") {
            "text" => OutputFormat::Text,
            "json" => OutputFormat::Json,
            other => {
                return Err(ConfigError::InvalidValue {
                    key: "OUTPUT_FORMAT",
                    reason: format!("`{other}` is not one of text, json"),
                })
            }
        };
        Ok(Config {
            llm_base_url: get("LLM_BASE_URL").map(|v| url("LLM_BASE_URL", v)).transpose()?,
            llm_api_key: get("LLM_API_KEY").map(str::to_string),
            llm_model: get("LLM_MODEL").unwrap_or("gpt-4-turbo").to_string(),
            llm_script: get("LLM_SCRIPT").map(PathBuf::from),
            agent_prompts: get("AGENT_PROMPTS").map(PathBuf::from),
            depsdev_base_url: url("DEPSDEV_BASE_URL", get("DEPSDEV_BASE_URL").unwrap_or(crate::ingest::DEFAULT_DEPSDEV_BASE_URL))?,
            osv_base_url: url("OSV_BASE_URL", get("OSV_BASE_URL").unwrap_or(crate::enrich::DEFAULT_OSV_BASE_URL))?,
            http_timeout: Duration::from_secs(
                get("HTTP_TIMEOUT_SECS").map(|v| positive("HTTP_TIMEOUT_SECS", v)).transpose()?.unwrap_or(30) as u64,
            ),
            search,
            critic_enabled: get("CRITIC_ENABLED").map(|v| boolean("CRITIC_ENABLED", v)).transpose()?.unwrap_or(false),
            caps,
            osv_concurrency: get("OSV_CONCURRENCY").map(|v| positive("OSV_CONCURRENCY", v)).transpose()?.unwrap_or(4),
            output,
        })
    }

    pub fn depsdev(&self) -> DepsDevClient {
        DepsDevClient::new(self.depsdev_base_url.clone(), self.http_timeout)
    }

    pub fn services(&self) -> Result<Services, ConfigError> {
        let search: Arc<dyn SearchProvider> = match &self.search {
            SearchKind::None => Arc::new(NoSearchProvider),
            SearchKind::Stub(path) => {
                Arc::new(StubSearchProvider::from_path(path).map_err(|e| ConfigError::Unreadable(e.to_string()))?)
            }
        };
        Ok(Services {
            depsdev: Some(self.depsdev()),
            osv: Some(OsvClient::new(self.osv_base_url.clone(), self.http_timeout).with_concurrency(self.osv_concurrency)),
            search,
        })
    }

    /// The configured language model; a script takes precedence over a
    /// live endpoint.
    pub fn backend_source(&self) -> Result<BackendSource, ConfigError> {
        if let Some(path) = &self.llm_script {
            return Script::from_path(path)
                .map(BackendSource::Scripted)
                .map_err(|e| ConfigError::Backend(e.to_string()));
        }
        match &self.llm_base_url {
            Some(base_url) => Ok(BackendSource::Live(OpenAiConfig {
                base_url: base_url.clone(),
                api_key: self.llm_api_key.clone(),
                model: self.llm_model.clone(),
                timeout: self.http_timeout,
            })),
            None => Err(ConfigError::NoBackend),
        }
    }

    fn prompts(&self) -> Result<BTreeMap<String, String>, ConfigError> {
        let Some(path) = &self.agent_prompts else {
            return Ok(BTreeMap::new());
        };
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable(format!("{}: {e}", path.display())))?;
        let prompts: BTreeMap<String, String> = serde_json::from_str(&text).map_err(|e| ConfigError::InvalidValue {
            key: "AGENT_PROMPTS",
            reason: e.to_string(),
        })?;
        if let Some(unknown) = prompts.keys().find(|k| !AGENT_NAMES.contains(&k.as_str())) {
            return Err(ConfigError::InvalidValue {
                key: "AGENT_PROMPTS",
                reason: format!("unknown agent `{unknown}`"),
            });
        }
        Ok(prompts)
    }

    /// A session orchestrator wired to the configured services and backend.
    pub fn orchestrator(
        &self,
        source: &BackendSource,
        graph: Option<Arc<DependencyGraph>>,
    ) -> Result<Orchestrator, ConfigError> {
        self.orchestrator_with(&mut |agent| source.backend(agent), graph)
    }

    pub fn orchestrator_with(
        &self,
        backends: &mut dyn FnMut(&str) -> Box<dyn LlmBackend>,
        graph: Option<Arc<DependencyGraph>>,
    ) -> Result<Orchestrator, ConfigError> {
        let mut o = Orchestrator::new(self.services()?, self.caps, backends).with_critic(self.critic_enabled);
        for (agent, prompt) in self.prompts()? {
            o.set_instructions(&agent, &prompt).map_err(|e: AgentError| ConfigError::Backend(e.to_string()))?;
        }
        if let Some(g) = graph {
            o.set_graph(g);
        }
        Ok(o)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendSource {
    Scripted(Script),
    Live(OpenAiConfig),
}

impl BackendSource {
    pub fn backend(&self, agent: &str) -> Box<dyn LlmBackend> {
        match self {
            BackendSource::Scripted(script) => Box::new(script.backend(agent)),
            BackendSource::Live(config) => Box::new(OpenAiBackend::new(config.clone())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env(_: &str) -> Option<String> {
        None
    }

    #[test]
    fn defaults() {
        let c = Config::default();
        assert_eq!(c.depsdev_base_url, "https://api.deps.dev");
        assert_eq!(c.caps, Caps::default());
        assert_eq!(c.http_timeout, Duration::from_secs(30));
        assert!(!c.critic_enabled);
        assert_eq!(c.backend_source(), Err(ConfigError::NoBackend));
    }

    #[test]
    fn precedence_flags_env_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("depkg.conf");
        std::fs::write(
            &path,
            "# comment\nOSV_BASE_URL = \"http://file.invalid\"\nMAX_STEPS=5\nCRITIC_ENABLED=yes\nLLM_MODEL=file-model\n",
        )
        .unwrap();
        let env = |k: &str| match k {
            "MAX_STEPS" => Some("6".to_string()),
            "LLM_MODEL" => Some("env-model".to_string()),
            _ => None,
        };
        let flags = BTreeMap::from([("LLM_MODEL".to_string(), "flag-model".to_string())]);
        let c = Config::resolve(Some(&path), &env, &flags).unwrap();
        assert_eq!(c.osv_base_url, "http://file.invalid");
        assert_eq!(c.caps.max_steps, 6);
        assert_eq!(c.llm_model, "flag-model");
        assert!(c.critic_enabled);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |k: &str, v: &str| Config::from_pairs(&BTreeMap::from([(k.to_string(), v.to_string())])).unwrap_err();
        assert!(matches!(bad("MAX_STEPS", "0"), ConfigError::InvalidValue { key: "MAX_STEPS", .. }));
        assert!(matches!(bad("DEPSDEV_BASE_URL", "not a url"), ConfigError::InvalidValue { .. }));
        assert!(matches!(bad("CRITIC_ENABLED", "maybe"), ConfigError::InvalidValue { .. }));
        assert!(matches!(bad("SEARCH_PROVIDER", "stub"), ConfigError::InvalidValue { key: "SEARCH_FIXTURE_PATH", .. }));
        assert!(matches!(parse_config_file("FOO=1", "f"), Err(ConfigError::UnknownKey { .. })));
        assert!(matches!(parse_config_file("no equals", "f"), Err(ConfigError::Syntax { line: 1, .. })));
        let flags = BTreeMap::from([("NOPE".to_string(), "1".to_string())]);
        assert!(Config::resolve(None, &no_env, &flags).is_err());
    }

    #[test]
    fn script_selects_scripted_backend() {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("script.json");
        std::fs::write(&script, r#"{"AssistantAgent": [{"tool": "done", "arguments": {"answer": "4"}}]}"#).unwrap();
        let pairs = BTreeMap::from([
            ("LLM_SCRIPT".to_string(), script.display().to_string()),
            ("LLM_BASE_URL".to_string(), "http://127.0.0.1:1".to_string()),
        ]);
        let c = Config::from_pairs(&pairs).unwrap();
        let source = c.backend_source().unwrap();
        assert!(matches!(source, BackendSource::Scripted(_)));
        let mut o = c.orchestrator(&source, None).unwrap();
        assert_eq!(o.ask("q").answer, "4");
    }

    #[test]
    fn prompt_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let prompts = dir.path().join("prompts.json");
        std::fs::write(&prompts, r#"{"CriticAgent": "Be strict."}"#).unwrap();
        let pairs = BTreeMap::from([("AGENT_PROMPTS".to_string(), prompts.display().to_string())]);
        let c = Config::from_pairs(&pairs).unwrap();
        let o = c.orchestrator(&BackendSource::Scripted(Script::default()), None).unwrap();
        assert_eq!(o.spec(crate::agents::CRITIC).unwrap().instructions, "Be strict.");
        std::fs::write(&prompts, r#"{"Nobody": "x"}"#).unwrap();
        assert!(c.orchestrator(&BackendSource::Scripted(Script::default()), None).is_err());
    }
}
