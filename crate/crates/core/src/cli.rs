//! The `depkg` command line.
//!
//! Results go to stdout and diagnostics to stderr. Exit codes:
//!
//! | code | meaning |
//! |---|---|
//! | 0 | success |
//! | 1 | usage or configuration error |
//! | 2 | package or graph not found |
//! | 3 | network or upstream failure |
//! | 4 | query error |
//! | 5 | language-model backend failure |
//!
//! `build` saves the graph as node-link JSON in the state file
//! (`.depkg-graph.json` unless `--state` says otherwise); `query`, `stats`,
//! `viz`, `ask` and `chat` load it from there, or from `--graph FILE`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use crate::agents::{AgentError, FinalAnswer, Orchestrator};
use crate::analytics;
use crate::config::{Config, ConfigError, OutputFormat};
use crate::graph::{DependencyGraph, Ecosystem, NodeLinkDocument, PackageCoordinates};
use crate::ingest::IngestError;
use crate::query::QueryError;
use crate::service::{self, ServiceState};

pub const DEFAULT_STATE_FILE: &str = ".depkg-graph.json";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_FOUND: i32 = 2;
pub const EXIT_NETWORK: i32 = 3;
pub const EXIT_QUERY: i32 = 4;
pub const EXIT_BACKEND: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "depkg", version, about = "Build, query and ask questions about package dependency graphs")]
pub struct Cli {
    /// KEY=VALUE configuration file (defaults to $DEPKG_CONFIG when set).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Where `build` saves the graph and other commands load it.
    #[arg(long, global = true, value_name = "FILE")]
    state: Option<PathBuf>,
    /// Read the graph from this node-link file instead of the state file.
    #[arg(long, global = true, value_name = "FILE")]
    graph: Option<PathBuf>,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Scripted language-model responses (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    llm_script: Option<PathBuf>,
    #[arg(long, global = true, value_name = "URL")]
    depsdev_url: Option<String>,
    #[arg(long, global = true, value_name = "URL")]
    osv_url: Option<String>,
    /// Have the critic review answers.
    #[arg(long, global = true, overrides_with = "no_critic")]
    critic: bool,
    #[arg(long, global = true)]
    no_critic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fetch a package's dependency graph from deps.dev and save it.
    Build {
        /// pypi, npm, cargo or go.
        ecosystem: String,
        name: String,
        version: String,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Run a Cypher query against the saved graph.
    Query {
        query: String,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Print graph metrics.
    Stats {
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Export the graph for visualisation.
    Viz {
        #[arg(long, value_enum, default_value = "dot")]
        format: VizFormat,
        /// Write to a file instead of stdout.
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Ask the assistant one question.
    Ask {
        question: String,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Ask questions interactively; `/quit` ends the session.
    Chat,
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Do not send CORS headers.
        #[arg(long)]
        no_cors: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VizFormat {
    Dot,
    NodeLink,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Network(String),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("{0}")]
    Backend(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => EXIT_USAGE,
            CliError::Config(ConfigError::NoBackend | ConfigError::Backend(_)) => EXIT_BACKEND,
            CliError::Config(_) => EXIT_USAGE,
            CliError::NotFound(_) => EXIT_NOT_FOUND,
            CliError::Network(_) => EXIT_NETWORK,
            CliError::Query(_) => EXIT_QUERY,
            CliError::Backend(_) => EXIT_BACKEND,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::UnknownPackage(_) => CliError::NotFound(e.to_string()),
            IngestError::Network(_) | IngestError::Decode(_) => CliError::Network(e.to_string()),
        }
    }
}

impl From<AgentError> for CliError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Ingest(inner) => inner.into(),
            other => CliError::Backend(other.to_string()),
        }
    }
}

/// Process environment access, injectable for tests.
pub type Env<'a> = &'a dyn Fn(&str) -> Option<String>;

pub struct Io<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the exit code.
pub fn run<I, T>(args: I, env: Env<'_>, io: Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let mut io = io;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(io.stdout, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(io.stderr, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli, env, &mut io) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn flag_pairs(cli: &Cli) -> Result<BTreeMap<String, String>, CliError> {
    let mut flags = BTreeMap::new();
    for pair in &cli.set {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{pair}`")))?;
        flags.insert(k.trim().to_string(), v.trim().to_string());
    }
    if let Some(p) = &cli.llm_script {
        flags.insert("LLM_SCRIPT".into(), p.display().to_string());
    }
    if let Some(u) = &cli.depsdev_url {
        flags.insert("DEPSDEV_BASE_URL".into(), u.clone());
    }
    if let Some(u) = &cli.osv_url {
        flags.insert("OSV_BASE_URL".into(), u.clone());
    }
    if cli.critic {
        flags.insert("CRITIC_ENABLED".into(), "true".into());
    }
    if cli.no_critic {
        flags.insert("CRITIC_ENABLED".into(), "false".into());
    }
    Ok(flags)
}

fn format_of(flag: Option<Format>, config: &Config) -> Format {
    flag.unwrap_or(match config.output {
        OutputFormat::Text => Format::Text,
        OutputFormat::Json => Format::Json,
    })
}

struct Paths {
    state: PathBuf,
    graph: Option<PathBuf>,
}

impl Paths {
    fn load(&self) -> Result<DependencyGraph, CliError> {
        self.try_load()?.ok_or_else(|| {
            CliError::NotFound(format!(
                "no graph at {}; run `depkg build` first or pass --graph",
                self.state.display()
            ))
        })
    }

    fn try_load(&self) -> Result<Option<DependencyGraph>, CliError> {
        let path = self.graph.as_ref().unwrap_or(&self.state);
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound && self.graph.is_none() => return Ok(None),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(CliError::NotFound(format!("{}: {e}", path.display())))
            }
            Err(e) => return Err(CliError::Io(format!("{}: {e}", path.display()))),
        };
        let doc: NodeLinkDocument = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{} is not a node-link graph: {e}", path.display())))?;
        DependencyGraph::import_node_link(&doc)
            .map(Some)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    fn save(&self, graph: &DependencyGraph) -> Result<(), CliError> {
        write_file(&self.state, &to_json(&graph.export_node_link()))
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serialisable") + "\n"
}

fn out(stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
    stdout
        .write_all(text.as_bytes())
        .and_then(|_| stdout.flush())
        .map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn execute(cli: Cli, env: Env<'_>, io: &mut Io<'_>) -> Result<(), CliError> {
    let flags = flag_pairs(&cli)?;
    let config_file = cli.config.clone().or_else(|| env("DEPKG_CONFIG").map(PathBuf::from));
    let config = Config::resolve(config_file.as_deref(), env, &flags)?;
    let paths = Paths {
        state: cli.state.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_STATE_FILE)),
        graph: cli.graph.clone(),
    };
    let Io { stdin, stdout, stderr } = io;
    let (stdin, stdout, stderr) = (&mut **stdin, &mut **stdout, &mut **stderr);

    match cli.command {
        Command::Build { ecosystem, name, version, format } => {
            let ecosystem: Ecosystem = ecosystem.parse().map_err(|e: crate::graph::GraphError| CliError::Usage(e.to_string()))?;
            let coords = PackageCoordinates::new(ecosystem, name, version).map_err(|e| CliError::Usage(e.to_string()))?;
            let (graph, report) = config.depsdev().construct(&coords)?;
            paths.save(&graph)?;
            match format_of(format, &config) {
                Format::Text => out(stdout, &format!("{}\nSaved to {}\n", report.summary(), paths.state.display())),
                Format::Json => out(stdout, &to_json(&report)),
            }
        }
        Command::Query { query, format } => {
            let graph = paths.load()?;
            let table = crate::query::run(&graph, &query)?;
            match format_of(format, &config) {
                Format::Text => out(stdout, &table.render_text()),
                Format::Json => out(stdout, &to_json(&table)),
            }
        }
        Command::Stats { format } => {
            let graph = paths.load()?;
            let metrics = analytics::metrics(&graph);
            let top = analytics::top_in_degree(&graph, 5);
            match format_of(format, &config) {
                Format::Json => {
                    let top: Vec<_> = top
                        .iter()
                        .map(|e| serde_json::json!({ "package": e.node.label(), "in_degree": e.in_degree }))
                        .collect();
                    out(stdout, &to_json(&serde_json::json!({ "metrics": metrics, "top_in_degree": top })))
                }
                Format::Text => {
                    let mut text = format!(
                        "nodes: {}\nedges: {}\ndensity: {:.4}\ndepth: {}\ncycles: {}\nroot-to-leaf paths: {}\n",
                        metrics.node_count,
                        metrics.edge_count,
                        metrics.density,
                        metrics.depth,
                        if metrics.has_cycles { "yes" } else { "no" },
                        metrics.root_leaf_path_count
                    );
                    if !top.is_empty() {
                        text.push_str("highest in-degree:\n");
                        for e in top {
                            text.push_str(&format!("  {} {}\n", e.in_degree, e.node.label()));
                        }
                    }
                    out(stdout, &text)
                }
            }
        }
        Command::Viz { format, output } => {
            let graph = paths.load()?;
            let text = match format {
                VizFormat::Dot => analytics::render_dot(&graph),
                VizFormat::NodeLink => to_json(&graph.export_node_link()),
            };
            match output {
                Some(path) => write_file(&path, &text),
                None => out(stdout, &text),
            }
        }
        Command::Ask { question, format } => {
            let format = format_of(format, &config);
            let mut session = Chat::open(&config, &paths)?;
            let answer = session.ask(&question, &paths)?;
            out(stdout, &render_answer(&answer, format))?;
            match answer.failure {
                Some(e) => Err(e.into()),
                None => Ok(()),
            }
        }
        Command::Chat => {
            let format = format_of(None, &config);
            let mut session = Chat::open(&config, &paths)?;
            let _ = writeln!(stderr, "Ask about a package's dependencies; /quit to leave.");
            let mut line = String::new();
            loop {
                let _ = write!(stderr, "> ");
                let _ = stderr.flush();
                line.clear();
                let read = stdin.read_line(&mut line).map_err(|e| CliError::Io(format!("stdin: {e}")))?;
                let text = line.trim();
                if read == 0 || text == "/quit" {
                    return Ok(());
                }
                if text.is_empty() {
                    continue;
                }
                let answer = session.ask(text, &paths)?;
                out(stdout, &render_answer(&answer, format))?;
                if let Some(e) = &answer.failure {
                    let _ = writeln!(stderr, "error: {e}");
                }
            }
        }
        Command::Serve { bind, port, no_cors } => {
            let state = ServiceState::from_config(config)?;
            let addr = SocketAddr::new(bind, port);
            let _ = writeln!(stderr, "listening on http://{addr}");
            service::serve_blocking(addr, state, !no_cors).map_err(|e| CliError::Io(format!("{addr}: {e}")))
        }
    }
}

struct Chat {
    orchestrator: Orchestrator,
    saved_revision: u64,
}

impl Chat {
    fn open(config: &Config, paths: &Paths) -> Result<Chat, CliError> {
        let source = config.backend_source()?;
        let graph = paths.try_load()?.map(Arc::new);
        let orchestrator = config.orchestrator(&source, graph)?;
        Ok(Chat {
            saved_revision: orchestrator.graph_revision(),
            orchestrator,
        })
    }

    /// Asks one question and saves the graph if this turn rebuilt it.
    fn ask(&mut self, question: &str, paths: &Paths) -> Result<FinalAnswer, CliError> {
        let answer = self.orchestrator.ask(question);
        if self.orchestrator.graph_revision() != self.saved_revision {
            if let Some(g) = self.orchestrator.graph() {
                paths.save(g)?;
            }
            self.saved_revision = self.orchestrator.graph_revision();
        }
        Ok(answer)
    }
}

fn render_answer(answer: &FinalAnswer, format: Format) -> String {
    match format {
        Format::Json => to_json(&serde_json::json!({
            "answer": answer.answer,
            "report": answer.report,
            "rounds": answer.rounds,
            "approved": answer.approved,
        })),
        Format::Text => {
            let report = answer.report.render_text();
            if report.is_empty() {
                format!("{}\n", answer.answer)
            } else {
                format!("{}\n\n{report}", answer.answer)
            }
        }
    }
}
