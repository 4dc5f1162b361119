mod common;

use std::path::Path;
use std::process::Command;

use depkg::cli::{self, Io};
use depkg::fixtures::FixtureServer;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run_with(args: &[&str], env: &[(&str, &str)], stdin: &str) -> Outcome {
    let env: Vec<(String, String)> = env.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    let lookup = move |key: &str| env.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone());
    let mut input = stdin.as_bytes();
    let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
    let code = cli::run(
        std::iter::once("depkg").chain(args.iter().copied()),
        &lookup,
        Io {
            stdin: &mut input,
            stdout: &mut stdout,
            stderr: &mut stderr,
        },
    );
    Outcome {
        code,
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

fn run(args: &[&str]) -> Outcome {
    run_with(args, &[], "")
}

struct Workspace {
    _dir: tempfile::TempDir,
    state: String,
    server: FixtureServer,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let state = dir.path().join("graph.json").display().to_string();
        Self {
            _dir: dir,
            state,
            server: common::fixture_server(),
        }
    }

    /// `args` followed by the state file and fixture endpoints.
    fn run(&self, args: &[&str]) -> Outcome {
        self.run_stdin(args, "")
    }

    fn run_stdin(&self, args: &[&str], stdin: &str) -> Outcome {
        let base = self.server.base_url();
        let search = common::manifest_path("fixtures/search.json").display().to_string();
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--state", &self.state, "--depsdev-url", &base, "--osv-url", &base]);
        run_with(
            &full,
            &[("SEARCH_PROVIDER", "stub"), ("SEARCH_FIXTURE_PATH", &search)],
            stdin,
        )
    }

    fn built(self) -> Self {
        let out = self.run(&["build", "pypi", "A", "1.0.0"]);
        assert_eq!(out.code, 0, "{}", out.stderr);
        self
    }
}

fn script_path(name: &str) -> String {
    common::manifest_path(&format!("fixtures/scripts/{name}")).display().to_string()
}

#[test]
fn build_then_query_stats_and_viz() {
    let ws = Workspace::new();
    let out = ws.run(&["build", "pypi", "A", "1.0.0"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("4 packages"), "{}", out.stdout);
    assert!(Path::new(&ws.state).exists());

    let out = ws.run(&[
        "query",
        "--format",
        "json",
        "MATCH p=(a:Package)-[:DEPENDS_ON*]->(b:Package) RETURN count(p) AS paths",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let table: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(table, serde_json::json!({"columns": ["paths"], "rows": [[6]]}));

    let out = ws.run(&["stats"]);
    assert!(out.stdout.contains("density: 0.3333"));
    assert!(out.stdout.contains("root-to-leaf paths: 2"));
    assert!(out.stdout.contains("2 D@1.0.0"));

    let out = ws.run(&["stats", "--format", "json"]);
    let stats: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(stats["metrics"]["depth"], 2);

    let out = ws.run(&["viz"]);
    assert!(out.stdout.starts_with("digraph g {\n"));
    assert_eq!(out.stdout.matches(" -> ").count(), 4);
    let out = ws.run(&["viz", "--format", "node-link"]);
    let doc: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(doc["links"].as_array().unwrap().len(), 4);
}

#[test]
fn exit_codes() {
    let ws = Workspace::new();
    assert_eq!(ws.run(&["stats"]).code, cli::EXIT_NOT_FOUND);
    assert_eq!(ws.run(&["build", "pypi", "missing", "0.0.1"]).code, cli::EXIT_NOT_FOUND);
    let out = ws.run(&["build", "pypi", "broken", "1.0.0"]);
    assert_eq!(out.code, cli::EXIT_NETWORK);
    assert!(out.stderr.contains("HTTP 500"));
    assert_eq!(run(&["build", "pypi", "A", "1.0.0", "--depsdev-url", "http://127.0.0.1:9"]).code, cli::EXIT_NETWORK);
    assert_eq!(run(&["build", "hackage", "A", "1.0.0"]).code, cli::EXIT_USAGE);
    assert_eq!(run(&["frobnicate"]).code, cli::EXIT_USAGE);
    assert_eq!(run(&["stats", "--set", "MAX_STEPS=0"]).code, cli::EXIT_USAGE);
    assert_eq!(run(&["--help"]).code, cli::EXIT_OK);

    let ws = ws.built();
    let out = ws.run(&["query", "MATCH (n:Pkg) RETURN n"]);
    assert_eq!(out.code, cli::EXIT_QUERY);
    assert!(out.stderr.contains("UnknownLabel"));
    assert!(out.stdout.is_empty());
    assert_eq!(ws.run(&["ask", "What is the density?"]).code, cli::EXIT_BACKEND);
    let out = ws.run(&["ask", "--llm-script", &script_path("density.json"), "--critic", "Density?"]);
    assert_eq!(out.code, cli::EXIT_BACKEND, "critic has no script, so the run must fail");
}

#[test]
fn ask_answers_from_the_saved_graph() {
    let ws = Workspace::new().built();
    let out = ws.run(&["ask", "--llm-script", &script_path("density.json"), "What is the density of the graph?"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.starts_with("The graph has 4 packages and 4 DEPENDS_ON edges"));
    assert!(out.stdout.contains("density 0.3333"));
}

#[test]
fn ask_builds_and_saves_the_graph() {
    let ws = Workspace::new();
    let out = ws.run(&[
        "ask",
        "--format",
        "json",
        "--llm-script",
        &script_path("vulnerable-hubs.json"),
        "Which packages are most depended on, and are they vulnerable?",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let answer: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(answer["report"]["top_in_degree"][0]["package"], "D@1.0.0");
    assert!(Path::new(&ws.state).exists());
    assert_eq!(ws.run(&["stats"]).code, 0);
}

#[test]
fn chat_reads_until_quit() {
    let ws = Workspace::new().built();
    let out = ws.run_stdin(
        &["chat", "--llm-script", &script_path("density.json")],
        "What is the density?\n\n/quit\nnever asked\n",
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(out.stdout.matches("density is").count(), 1);
    assert!(out.stderr.contains("/quit"));
}

#[test]
fn config_file_and_environment_layers() {
    let ws = Workspace::new();
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("depkg.conf");
    std::fs::write(&conf, format!("DEPSDEV_BASE_URL={}\n", ws.server.base_url())).unwrap();
    let conf = conf.display().to_string();
    let state = dir.path().join("g.json").display().to_string();
    let build = ["build", "pypi", "A", "1.0.0", "--config", &conf, "--state", &state];
    assert_eq!(run(&build).code, 0);
    let out = run_with(&build, &[("DEPSDEV_BASE_URL", "http://127.0.0.1:9")], "");
    assert_eq!(out.code, cli::EXIT_NETWORK);
    let mut with_flag = build.to_vec();
    let base = ws.server.base_url();
    with_flag.extend(["--depsdev-url", &base]);
    assert_eq!(run_with(&with_flag, &[("DEPSDEV_BASE_URL", "http://127.0.0.1:9")], "").code, 0);
}

#[test]
fn binary_runs() {
    let bin = env!("CARGO_BIN_EXE_depkg");
    let out = Command::new(bin).arg("--version").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("depkg "));

    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(bin)
        .args(["query", "MATCH (n:Package) RETURN n"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(cli::EXIT_NOT_FOUND));
    assert!(String::from_utf8_lossy(&out.stderr).contains(cli::DEFAULT_STATE_FILE));
}
