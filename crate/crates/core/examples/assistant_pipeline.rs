//! The full assistant pipeline: build the graph, find the most depended-on
//! packages, and check them for known vulnerabilities.
//!
//! Offline by default, using recorded deps.dev and OSV responses and a
//! scripted model (`fixtures/scripts/vulnerable-hubs.json`). Point
//! `LLM_BASE_URL` (plus `LLM_API_KEY`, `LLM_MODEL`) at an OpenAI-compatible
//! endpoint to use a live model instead.

use std::sync::Arc;
use std::time::Duration;

use depkg::agents::{Caps, LlmBackend, OpenAiBackend, OpenAiConfig, Orchestrator, Script, Services};
use depkg::enrich::{OsvClient, StubSearchProvider};
use depkg::fixtures::{self, FixtureServer};
use depkg::ingest::DepsDevClient;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let server = FixtureServer::start_default();
    let services = Services {
        depsdev: Some(DepsDevClient::new(server.base_url(), Duration::from_secs(10))),
        osv: Some(OsvClient::new(server.base_url(), Duration::from_secs(10))),
        search: Arc::new(StubSearchProvider::from_json(fixtures::SEARCH_RESULTS)?),
    };
    let script = Script::from_path(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/scripts/vulnerable-hubs.json").as_ref())?;
    let live = std::env::var("LLM_BASE_URL").ok().map(|base_url| OpenAiConfig {
        base_url,
        api_key: std::env::var("LLM_API_KEY").ok(),
        model: std::env::var("LLM_MODEL").unwrap_or_else(|_| "gpt-4-turbo".into()),
        timeout: Duration::from_secs(120),
    });
    let mut o = Orchestrator::new(services, Caps::default(), &mut |agent| -> Box<dyn LlmBackend> {
        match &live {
            Some(config) => Box::new(OpenAiBackend::new(config.clone())),
            None => Box::new(script.backend(agent)),
        }
    });

    let answer = o.ask(
        "Which packages in A version 1.0.0 (PyPI) have the most dependencies relying on them, \
         and what is the risk associated with a vulnerability in those packages?",
    );
    println!("{}\n", answer.answer);
    print!("{}", answer.report.render_text());
    println!("\n{} transcript entries; first few:", o.transcript().len());
    for line in o.transcript().to_jsonl().lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
