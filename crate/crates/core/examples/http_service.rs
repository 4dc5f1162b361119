//! The JSON API: build a graph, query it, and ask a question in a session.

use serde_json::{json, Value};

use depkg::agents::Script;
use depkg::config::{BackendSource, Config};
use depkg::fixtures::{BackgroundServer, FixtureServer};
use depkg::http::{HttpClient, DEFAULT_TIMEOUT};
use depkg::service::{self, ServiceState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let upstream = FixtureServer::start_default();
    let config = Config {
        depsdev_base_url: upstream.base_url(),
        osv_base_url: upstream.base_url(),
        ..Config::default()
    };
    let script = BackendSource::Scripted(Script::from_path(
        concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/scripts/density.json").as_ref(),
    )?);
    let state = ServiceState::new(config, std::sync::Arc::new(move |agent: &str| script.backend(agent)));
    let api = BackgroundServer::spawn(service::router(state, true));
    let base = api.base_url();
    println!("serving on {base}");

    let http = HttpClient::new(DEFAULT_TIMEOUT);
    let post = |path: &str, body: Value| -> Result<(), Box<dyn std::error::Error>> {
        let r = http.post_json(&format!("{base}{path}"), &body, &[])?;
        println!("POST {path} -> {}\n  {}", r.status, r.body);
        Ok(())
    };
    let get = |path: &str| -> Result<(), Box<dyn std::error::Error>> {
        let r = http.get(&format!("{base}{path}"))?;
        println!("GET {path} -> {}\n  {}", r.status, r.body);
        Ok(())
    };

    post("/api/graphs", json!({"ecosystem": "pypi", "name": "A", "version": "1.0.0"}))?;
    get("/api/graphs/g1/metrics")?;
    post("/api/graphs/g1/query", json!({"query": "MATCH (p:Package)<-[:DEPENDS_ON]-(d) RETURN p.name, count(d) ORDER BY count(d) DESC LIMIT 1"}))?;
    post("/api/graphs/g1/query", json!({"query": "MATCH (p:Pkg) RETURN p"}))?;
    post("/api/sessions", json!({"graph_id": "g1"}))?;
    post("/api/sessions/s1/messages", json!({"text": "What is the density of the graph?"}))?;
    get("/api/sessions/s1/transcript?from=17")?;
    Ok(())
}
