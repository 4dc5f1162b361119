//! Reproducible graphs and recorded HTTP responses used by the examples and
//! test suites.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{DependencyGraph, Ecosystem, NodeId, PackageCoordinates};

/// deps.dev response for chainlit 1.1.200 (PyPI) trimmed to two direct
/// dependencies.
pub const DEPSDEV_CHAINLIT: &str = include_str!("../fixtures/depsdev/chainlit-1.1.200.json");
/// deps.dev response whose graph is the diamond [`diamond`], rooted at A 1.0.0.
pub const DEPSDEV_DIAMOND: &str = include_str!("../fixtures/depsdev/a-1.0.0.json");
/// OSV response for D 1.0.0: GHSA-TEST-0001 and PYSEC-TEST-0002.
pub const OSV_D: &str = include_str!("../fixtures/osv/D-1.0.0.json");
/// OSV response for B 1.0.0: GHSA-TEST-0003.
pub const OSV_B: &str = include_str!("../fixtures/osv/B-1.0.0.json");
/// Stub web-search results keyed by query substring.
pub const SEARCH_RESULTS: &str = include_str!("../fixtures/search.json");

fn build(names: &[(&str, &str)], edges: &[(usize, usize)]) -> DependencyGraph {
    let mut g = DependencyGraph::new(Ecosystem::PyPI);
    let ids: Vec<NodeId> = names
        .iter()
        .map(|(n, v)| g.upsert_node(n, v).expect("fixture node"))
        .collect();
    for &(f, t) in edges {
        g.add_edge(ids[f], ids[t]).expect("fixture edge");
    }
    g
}

/// The diamond: A, B, C, D at 1.0.0 with A→B, A→C, B→D, C→D; root A.
pub fn diamond() -> DependencyGraph {
    build(
        &[("A", "1.0.0"), ("B", "1.0.0"), ("C", "1.0.0"), ("D", "1.0.0")],
        &[(0, 1), (0, 2), (1, 3), (2, 3)],
    )
}

/// The diamond with the root renamed to chainlit 1.1.200.
pub fn diamond_as_chainlit() -> DependencyGraph {
    build(
        &[("chainlit", "1.1.200"), ("B", "1.0.0"), ("C", "1.0.0"), ("D", "1.0.0")],
        &[(0, 1), (0, 2), (1, 3), (2, 3)],
    )
}

/// A→X@1.0 and B→X@2.0 under a root R.
pub fn g2() -> DependencyGraph {
    build(
        &[("R", "1.0"), ("A", "1.0"), ("B", "1.0"), ("X", "1.0"), ("X", "2.0")],
        &[(0, 1), (0, 2), (1, 3), (2, 4)],
    )
}

/// A→B→…, `len` nodes in a line.
pub fn chain(len: usize) -> DependencyGraph {
    let names: Vec<String> = (0..len).map(|i| ((b'A' + i as u8) as char).to_string()).collect();
    let refs: Vec<(&str, &str)> = names.iter().map(|n| (n.as_str(), "1.0.0")).collect();
    let edges: Vec<(usize, usize)> = (1..len).map(|i| (i - 1, i)).collect();
    build(&refs, &edges)
}

/// A→B→C→A.
pub fn triangle() -> DependencyGraph {
    build(
        &[("A", "1.0.0"), ("B", "1.0.0"), ("C", "1.0.0")],
        &[(0, 1), (1, 2), (2, 0)],
    )
}

/// Complete directed graph on `n` nodes.
pub fn complete(n: usize) -> DependencyGraph {
    let names: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    let refs: Vec<(&str, &str)> = names.iter().map(|s| (s.as_str(), "1.0.0")).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                edges.push((i, j));
            }
        }
    }
    build(&refs, &edges)
}

fn random_nodes(rng: &mut ChaCha8Rng, g: &mut DependencyGraph, n: usize) -> Vec<NodeId> {
    // a handful of repeated names at differing versions exercises conflicts
    (0..n)
        .map(|i| {
            let name = if i > 0 && rng.random_bool(0.25) {
                format!("pkg{}", rng.random_range(0..i))
            } else {
                format!("pkg{i}")
            };
            let mut version = format!("{}.0.0", rng.random_range(1..3));
            while g.find(&name, &version).is_some() {
                version.push_str(".1");
            }
            g.upsert_node(&name, &version).expect("random node")
        })
        .collect()
}

/// Random DAG on `n` nodes: each forward pair `i < j` is an edge with
/// probability `p`. Node 0 is the root.
pub fn random_dag(seed: u64, n: usize, p: f64) -> DependencyGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = DependencyGraph::new(Ecosystem::PyPI);
    let ids = random_nodes(&mut rng, &mut g, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                g.add_edge(ids[i], ids[j]).expect("random edge");
            }
        }
    }
    g
}

/// Random directed graph that may contain cycles.
pub fn random_graph(seed: u64, n: usize, p: f64) -> DependencyGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = DependencyGraph::new(Ecosystem::PyPI);
    let ids = random_nodes(&mut rng, &mut g, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(p) {
                g.add_edge(ids[i], ids[j]).expect("random edge");
            }
        }
    }
    g
}

/// An axum router served from a background thread on an ephemeral
/// localhost port. The server stops when this value is dropped.
pub struct BackgroundServer {
    addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl BackgroundServer {
    pub fn spawn(router: Router) -> Self {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").expect("bind ephemeral port");
        listener.set_nonblocking(true).expect("nonblocking listener");
        let addr = listener.local_addr().expect("local address");
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("tokio runtime");
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("tokio listener");
                tokio::select! {
                    result = axum::serve(listener, router) => result.expect("serve"),
                    _ = rx => {}
                }
            });
            runtime.shutdown_background();
        });
        Self {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        }
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

type Key = (String, String, String);

#[derive(Default)]
struct Canned {
    depsdev: BTreeMap<Key, (u16, String)>,
    osv: BTreeMap<Key, (u16, String)>,
    log: Mutex<Vec<String>>,
}

/// Replays recorded deps.dev and OSV responses. Unknown deps.dev packages
/// answer 404; unknown OSV packages answer `{}` as the real service does.
pub struct FixtureServer {
    server: BackgroundServer,
    canned: Arc<Canned>,
}

#[derive(Default)]
pub struct FixtureServerBuilder {
    canned: Canned,
}

impl FixtureServerBuilder {
    pub fn depsdev(mut self, ecosystem: Ecosystem, name: &str, version: &str, body: &str) -> Self {
        self.canned.depsdev.insert(
            (ecosystem.deps_dev_system().into(), name.into(), version.into()),
            (200, body.into()),
        );
        self
    }

    pub fn depsdev_status(mut self, ecosystem: Ecosystem, name: &str, version: &str, status: u16) -> Self {
        self.canned.depsdev.insert(
            (ecosystem.deps_dev_system().into(), name.into(), version.into()),
            (status, String::new()),
        );
        self
    }

    pub fn osv(mut self, ecosystem: Ecosystem, name: &str, version: &str, body: &str) -> Self {
        self.canned
            .osv
            .insert((ecosystem.osv_name().into(), name.into(), version.into()), (200, body.into()));
        self
    }

    /// Adds the recorded documents shipped with the crate: chainlit 1.1.200
    /// and A 1.0.0 from deps.dev, D 1.0.0 and B 1.0.0 from OSV.
    pub fn standard(self) -> Self {
        self.depsdev(Ecosystem::PyPI, "chainlit", "1.1.200", DEPSDEV_CHAINLIT)
            .depsdev(Ecosystem::PyPI, "A", "1.0.0", DEPSDEV_DIAMOND)
            .osv(Ecosystem::PyPI, "D", "1.0.0", OSV_D)
            .osv(Ecosystem::PyPI, "B", "1.0.0", OSV_B)
    }

    pub fn start(self) -> FixtureServer {
        let canned = Arc::new(self.canned);
        let router = Router::new()
            .route(
                "/v3/systems/{system}/packages/{name}/versions/{version}",
                get(depsdev_handler),
            )
            .route("/v1/query", post(osv_handler))
            .with_state(canned.clone());
        FixtureServer {
            server: BackgroundServer::spawn(router),
            canned,
        }
    }
}

async fn depsdev_handler(
    State(canned): State<Arc<Canned>>,
    Path((system, name, version)): Path<(String, String, String)>,
) -> Response {
    canned
        .log
        .lock()
        .unwrap()
        .push(format!("GET deps.dev {system} {name} {version}"));
    let Some(version) = version.strip_suffix(":dependencies") else {
        return StatusCode::NOT_FOUND.into_response();
    };
    match canned.depsdev.get(&(system, name, version.to_string())) {
        Some((status, body)) => (
            StatusCode::from_u16(*status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
            [("content-type", "application/json")],
            body.clone(),
        )
            .into_response(),
        None => (StatusCode::NOT_FOUND, r#"{"code":5,"message":"not found"}"#).into_response(),
    }
}

async fn osv_handler(State(canned): State<Arc<Canned>>, body: String) -> Response {
    let Ok(request) = serde_json::from_str::<serde_json::Value>(&body) else {
        return (StatusCode::BAD_REQUEST, "invalid JSON").into_response();
    };
    let field = |v: &serde_json::Value| v.as_str().unwrap_or_default().to_string();
    let key = (
        field(&request["package"]["ecosystem"]),
        field(&request["package"]["name"]),
        field(&request["version"]),
    );
    canned
        .log
        .lock()
        .unwrap()
        .push(format!("POST osv {} {} {}", key.0, key.1, key.2));
    match canned.osv.get(&key) {
        Some((status, body)) => (
            StatusCode::from_u16(*status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
            [("content-type", "application/json")],
            body.clone(),
        )
            .into_response(),
        None => ([("content-type", "application/json")], "{}").into_response(),
    }
}

impl FixtureServer {
    pub fn builder() -> FixtureServerBuilder {
        FixtureServerBuilder::default()
    }

    /// A server loaded with [`FixtureServerBuilder::standard`].
    pub fn start_default() -> Self {
        Self::builder().standard().start()
    }

    pub fn base_url(&self) -> String {
        self.server.base_url()
    }

    /// Requests served so far, one line each, in arrival order.
    pub fn requests(&self) -> Vec<String> {
        self.canned.log.lock().unwrap().clone()
    }
}

/// Coordinates of the package whose deps.dev fixture is [`DEPSDEV_DIAMOND`].
pub fn diamond_coordinates() -> PackageCoordinates {
    PackageCoordinates::new(Ecosystem::PyPI, "A", "1.0.0").expect("valid")
}

/// Coordinates of the package whose deps.dev fixture is [`DEPSDEV_CHAINLIT`].
pub fn chainlit_coordinates() -> PackageCoordinates {
    PackageCoordinates::new(Ecosystem::PyPI, "chainlit", "1.1.200").expect("valid")
}
