//! JSON HTTP API over the graph store and assistant sessions.
//!
//! | method | path | |
//! |---|---|---|
//! | `GET` | `/healthz` | liveness |
//! | `POST` | `/api/graphs` | build a graph from `{ecosystem, name, version}` |
//! | `GET` | `/api/graphs/{id}` | node-link document |
//! | `GET` | `/api/graphs/{id}/schema` | labels, properties and relationship types |
//! | `GET` | `/api/graphs/{id}/metrics` | [`GraphMetrics`](crate::analytics::GraphMetrics) |
//! | `POST` | `/api/graphs/{id}/query` | run `{query}`; 422 with the error text on failure |
//! | `POST` | `/api/sessions` | open a session, optionally on `graph_id`, with `critic` on or off |
//! | `POST` | `/api/sessions/{id}/messages` | ask `{text}`; 409 while the session is busy |
//! | `GET` | `/api/sessions/{id}/transcript` | transcript entries, optionally `?from=N` |
//!
//! Every error body is `{"error": "..."}`.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, RawQuery, State};
use axum::http::{Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::agents::{LlmBackend, Orchestrator};
use crate::analytics;
use crate::config::{BackendSource, Config, ConfigError};
use crate::graph::{DependencyGraph, GraphId, GraphStore, PackageCoordinates};
use crate::ingest::IngestError;

pub type BackendFactory = Arc<dyn Fn(&str) -> Box<dyn LlmBackend> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Upstream(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Upstream(_) => StatusCode::BAD_GATEWAY,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.to_string() }))).into_response()
    }
}

impl From<IngestError> for ServiceError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::UnknownPackage(_) => ServiceError::NotFound(e.to_string()),
            IngestError::Network(_) | IngestError::Decode(_) => ServiceError::Upstream(e.to_string()),
        }
    }
}

impl From<ConfigError> for ServiceError {
    fn from(e: ConfigError) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

struct Session {
    orchestrator: Orchestrator,
    graph_id: Option<GraphId>,
    seen_revision: u64,
}

struct SessionSlot {
    busy: AtomicBool,
    inner: Mutex<Session>,
}

struct BusyGuard<'a>(&'a AtomicBool);

impl Drop for BusyGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

impl SessionSlot {
    fn claim(&self) -> Option<BusyGuard<'_>> {
        self.busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .ok()
            .map(|_| BusyGuard(&self.busy))
    }
}

/// Shared state behind the router.
pub struct ServiceState {
    config: Config,
    backends: BackendFactory,
    graphs: GraphStore,
    sessions: RwLock<BTreeMap<String, Arc<SessionSlot>>>,
    next_session: AtomicU64,
}

impl ServiceState {
    pub fn new(config: Config, backends: BackendFactory) -> Arc<Self> {
        Arc::new(Self {
            config,
            backends,
            graphs: GraphStore::new(),
            sessions: RwLock::new(BTreeMap::new()),
            next_session: AtomicU64::new(0),
        })
    }

    /// State whose sessions use the configured backend.
    pub fn from_config(config: Config) -> Result<Arc<Self>, ConfigError> {
        let source = Arc::new(config.backend_source()?);
        let factory: BackendFactory = {
            let source: Arc<BackendSource> = source.clone();
            Arc::new(move |agent: &str| source.backend(agent))
        };
        Ok(Self::new(config, factory))
    }

    pub fn graphs(&self) -> &GraphStore {
        &self.graphs
    }

    fn graph(&self, id: &str) -> Result<Arc<DependencyGraph>, ServiceError> {
        self.graphs
            .get(&GraphId(id.to_string()))
            .ok_or_else(|| ServiceError::NotFound(format!("no graph with id `{id}`")))
    }

    fn session(&self, id: &str) -> Result<Arc<SessionSlot>, ServiceError> {
        self.sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("no session with id `{id}`")))
    }
}

pub fn router(state: Arc<ServiceState>, cors: bool) -> Router {
    let router = Router::new()
        .route("/healthz", get(healthz))
        .route("/api/graphs", post(create_graph))
        .route("/api/graphs/{id}", get(get_graph))
        .route("/api/graphs/{id}/schema", get(get_schema))
        .route("/api/graphs/{id}/metrics", get(get_metrics))
        .route("/api/graphs/{id}/query", post(run_query))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/messages", post(post_message))
        .route("/api/sessions/{id}/transcript", get(get_transcript))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state);
    if cors {
        router.layer(tower_http::cors::CorsLayer::permissive())
    } else {
        router
    }
}

/// Serves until the process is stopped.
pub fn serve_blocking(addr: SocketAddr, state: Arc<ServiceState>, cors: bool) -> std::io::Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        axum::serve(listener, router(state, cors)).await
    })
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("malformed request body: {e}")))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

async fn healthz() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn not_found(method: Method, uri: Uri) -> ServiceError {
    ServiceError::NotFound(format!("no route for {method} {}", uri.path()))
}

async fn method_not_allowed(method: Method, uri: Uri) -> Response {
    (
        StatusCode::METHOD_NOT_ALLOWED,
        Json(json!({ "error": format!("{method} is not allowed on {}", uri.path()) })),
    )
        .into_response()
}

async fn create_graph(State(state): State<Arc<ServiceState>>, body: Bytes) -> Result<Response, ServiceError> {
    let coords: PackageCoordinates = parse_body(&body)?;
    coords.validate().map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    let client = state.config.depsdev();
    let (graph, report) = blocking(move || client.construct(&coords).map_err(ServiceError::from)).await?;
    let (id, graph) = state.graphs.insert(graph);
    let root = graph.root().and_then(|r| graph.node(r)).map(|n| n.label());
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "graph_id": id,
            "root": root,
            "node_count": graph.node_count(),
            "edge_count": graph.edge_count(),
            "construction": report,
        })),
    )
        .into_response())
}

async fn get_graph(State(state): State<Arc<ServiceState>>, Path(id): Path<String>) -> Result<Json<Value>, ServiceError> {
    let graph = state.graph(&id)?;
    Ok(Json(json!({ "graph_id": id, "graph": graph.export_node_link() })))
}

async fn get_schema(State(state): State<Arc<ServiceState>>, Path(id): Path<String>) -> Result<Json<Value>, ServiceError> {
    let schema = state.graph(&id)?.schema();
    Ok(Json(json!({
        "labels": schema.labels,
        "node_properties": schema.node_properties.iter().collect::<BTreeMap<_, _>>(),
        "relationship_types": schema.relationship_types,
        "text": schema.describe(),
    })))
}

async fn get_metrics(State(state): State<Arc<ServiceState>>, Path(id): Path<String>) -> Result<Json<Value>, ServiceError> {
    let graph = state.graph(&id)?;
    let top: Vec<Value> = analytics::top_in_degree(&graph, 5)
        .into_iter()
        .map(|e| json!({ "package": e.node.label(), "in_degree": e.in_degree }))
        .collect();
    Ok(Json(json!({ "metrics": analytics::metrics(&graph), "top_in_degree": top })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryBody {
    query: String,
}

async fn run_query(
    State(state): State<Arc<ServiceState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ServiceError> {
    let graph = state.graph(&id)?;
    let QueryBody { query } = parse_body(&body)?;
    let table = blocking(move || {
        crate::query::run(&graph, &query).map_err(|e| ServiceError::Unprocessable(e.to_string()))
    })
    .await?;
    Ok(Json(serde_json::to_value(table).map_err(|e| ServiceError::Internal(e.to_string()))?))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SessionBody {
    graph_id: Option<String>,
    critic: Option<bool>,
}

async fn create_session(State(state): State<Arc<ServiceState>>, body: Bytes) -> Result<Response, ServiceError> {
    let SessionBody { graph_id, critic } = if body.iter().all(u8::is_ascii_whitespace) {
        SessionBody::default()
    } else {
        parse_body(&body)?
    };
    let graph = graph_id.as_deref().map(|id| state.graph(id)).transpose()?;
    let critic = critic.unwrap_or(state.config.critic_enabled);
    let factory = state.backends.clone();
    let mut orchestrator = state.config.orchestrator_with(&mut |agent| factory(agent), graph)?;
    orchestrator.set_critic(critic);
    let id = format!("s{}", state.next_session.fetch_add(1, Ordering::Relaxed) + 1);
    let slot = SessionSlot {
        busy: AtomicBool::new(false),
        inner: Mutex::new(Session {
            seen_revision: orchestrator.graph_revision(),
            orchestrator,
            graph_id: graph_id.clone().map(GraphId),
        }),
    };
    state
        .sessions
        .write()
        .expect("session table poisoned")
        .insert(id.clone(), Arc::new(slot));
    Ok((
        StatusCode::CREATED,
        Json(json!({ "session_id": id, "graph_id": graph_id, "critic": critic })),
    )
        .into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageBody {
    text: String,
}

async fn post_message(
    State(state): State<Arc<ServiceState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ServiceError> {
    let slot = state.session(&id)?;
    let MessageBody { text } = parse_body(&body)?;
    if text.trim().is_empty() {
        return Err(ServiceError::BadRequest("`text` must not be empty".into()));
    }
    if slot.busy.load(Ordering::Acquire) {
        return Err(busy(&id));
    }
    let worker_state = state.clone();
    blocking(move || {
        let _guard = slot.claim().ok_or_else(|| busy(&id))?;
        let mut session = slot.inner.lock().expect("session poisoned");
        let answer = session.orchestrator.ask(&text);
        if session.orchestrator.graph_revision() != session.seen_revision {
            session.seen_revision = session.orchestrator.graph_revision();
            if let Some(graph) = session.orchestrator.graph() {
                let (graph_id, _) = worker_state.graphs.insert((**graph).clone());
                session.graph_id = Some(graph_id);
            }
        }
        Ok(Json(json!({
            "answer": answer.answer,
            "report": answer.report,
            "rounds": answer.rounds,
            "approved": answer.approved,
            "graph_id": session.graph_id,
            "transcript_ref": format!("/api/sessions/{id}/transcript?from={}", answer.transcript_from),
        })))
    })
    .await
}

fn busy(id: &str) -> ServiceError {
    ServiceError::Conflict(format!("session `{id}` is already answering a message"))
}

async fn get_transcript(
    State(state): State<Arc<ServiceState>>,
    Path(id): Path<String>,
    RawQuery(query): RawQuery,
) -> Result<Json<Value>, ServiceError> {
    let slot = state.session(&id)?;
    let mut from = 0usize;
    for (key, value) in url::form_urlencoded::parse(query.unwrap_or_default().as_bytes()) {
        match key.as_ref() {
            "from" => {
                from = value
                    .parse()
                    .map_err(|_| ServiceError::BadRequest(format!("`from` must be a non-negative integer, got `{value}`")))?
            }
            other => return Err(ServiceError::BadRequest(format!("unknown query parameter `{other}`"))),
        }
    }
    let _guard = slot.claim().ok_or_else(|| busy(&id))?;
    let session = slot.inner.lock().expect("session poisoned");
    let entries = session.orchestrator.transcript().entries();
    let tail = entries.get(from..).unwrap_or_default();
    Ok(Json(json!({ "session_id": id, "total": entries.len(), "entries": tail })))
}
