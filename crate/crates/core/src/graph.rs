//! In-process property graph for package dependency knowledge graphs.
//!
//! The schema is fixed: a single `Package` label carrying `name` and
//! `version`, and a single `DEPENDS_ON` relationship type. Nodes are keyed by
//! `(name, version)` and receive dense ids in insertion order.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

/// The only node label in a dependency graph.
pub const PACKAGE_LABEL: &str = "Package";
/// The only relationship type in a dependency graph.
pub const DEPENDS_ON: &str = "DEPENDS_ON";
/// Node properties carried by every `Package` node.
pub const NODE_PROPERTIES: [&str; 2] = ["name", "version"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("empty field: {0}")]
    EmptyField(&'static str),
    #[error("invalid field {field}: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("unknown node: {0}")]
    UnknownNode(NodeId),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("unsupported ecosystem: {0}")]
    UnsupportedEcosystem(String),
    #[error("invalid node-link document: {0}")]
    InvalidDocument(String),
}

/// Package registry a graph was resolved against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ecosystem {
    #[serde(alias = "pypi", alias = "PYPI")]
    PyPI,
    #[serde(rename = "NPM", alias = "npm")]
    Npm,
    #[serde(alias = "cargo", alias = "CARGO", alias = "crates.io")]
    Cargo,
    #[serde(alias = "go", alias = "GO")]
    Go,
}

impl Ecosystem {
    pub const ALL: [Ecosystem; 4] = [Ecosystem::PyPI, Ecosystem::Npm, Ecosystem::Cargo, Ecosystem::Go];

    /// System identifier used by the deps.dev API.
    pub fn deps_dev_system(self) -> &'static str {
        match self {
            Ecosystem::PyPI => "PYPI",
            Ecosystem::Npm => "NPM",
            Ecosystem::Cargo => "CARGO",
            Ecosystem::Go => "GO",
        }
    }

    /// Ecosystem string used by the OSV database.
    pub fn osv_name(self) -> &'static str {
        match self {
            Ecosystem::PyPI => "PyPI",
            Ecosystem::Npm => "npm",
            Ecosystem::Cargo => "crates.io",
            Ecosystem::Go => "Go",
        }
    }

    pub fn from_deps_dev_system(system: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.deps_dev_system().eq_ignore_ascii_case(system))
    }
}

impl fmt::Display for Ecosystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ecosystem::PyPI => "PyPI",
            Ecosystem::Npm => "NPM",
            Ecosystem::Cargo => "Cargo",
            Ecosystem::Go => "Go",
        })
    }
}

impl FromStr for Ecosystem {
    type Err = GraphError;

    /// Accepts the user-facing names (`pypi`, `npm`, `cargo`, `go`) in any case.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pypi" => Ok(Ecosystem::PyPI),
            "npm" => Ok(Ecosystem::Npm),
            "cargo" => Ok(Ecosystem::Cargo),
            "go" => Ok(Ecosystem::Go),
            _ => Err(GraphError::UnsupportedEcosystem(s.to_string())),
        }
    }
}

/// `(ecosystem, name, version)` triple identifying one released package.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PackageCoordinates {
    pub ecosystem: Ecosystem,
    pub name: String,
    pub version: String,
}

impl PackageCoordinates {
    pub fn new(
        ecosystem: Ecosystem,
        name: impl Into<String>,
        version: impl Into<String>,
    ) -> Result<Self, GraphError> {
        let coords = Self {
            ecosystem,
            name: name.into(),
            version: version.into(),
        };
        coords.validate()?;
        Ok(coords)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        check_field("name", &self.name)?;
        check_field("version", &self.version)
    }
}

impl fmt::Display for PackageCoordinates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}@{}", self.ecosystem, self.name, self.version)
    }
}

fn check_field(field: &'static str, value: &str) -> Result<(), GraphError> {
    if value.trim().is_empty() {
        return Err(GraphError::EmptyField(field));
    }
    if value.chars().any(char::is_control) {
        return Err(GraphError::InvalidField {
            field,
            reason: "contains control characters".into(),
        });
    }
    Ok(())
}

/// Dense node identifier, assigned in insertion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageNode {
    pub id: NodeId,
    pub name: String,
    pub version: String,
}

impl PackageNode {
    pub fn label(&self) -> String {
        format!("{}@{}", self.name, self.version)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DependsOnEdge {
    pub from: NodeId,
    pub to: NodeId,
}

/// Labels, properties and relationship types present in a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaDescription {
    pub labels: Vec<String>,
    pub node_properties: HashMap<String, Vec<String>>,
    pub relationship_types: Vec<String>,
}

impl SchemaDescription {
    /// The fixed dependency-graph schema.
    pub fn dependency_schema() -> Self {
        Self {
            labels: vec![PACKAGE_LABEL.to_string()],
            node_properties: HashMap::from([(
                PACKAGE_LABEL.to_string(),
                NODE_PROPERTIES.iter().map(|p| p.to_string()).collect(),
            )]),
            relationship_types: vec![DEPENDS_ON.to_string()],
        }
    }

    pub fn has_property(&self, property: &str) -> bool {
        self.node_properties
            .values()
            .any(|props| props.iter().any(|p| p == property))
    }

    /// Plain-text rendering handed to agents.
    pub fn describe(&self) -> String {
        let mut out = String::from("Node labels and properties:\n");
        for label in &self.labels {
            let props = self.node_properties.get(label).cloned().unwrap_or_default();
            out.push_str(&format!("  (:{label} {{{}}})\n", props.join(", ")));
        }
        out.push_str("Relationship types:\n");
        for rel in &self.relationship_types {
            out.push_str(&format!(
                "  (:{PACKAGE_LABEL})-[:{rel}]->(:{PACKAGE_LABEL})\n"
            ));
        }
        out
    }
}

/// A package's dependency closure as a property graph.
#[derive(Debug, Clone)]
pub struct DependencyGraph {
    ecosystem: Ecosystem,
    root: Option<NodeId>,
    nodes: Vec<PackageNode>,
    edges: Vec<DependsOnEdge>,
    key_index: HashMap<(String, String), NodeId>,
    out_adj: Vec<Vec<NodeId>>,
    in_adj: Vec<Vec<NodeId>>,
}

impl DependencyGraph {
    pub fn new(ecosystem: Ecosystem) -> Self {
        Self {
            ecosystem,
            root: None,
            nodes: Vec::new(),
            edges: Vec::new(),
            key_index: HashMap::new(),
            out_adj: Vec::new(),
            in_adj: Vec::new(),
        }
    }

    /// Returns the id of the `(name, version)` node, inserting it if absent.
    pub fn upsert_node(&mut self, name: &str, version: &str) -> Result<NodeId, GraphError> {
        check_field("name", name)?;
        check_field("version", version)?;
        let key = (name.to_string(), version.to_string());
        if let Some(id) = self.key_index.get(&key) {
            return Ok(*id);
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(PackageNode {
            id,
            name: key.0.clone(),
            version: key.1.clone(),
        });
        self.key_index.insert(key, id);
        self.out_adj.push(Vec::new());
        self.in_adj.push(Vec::new());
        if self.root.is_none() {
            self.root = Some(id);
        }
        Ok(id)
    }

    /// Adds `from -> to`; adding an existing edge is a no-op.
    pub fn add_edge(&mut self, from: NodeId, to: NodeId) -> Result<(), GraphError> {
        for id in [from, to] {
            if id.0 >= self.nodes.len() {
                return Err(GraphError::UnknownNode(id));
            }
        }
        if from == to {
            return Err(GraphError::SelfLoop(from));
        }
        if self.out_adj[from.0].contains(&to) {
            return Ok(());
        }
        self.edges.push(DependsOnEdge { from, to });
        self.out_adj[from.0].push(to);
        self.in_adj[to.0].push(from);
        Ok(())
    }

    pub fn set_root(&mut self, root: NodeId) -> Result<(), GraphError> {
        if root.0 >= self.nodes.len() {
            return Err(GraphError::UnknownNode(root));
        }
        self.root = Some(root);
        Ok(())
    }

    /// Root package; `None` only for an empty graph.
    pub fn root(&self) -> Option<NodeId> {
        self.root
    }

    pub fn ecosystem(&self) -> Ecosystem {
        self.ecosystem
    }

    pub fn node(&self, id: NodeId) -> Option<&PackageNode> {
        self.nodes.get(id.0)
    }

    pub fn find(&self, name: &str, version: &str) -> Option<NodeId> {
        self.key_index
            .get(&(name.to_string(), version.to_string()))
            .copied()
    }

    pub fn nodes(&self) -> &[PackageNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[DependsOnEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn out_neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.out_adj[id.0]
    }

    pub fn in_neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.in_adj[id.0]
    }

    pub fn out_degree(&self, id: NodeId) -> usize {
        self.out_adj[id.0].len()
    }

    pub fn in_degree(&self, id: NodeId) -> usize {
        self.in_adj[id.0].len()
    }

    pub fn coordinates(&self, id: NodeId) -> Option<PackageCoordinates> {
        self.node(id).map(|n| PackageCoordinates {
            ecosystem: self.ecosystem,
            name: n.name.clone(),
            version: n.version.clone(),
        })
    }

    pub fn schema(&self) -> SchemaDescription {
        SchemaDescription::dependency_schema()
    }

    /// Serializes the graph in node-link form, ordered by node id.
    pub fn export_node_link(&self) -> NodeLinkDocument {
        let mut links: Vec<NodeLink> = self
            .edges
            .iter()
            .map(|e| NodeLink {
                source: e.from,
                target: e.to,
            })
            .collect();
        links.sort_by_key(|l| (l.source, l.target));
        NodeLinkDocument {
            nodes: self.nodes.clone(),
            links,
            root: self.root,
            ecosystem: self.ecosystem,
        }
    }

    pub fn import_node_link(doc: &NodeLinkDocument) -> Result<Self, GraphError> {
        let mut graph = DependencyGraph::new(doc.ecosystem);
        let mut ids = HashMap::new();
        for node in &doc.nodes {
            if ids.contains_key(&node.id) {
                return Err(GraphError::InvalidDocument(format!("duplicate node id {}", node.id)));
            }
            let id = graph.upsert_node(&node.name, &node.version)?;
            if id.0 + 1 != graph.node_count() {
                return Err(GraphError::InvalidDocument(format!(
                    "duplicate package {}@{}",
                    node.name, node.version
                )));
            }
            ids.insert(node.id, id);
        }
        let resolve = |id: NodeId| {
            ids.get(&id)
                .copied()
                .ok_or_else(|| GraphError::InvalidDocument(format!("link references unknown node {id}")))
        };
        for link in &doc.links {
            graph.add_edge(resolve(link.source)?, resolve(link.target)?)?;
        }
        match doc.root {
            Some(root) => graph.set_root(resolve(root)?)?,
            None => graph.root = None,
        }
        Ok(graph)
    }
}

/// Node-link serialization of a [`DependencyGraph`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLinkDocument {
    pub nodes: Vec<PackageNode>,
    pub links: Vec<NodeLink>,
    pub root: Option<NodeId>,
    pub ecosystem: Ecosystem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLink {
    pub source: NodeId,
    pub target: NodeId,
}

/// Opaque identifier of a graph held in a [`GraphStore`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GraphId(pub String);

impl fmt::Display for GraphId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Many graphs keyed by id. Graphs are immutable once inserted.
#[derive(Debug, Default)]
pub struct GraphStore {
    inner: RwLock<StoreInner>,
}

#[derive(Debug, Default)]
struct StoreInner {
    next: u64,
    graphs: HashMap<GraphId, Arc<DependencyGraph>>,
}

impl GraphStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, graph: DependencyGraph) -> (GraphId, Arc<DependencyGraph>) {
        let mut inner = self.inner.write().expect("graph store poisoned");
        inner.next += 1;
        let id = GraphId(format!("g{}", inner.next));
        let graph = Arc::new(graph);
        inner.graphs.insert(id.clone(), graph.clone());
        (id, graph)
    }

    /// Stores `graph` under `id`, replacing whatever was there.
    pub fn replace(&self, id: &GraphId, graph: DependencyGraph) -> Arc<DependencyGraph> {
        let graph = Arc::new(graph);
        self.inner
            .write()
            .expect("graph store poisoned")
            .graphs
            .insert(id.clone(), graph.clone());
        graph
    }

    pub fn get(&self, id: &GraphId) -> Option<Arc<DependencyGraph>> {
        self.inner
            .read()
            .expect("graph store poisoned")
            .graphs
            .get(id)
            .cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("graph store poisoned").graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
