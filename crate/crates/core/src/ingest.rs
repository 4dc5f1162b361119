//! Dependency resolution through the deps.dev v3 API.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::graph::{DependencyGraph, Ecosystem, GraphError, PackageCoordinates};
use crate::http::{endpoint, HttpClient};

pub const DEFAULT_DEPSDEV_BASE_URL: &str = "https://api.deps.dev";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("unknown system `{system}` in nodes[{index}].versionKey")]
    UnknownSystem { index: usize, system: String },
    #[error("invalid nodes[{index}].versionKey: {source}")]
    InvalidCoordinates { index: usize, source: GraphError },
    #[error("duplicate coordinates: nodes[{first}] and nodes[{second}] are both {coordinates}")]
    DuplicateCoordinates {
        first: usize,
        second: usize,
        coordinates: String,
    },
    #[error("index out of range: edges[{edge}] references node {index} but only {len} nodes exist")]
    IndexOutOfRange { edge: usize, index: usize, len: usize },
    #[error("self edge: edges[{edge}] starts and ends at node {index}")]
    SelfEdge { edge: usize, index: usize },
    #[error("missing SELF: no node has relation SELF")]
    MissingSelf,
    #[error("multiple SELF: nodes[{first}] and nodes[{second}] both have relation SELF")]
    MultipleSelf { first: usize, second: usize },
    #[error("SELF mismatch: requested {requested} but the document describes {found}")]
    SelfMismatch { requested: String, found: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IngestError {
    #[error("unknown package: deps.dev has no record of {0}")]
    UnknownPackage(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("decode error: {0}")]
    Decode(#[from] DecodeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Relation {
    #[serde(rename = "SELF")]
    SelfNode,
    Direct,
    Indirect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedNode {
    pub coordinates: PackageCoordinates,
    pub relation: Relation,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedEdge {
    pub from_index: usize,
    pub to_index: usize,
    pub requirement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyDocument {
    pub nodes: Vec<ResolvedNode>,
    pub edges: Vec<ResolvedEdge>,
}

impl DependencyDocument {
    pub fn self_index(&self) -> usize {
        self.nodes
            .iter()
            .position(|n| n.relation == Relation::SelfNode)
            .expect("decoded documents have a SELF node")
    }

    pub fn root(&self) -> &PackageCoordinates {
        &self.nodes[self.self_index()].coordinates
    }
}

mod wire {
    use serde::Deserialize;

    #[derive(Deserialize)]
    pub struct Document {
        pub nodes: Vec<Node>,
        #[serde(default)]
        pub edges: Vec<Edge>,
    }

    #[derive(Deserialize)]
    #[serde(rename_all = "camelCase")]
    pub struct Node {
        pub version_key: VersionKey,
        pub relation: String,
        #[serde(default)]
        pub errors: Vec<String>,
    }

    #[derive(Deserialize)]
    pub struct VersionKey {
        pub system: String,
        pub name: String,
        pub version: String,
    }

    #[derive(Deserialize)]
    #[serde(rename_all = "camelCase")]
    pub struct Edge {
        pub from_node: usize,
        pub to_node: usize,
        #[serde(default)]
        pub requirement: String,
    }
}

/// Parses and validates a GetDependencies response body.
pub fn decode_document(bytes: &[u8]) -> Result<DependencyDocument, DecodeError> {
    let raw: wire::Document =
        serde_json::from_slice(bytes).map_err(|e| DecodeError::Malformed(e.to_string()))?;

    let mut nodes = Vec::with_capacity(raw.nodes.len());
    let mut seen: HashMap<PackageCoordinates, usize> = HashMap::new();
    let mut self_at: Option<usize> = None;
    for (index, node) in raw.nodes.into_iter().enumerate() {
        let ecosystem = Ecosystem::from_deps_dev_system(&node.version_key.system).ok_or_else(|| {
            DecodeError::UnknownSystem {
                index,
                system: node.version_key.system.clone(),
            }
        })?;
        let coordinates =
            PackageCoordinates::new(ecosystem, node.version_key.name, node.version_key.version)
                .map_err(|source| DecodeError::InvalidCoordinates { index, source })?;
        if let Some(&first) = seen.get(&coordinates) {
            return Err(DecodeError::DuplicateCoordinates {
                first,
                second: index,
                coordinates: coordinates.to_string(),
            });
        }
        seen.insert(coordinates.clone(), index);
        let relation = match node.relation.as_str() {
            "SELF" => Relation::SelfNode,
            "DIRECT" => Relation::Direct,
            "INDIRECT" => Relation::Indirect,
            other => {
                return Err(DecodeError::Malformed(format!(
                    "nodes[{index}].relation has unknown value `{other}`"
                )))
            }
        };
        if relation == Relation::SelfNode {
            if let Some(first) = self_at {
                return Err(DecodeError::MultipleSelf { first, second: index });
            }
            self_at = Some(index);
        }
        nodes.push(ResolvedNode {
            coordinates,
            relation,
            errors: node.errors,
        });
    }
    if self_at.is_none() {
        return Err(DecodeError::MissingSelf);
    }

    let len = nodes.len();
    let mut edges = Vec::with_capacity(raw.edges.len());
    for (edge, e) in raw.edges.into_iter().enumerate() {
        for index in [e.from_node, e.to_node] {
            if index >= len {
                return Err(DecodeError::IndexOutOfRange { edge, index, len });
            }
        }
        if e.from_node == e.to_node {
            return Err(DecodeError::SelfEdge {
                edge,
                index: e.from_node,
            });
        }
        edges.push(ResolvedEdge {
            from_index: e.from_node,
            to_index: e.to_node,
            requirement: e.requirement,
        });
    }
    Ok(DependencyDocument { nodes, edges })
}

/// Builds the graph with the SELF node as root (inserted first).
pub fn build_graph(doc: &DependencyDocument) -> DependencyGraph {
    let root_index = doc.self_index();
    let root = &doc.nodes[root_index].coordinates;
    let mut graph = DependencyGraph::new(root.ecosystem);
    let mut ids = vec![None; doc.nodes.len()];
    let order = std::iter::once(root_index).chain((0..doc.nodes.len()).filter(|&i| i != root_index));
    for i in order {
        let c = &doc.nodes[i].coordinates;
        ids[i] = Some(graph.upsert_node(&c.name, &c.version).expect("decoded coordinates are valid"));
    }
    for e in &doc.edges {
        let (from, to) = (ids[e.from_index].unwrap(), ids[e.to_index].unwrap());
        graph.add_edge(from, to).expect("decoded edges are valid");
    }
    graph
}

/// Summary of a graph construction, including nodes deps.dev could not
/// resolve cleanly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub root: String,
    pub ecosystem: Ecosystem,
    pub node_count: usize,
    pub edge_count: usize,
    pub direct: usize,
    pub indirect: usize,
    pub flagged: Vec<FlaggedNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlaggedNode {
    pub package: String,
    pub errors: Vec<String>,
}

impl ConstructionReport {
    pub fn new(doc: &DependencyDocument, graph: &DependencyGraph) -> Self {
        let root = doc.root();
        let count = |r| doc.nodes.iter().filter(|n| n.relation == r).count();
        Self {
            root: format!("{}@{}", root.name, root.version),
            ecosystem: root.ecosystem,
            node_count: graph.node_count(),
            edge_count: graph.edge_count(),
            direct: count(Relation::Direct),
            indirect: count(Relation::Indirect),
            flagged: doc
                .nodes
                .iter()
                .filter(|n| !n.errors.is_empty())
                .map(|n| FlaggedNode {
                    package: format!("{}@{}", n.coordinates.name, n.coordinates.version),
                    errors: n.errors.clone(),
                })
                .collect(),
        }
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "Constructed the dependency graph of {} ({}): {} packages, {} dependency edges ({} direct, {} indirect).",
            self.root, self.ecosystem, self.node_count, self.edge_count, self.direct, self.indirect
        );
        for f in &self.flagged {
            s.push_str(&format!("\nResolution problem at {}: {}", f.package, f.errors.join("; ")));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct DepsDevClient {
    base_url: String,
    http: HttpClient,
}

impl DepsDevClient {
    pub fn new(base_url: impl Into<String>, timeout: Duration) -> Self {
        Self {
            base_url: base_url.into(),
            http: HttpClient::new(timeout),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn fetch_dependencies(
        &self,
        coords: &PackageCoordinates,
    ) -> Result<DependencyDocument, IngestError> {
        coords
            .validate()
            .map_err(|e| IngestError::UnknownPackage(format!("{coords} ({e})")))?;
        let version_segment = format!("{}:dependencies", coords.version);
        let url = endpoint(
            &self.base_url,
            &[
                "v3",
                "systems",
                coords.ecosystem.deps_dev_system(),
                "packages",
                &coords.name,
                "versions",
                &version_segment,
            ],
        )
        .map_err(|e| IngestError::Network(e.0))?;
        let response = self.http.get(&url).map_err(|e| IngestError::Network(e.0))?;
        match response.status {
            200 => {}
            404 => return Err(IngestError::UnknownPackage(coords.to_string())),
            status => {
                return Err(IngestError::Network(format!(
                    "deps.dev answered HTTP {status} for {coords}"
                )))
            }
        }
        let doc = decode_document(response.body.as_bytes())?;
        let found = doc.root();
        if found != coords {
            return Err(DecodeError::SelfMismatch {
                requested: coords.to_string(),
                found: found.to_string(),
            }
            .into());
        }
        Ok(doc)
    }

    /// Fetch, decode and build in one step.
    pub fn construct(
        &self,
        coords: &PackageCoordinates,
    ) -> Result<(DependencyGraph, ConstructionReport), IngestError> {
        let doc = self.fetch_dependencies(coords)?;
        let graph = build_graph(&doc);
        let report = ConstructionReport::new(&doc, &graph);
        Ok((graph, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn f1_value() -> serde_json::Value {
        serde_json::from_str(fixtures::DEPSDEV_CHAINLIT).unwrap()
    }

    fn decode_value(v: &serde_json::Value) -> Result<DependencyDocument, DecodeError> {
        decode_document(v.to_string().as_bytes())
    }

    #[test]
    fn decodes_chainlit_document() {
        let doc = decode_document(fixtures::DEPSDEV_CHAINLIT.as_bytes()).unwrap();
        assert_eq!(doc.nodes.len(), 3);
        assert_eq!(doc.edges.len(), 2);
        let names: Vec<_> = doc.nodes.iter().map(|n| (n.coordinates.name.as_str(), n.relation)).collect();
        assert_eq!(
            names,
            vec![
                ("chainlit", Relation::SelfNode),
                ("packaging", Relation::Direct),
                ("aiofiles", Relation::Direct)
            ]
        );
        assert_eq!(
            doc.edges.iter().map(|e| (e.from_index, e.to_index)).collect::<Vec<_>>(),
            vec![(0, 1), (0, 2)]
        );
    }

    #[test]
    fn duplicate_node_rejected() {
        let mut v = f1_value();
        let copy = v["nodes"][2].clone();
        v["nodes"].as_array_mut().unwrap().push(copy);
        let err = decode_value(&v).unwrap_err();
        assert!(matches!(err, DecodeError::DuplicateCoordinates { first: 2, second: 3, .. }));
        assert!(err.to_string().contains("duplicate coordinates"));
    }

    #[test]
    fn edge_out_of_range_rejected() {
        let mut v = f1_value();
        v["edges"].as_array_mut().unwrap().push(serde_json::json!({"fromNode":0,"toNode":9,"requirement":""}));
        let err = decode_value(&v).unwrap_err();
        assert_eq!(err, DecodeError::IndexOutOfRange { edge: 2, index: 9, len: 3 });
        assert!(err.to_string().contains("index out of range"));
    }

    #[test]
    fn self_node_count_enforced() {
        let mut none = f1_value();
        none["nodes"][0]["relation"] = "DIRECT".into();
        assert_eq!(decode_value(&none).unwrap_err(), DecodeError::MissingSelf);

        let mut two = f1_value();
        two["nodes"][1]["relation"] = "SELF".into();
        assert_eq!(decode_value(&two).unwrap_err(), DecodeError::MultipleSelf { first: 0, second: 1 });

        assert!(matches!(decode_document(b"{not json"), Err(DecodeError::Malformed(_))));
    }

    #[test]
    fn builds_f1_graph() {
        let doc = decode_document(fixtures::DEPSDEV_CHAINLIT.as_bytes()).unwrap();
        let g = build_graph(&doc);
        assert_eq!((g.node_count(), g.edge_count()), (3, 2));
        let root = g.node(g.root().unwrap()).unwrap();
        assert_eq!((root.name.as_str(), root.version.as_str()), ("chainlit", "1.1.200"));
        assert_eq!(g.ecosystem(), Ecosystem::PyPI);
        let direct: Vec<_> = g.out_neighbors(g.root().unwrap()).iter().map(|id| g.node(*id).unwrap().name.clone()).collect();
        assert_eq!(direct, vec!["packaging", "aiofiles"]);
    }

    #[test]
    fn self_only_and_duplicate_edges() {
        let mut v = f1_value();
        v["nodes"].as_array_mut().unwrap().truncate(1);
        v["edges"] = serde_json::json!([]);
        let g = build_graph(&decode_value(&v).unwrap());
        assert_eq!((g.node_count(), g.edge_count()), (1, 0));
        assert_eq!(crate::analytics::depth_from_root(&g), 0);

        let mut dup = f1_value();
        let e = dup["edges"][0].clone();
        dup["edges"].as_array_mut().unwrap().push(e);
        assert_eq!(build_graph(&decode_value(&dup).unwrap()).edge_count(), 2);
    }

    #[test]
    fn root_first_even_if_self_listed_later() {
        let mut v = f1_value();
        v["nodes"].as_array_mut().unwrap().swap(0, 2);
        v["edges"] = serde_json::json!([{"fromNode":2,"toNode":1},{"fromNode":2,"toNode":0}]);
        let g = build_graph(&decode_value(&v).unwrap());
        assert_eq!(g.root(), Some(crate::NodeId(0)));
        assert_eq!(g.node(crate::NodeId(0)).unwrap().name, "chainlit");
        assert_eq!(g.out_degree(crate::NodeId(0)), 2);
    }

    #[test]
    fn flagged_nodes_are_retained() {
        let mut v = f1_value();
        v["nodes"][2]["errors"] = serde_json::json!(["could not resolve"]);
        let doc = decode_value(&v).unwrap();
        let g = build_graph(&doc);
        let report = ConstructionReport::new(&doc, &g);
        assert_eq!(g.node_count(), 3);
        assert_eq!(report.flagged.len(), 1);
        assert_eq!(report.flagged[0].package, "aiofiles@23.2.1");
        assert!(report.summary().contains("could not resolve"));
    }
}

#[cfg(test)]
mod fetch_tests {
    use super::*;
    use crate::fixtures::{self, FixtureServer};

    #[test]
    fn fetch_against_fixture_server() {
        let server = FixtureServer::start_default();
        let client = DepsDevClient::new(server.base_url(), Duration::from_secs(5));
        let doc = client.fetch_dependencies(&fixtures::chainlit_coordinates()).unwrap();
        assert_eq!(doc, decode_document(fixtures::DEPSDEV_CHAINLIT.as_bytes()).unwrap());
        assert_eq!(doc, client.fetch_dependencies(&fixtures::chainlit_coordinates()).unwrap());
        assert_eq!(
            server.requests()[0],
            "GET deps.dev PYPI chainlit 1.1.200:dependencies"
        );

        let missing = PackageCoordinates::new(Ecosystem::PyPI, "nope", "0.0.1").unwrap();
        assert!(matches!(client.fetch_dependencies(&missing), Err(IngestError::UnknownPackage(_))));

        let unroutable = DepsDevClient::new("http://127.0.0.1:9", Duration::from_millis(500));
        assert!(matches!(
            unroutable.fetch_dependencies(&fixtures::chainlit_coordinates()),
            Err(IngestError::Network(_))
        ));
    }

    #[test]
    fn self_mismatch_detected() {
        let server = FixtureServer::builder()
            .depsdev(Ecosystem::PyPI, "alias", "1.0", fixtures::DEPSDEV_CHAINLIT)
            .start();
        let client = DepsDevClient::new(server.base_url(), Duration::from_secs(5));
        let coords = PackageCoordinates::new(Ecosystem::PyPI, "alias", "1.0").unwrap();
        assert!(matches!(
            client.fetch_dependencies(&coords),
            Err(IngestError::Decode(DecodeError::SelfMismatch { .. }))
        ));
    }

    #[test]
    fn construct_d1_fixture() {
        let server = FixtureServer::start_default();
        let client = DepsDevClient::new(server.base_url(), Duration::from_secs(5));
        let (g, report) = client.construct(&fixtures::diamond_coordinates()).unwrap();
        assert_eq!(g.export_node_link(), fixtures::diamond().export_node_link());
        assert_eq!((report.direct, report.indirect), (2, 1));
    }
}
