//! Deterministic graph metrics answered without a language model.

use std::collections::{BTreeMap, HashMap};

use petgraph::algo::{tarjan_scc, toposort};
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

use crate::graph::{DependencyGraph, GraphError, NodeId, PackageNode};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("graph contains a cycle; root-to-leaf paths are only counted on acyclic graphs")]
    CyclicGraph,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub node_count: usize,
    pub edge_count: usize,
    pub density: f64,
    pub depth: usize,
    pub has_cycles: bool,
    pub root_leaf_path_count: u64,
}

/// Compute every metric in one pass over the graph.
///
/// On cyclic graphs the path count falls back to enumerating simple
/// root-to-leaf paths, matching how depth is defined there.
pub fn metrics(graph: &DependencyGraph) -> GraphMetrics {
    let has_cycles = !detect_cycles(graph).is_empty();
    let root_leaf_path_count = if has_cycles {
        simple_root_leaf_paths(graph)
    } else {
        count_root_leaf_paths(graph).unwrap_or(0)
    };
    GraphMetrics {
        node_count: graph.node_count(),
        edge_count: graph.edge_count(),
        density: density(graph),
        depth: depth_from_root(graph),
        has_cycles,
        root_leaf_path_count,
    }
}

/// Directed density `E / (N (N - 1))`; zero for fewer than two nodes.
pub fn density(graph: &DependencyGraph) -> f64 {
    let n = graph.node_count();
    if n < 2 {
        return 0.0;
    }
    graph.edge_count() as f64 / (n * (n - 1)) as f64
}

fn to_petgraph(graph: &DependencyGraph) -> DiGraph<NodeId, ()> {
    let mut g = DiGraph::with_capacity(graph.node_count(), graph.edge_count());
    for node in graph.nodes() {
        g.add_node(node.id);
    }
    for e in graph.edges() {
        g.add_edge(NodeIndex::new(e.from.0), NodeIndex::new(e.to.0), ());
    }
    g
}

/// Number of edges on the longest simple path starting at the root.
///
/// Acyclic graphs use a longest-path pass in topological order. Cyclic
/// graphs fall back to exhaustive simple-path search, which is exponential
/// in the worst case.
pub fn depth_from_root(graph: &DependencyGraph) -> usize {
    let Some(root) = graph.root() else {
        return 0;
    };
    match toposort(&to_petgraph(graph), None) {
        Ok(order) => {
            let mut best: Vec<Option<usize>> = vec![None; graph.node_count()];
            best[root.0] = Some(0);
            let mut depth = 0;
            for idx in order {
                let Some(d) = best[idx.index()] else { continue };
                depth = depth.max(d);
                for next in graph.out_neighbors(NodeId(idx.index())) {
                    let slot = &mut best[next.0];
                    *slot = Some(slot.map_or(d + 1, |cur| cur.max(d + 1)));
                }
            }
            depth
        }
        Err(_) => {
            let mut on_path = vec![false; graph.node_count()];
            longest_simple(graph, root, &mut on_path)
        }
    }
}

fn longest_simple(graph: &DependencyGraph, node: NodeId, on_path: &mut [bool]) -> usize {
    on_path[node.0] = true;
    let mut best = 0;
    for &next in graph.out_neighbors(node) {
        if !on_path[next.0] {
            best = best.max(1 + longest_simple(graph, next, on_path));
        }
    }
    on_path[node.0] = false;
    best
}

/// One elementary cycle per strongly connected component with two or more
/// nodes; empty iff the graph is acyclic.
pub fn detect_cycles(graph: &DependencyGraph) -> Vec<Vec<NodeId>> {
    let pg = to_petgraph(graph);
    let mut components: Vec<Vec<NodeId>> = tarjan_scc(&pg)
        .into_iter()
        .filter(|c| c.len() >= 2)
        .map(|c| {
            let mut ids: Vec<NodeId> = c.into_iter().map(|i| NodeId(i.index())).collect();
            ids.sort();
            ids
        })
        .collect();
    components.sort();
    components
        .iter()
        .map(|component| cycle_in_component(graph, component))
        .collect()
}

/// Walks from the smallest node of the component until it closes a cycle.
fn cycle_in_component(graph: &DependencyGraph, component: &[NodeId]) -> Vec<NodeId> {
    let start = component[0];
    let mut path = vec![start];
    let mut position: HashMap<NodeId, usize> = HashMap::from([(start, 0)]);
    let mut current = start;
    loop {
        let next = *graph
            .out_neighbors(current)
            .iter()
            .filter(|n| component.binary_search(n).is_ok())
            .min()
            .expect("every node of a non-trivial SCC has an edge inside it");
        if let Some(&at) = position.get(&next) {
            return path[at..].to_vec();
        }
        position.insert(next, path.len());
        path.push(next);
        current = next;
    }
}

/// Number of paths of length ≥ 1 from the root to a node without outgoing
/// edges.
pub fn count_root_leaf_paths(graph: &DependencyGraph) -> Result<u64, AnalyticsError> {
    let Some(root) = graph.root() else {
        return Ok(0);
    };
    let order = toposort(&to_petgraph(graph), None).map_err(|_| AnalyticsError::CyclicGraph)?;
    // paths[v] = number of paths from v to any leaf (a leaf counts itself once)
    let mut paths = vec![0u64; graph.node_count()];
    for idx in order.into_iter().rev() {
        let id = NodeId(idx.index());
        paths[id.0] = if graph.out_degree(id) == 0 {
            1
        } else {
            graph.out_neighbors(id).iter().map(|n| paths[n.0]).sum()
        };
    }
    Ok(if graph.out_degree(root) == 0 { 0 } else { paths[root.0] })
}

fn simple_root_leaf_paths(graph: &DependencyGraph) -> u64 {
    fn walk(graph: &DependencyGraph, node: NodeId, on_path: &mut [bool], depth: usize) -> u64 {
        if graph.out_degree(node) == 0 {
            return (depth > 0) as u64;
        }
        on_path[node.0] = true;
        let mut total = 0;
        for &next in graph.out_neighbors(node) {
            if !on_path[next.0] {
                total += walk(graph, next, on_path, depth + 1);
            }
        }
        on_path[node.0] = false;
        total
    }
    match graph.root() {
        Some(root) => walk(graph, root, &mut vec![false; graph.node_count()], 0),
        None => 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InDegreeEntry {
    pub node: PackageNode,
    pub in_degree: usize,
}

/// The `k` nodes with the highest in-degree; ties go to the lower node id.
pub fn top_in_degree(graph: &DependencyGraph, k: usize) -> Vec<InDegreeEntry> {
    let mut entries: Vec<InDegreeEntry> = graph
        .nodes()
        .iter()
        .map(|n| InDegreeEntry {
            node: n.clone(),
            in_degree: graph.in_degree(n.id),
        })
        .collect();
    entries.sort_by(|a, b| b.in_degree.cmp(&a.in_degree).then(a.node.id.cmp(&b.node.id)));
    entries.truncate(k);
    entries
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PackageRef {
    pub name: String,
    pub version: String,
}

/// A package name required at two or more versions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionConflict {
    pub package_name: String,
    pub versions: Vec<String>,
    /// Dependents per version, in node-id order.
    pub dependents: BTreeMap<String, Vec<PackageRef>>,
}

pub fn multi_version_conflicts(graph: &DependencyGraph) -> Vec<VersionConflict> {
    let mut by_name: BTreeMap<&str, BTreeMap<String, Vec<PackageRef>>> = BTreeMap::new();
    for node in graph.nodes() {
        let mut dependents: Vec<NodeId> = graph.in_neighbors(node.id).to_vec();
        if dependents.is_empty() {
            continue;
        }
        dependents.sort();
        let refs = dependents
            .into_iter()
            .map(|d| {
                let n = graph.node(d).expect("edge endpoint exists");
                PackageRef {
                    name: n.name.clone(),
                    version: n.version.clone(),
                }
            })
            .collect();
        by_name
            .entry(node.name.as_str())
            .or_default()
            .insert(node.version.clone(), refs);
    }
    by_name
        .into_iter()
        .filter(|(_, versions)| versions.len() >= 2)
        .map(|(name, dependents)| VersionConflict {
            package_name: name.to_string(),
            versions: dependents.keys().cloned().collect(),
            dependents,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<Vec<NodeId>>,
    pub truncated: bool,
}

/// Simple paths from the root to `target`, at most `limit` of them.
pub fn all_paths_to(
    graph: &DependencyGraph,
    target: NodeId,
    limit: usize,
) -> Result<PathSet, AnalyticsError> {
    if graph.node(target).is_none() {
        return Err(GraphError::UnknownNode(target).into());
    }
    let mut out = PathSet {
        paths: Vec::new(),
        truncated: false,
    };
    let Some(root) = graph.root() else {
        return Ok(out);
    };
    fn walk(
        graph: &DependencyGraph,
        target: NodeId,
        limit: usize,
        path: &mut Vec<NodeId>,
        on_path: &mut [bool],
        out: &mut PathSet,
    ) {
        let node = *path.last().unwrap();
        if node == target {
            if out.paths.len() == limit {
                out.truncated = true;
            } else {
                out.paths.push(path.clone());
            }
            return;
        }
        for &next in graph.out_neighbors(node) {
            if out.truncated {
                return;
            }
            if !on_path[next.0] {
                on_path[next.0] = true;
                path.push(next);
                walk(graph, target, limit, path, on_path, out);
                path.pop();
                on_path[next.0] = false;
            }
        }
    }
    let mut on_path = vec![false; graph.node_count()];
    on_path[root.0] = true;
    walk(graph, target, limit, &mut vec![root], &mut on_path, &mut out);
    Ok(out)
}

/// Graphviz rendering: one labelled node statement per package and one edge
/// statement per dependency, both in id order.
pub fn render_dot(graph: &DependencyGraph) -> String {
    let mut out = String::from("digraph g {\n");
    for node in graph.nodes() {
        let label = node.label().replace('\\', "\\\\").replace('"', "\\\"");
        out.push_str(&format!("  n{} [label=\"{label}\"];\n", node.id));
    }
    let mut edges: Vec<_> = graph.edges().iter().map(|e| (e.from, e.to)).collect();
    edges.sort();
    for (from, to) in edges {
        out.push_str(&format!("  n{from} -> n{to};\n"));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn name(graph: &DependencyGraph, id: NodeId) -> &str {
        &graph.node(id).unwrap().name
    }

    #[test]
    fn density_cases() {
        assert!((density(&fixtures::diamond()) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(density(&fixtures::chain(1)), 0.0);
        assert_eq!(density(&fixtures::complete(3)), 1.0);
    }

    #[test]
    fn depth_cases() {
        assert_eq!(depth_from_root(&fixtures::chain(3)), 2);
        assert_eq!(depth_from_root(&fixtures::diamond()), 2);
        assert_eq!(depth_from_root(&fixtures::chain(1)), 0);
        assert_eq!(depth_from_root(&fixtures::triangle()), 2);
    }

    #[test]
    fn cycle_cases() {
        let mut two = DependencyGraph::new(crate::Ecosystem::PyPI);
        let a = two.upsert_node("A", "1").unwrap();
        let b = two.upsert_node("B", "1").unwrap();
        two.add_edge(a, b).unwrap();
        two.add_edge(b, a).unwrap();
        assert_eq!(detect_cycles(&two), vec![vec![a, b]]);
        assert!(detect_cycles(&fixtures::diamond()).is_empty());
        let tri = detect_cycles(&fixtures::triangle());
        assert_eq!(tri.len(), 1);
        assert_eq!(tri[0].len(), 3);
    }

    #[test]
    fn root_leaf_paths() {
        assert_eq!(count_root_leaf_paths(&fixtures::diamond()), Ok(2));
        assert_eq!(count_root_leaf_paths(&fixtures::chain(3)), Ok(1));
        assert_eq!(count_root_leaf_paths(&fixtures::chain(1)), Ok(0));
        assert_eq!(count_root_leaf_paths(&fixtures::triangle()), Err(AnalyticsError::CyclicGraph));
    }

    #[test]
    fn in_degree_ranking() {
        let g = fixtures::diamond();
        let top = top_in_degree(&g, 1);
        assert_eq!(top.len(), 1);
        assert_eq!((top[0].node.name.as_str(), top[0].in_degree), ("D", 2));
        assert_eq!(top_in_degree(&g, 10).len(), 4);
        assert!(top_in_degree(&DependencyGraph::new(crate::Ecosystem::PyPI), 1).is_empty());
    }

    #[test]
    fn conflicts() {
        let found = multi_version_conflicts(&fixtures::g2());
        assert_eq!(found.len(), 1);
        let c = &found[0];
        assert_eq!(c.package_name, "X");
        assert_eq!(c.versions, vec!["1.0", "2.0"]);
        assert_eq!(c.dependents["1.0"], vec![PackageRef { name: "A".into(), version: "1.0".into() }]);
        assert_eq!(c.dependents["2.0"], vec![PackageRef { name: "B".into(), version: "1.0".into() }]);

        assert!(multi_version_conflicts(&fixtures::diamond()).is_empty());

        let mut orphan = fixtures::diamond();
        orphan.upsert_node("D", "2.0.0").unwrap();
        assert!(multi_version_conflicts(&orphan).is_empty());
    }

    #[test]
    fn paths_to_target() {
        let g = fixtures::diamond();
        let d = g.find("D", "1.0.0").unwrap();
        let found = all_paths_to(&g, d, 10).unwrap();
        let named: Vec<Vec<&str>> = found
            .paths
            .iter()
            .map(|p| p.iter().map(|id| name(&g, *id)).collect())
            .collect();
        assert_eq!(named, vec![vec!["A", "B", "D"], vec!["A", "C", "D"]]);
        assert!(!found.truncated);

        let capped = all_paths_to(&g, d, 1).unwrap();
        assert_eq!(capped.paths.len(), 1);
        assert!(capped.truncated);

        let root = g.root().unwrap();
        assert_eq!(all_paths_to(&g, root, 10).unwrap().paths, vec![vec![root]]);

        let mut isolated = fixtures::diamond();
        let lonely = isolated.upsert_node("Z", "1").unwrap();
        assert!(all_paths_to(&isolated, lonely, 10).unwrap().paths.is_empty());
        assert!(matches!(
            all_paths_to(&g, NodeId(99), 10),
            Err(AnalyticsError::Graph(GraphError::UnknownNode(_)))
        ));
    }

    #[test]
    fn dot_output() {
        assert_eq!(render_dot(&DependencyGraph::new(crate::Ecosystem::PyPI)), "digraph g {\n}\n");
        let dot = render_dot(&fixtures::diamond());
        assert_eq!(dot.matches("[label=").count(), 4);
        assert_eq!(dot.matches(" -> ").count(), 4);
        assert!(dot.contains("n0 [label=\"A@1.0.0\"];"));
        assert_eq!(dot, render_dot(&fixtures::diamond()));
    }

    #[test]
    fn diamond_metrics() {
        let m = metrics(&fixtures::diamond());
        assert_eq!(m.node_count, 4);
        assert_eq!(m.edge_count, 4);
        assert_eq!(m.depth, 2);
        assert!(!m.has_cycles);
        assert_eq!(m.root_leaf_path_count, 2);
        let tri = metrics(&fixtures::triangle());
        assert!(tri.has_cycles);
        assert_eq!(tri.root_leaf_path_count, 0);
    }

    proptest::proptest! {
        #[test]
        fn depth_is_longest_path_to_a_sink(seed in 0u64..10_000, n in 1usize..10) {
            let g = fixtures::random_dag(seed, n, 0.3);
            let longest = g
                .nodes()
                .iter()
                .filter(|node| g.out_degree(node.id) == 0)
                .flat_map(|node| all_paths_to(&g, node.id, usize::MAX).unwrap().paths)
                .map(|p| p.len() - 1)
                .max()
                .unwrap_or(0);
            proptest::prop_assert_eq!(depth_from_root(&g), longest);
            proptest::prop_assert_eq!(metrics(&g), metrics(&g));
        }
    }
}
