use serde::{Deserialize, Serialize};

use super::orchestrator::ToolEvent;
use crate::analytics::{self, GraphMetrics};
use crate::enrich::{SearchResult, VulnRecord};
use crate::graph::DependencyGraph;
use crate::ingest::ConstructionReport;
use crate::query::ResultTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopPackage {
    pub package: String,
    pub in_degree: usize,
    /// Vulnerability ids found this turn; `None` when the package was not
    /// looked up.
    pub vulnerabilities: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query: String,
    pub result: Option<ResultTable>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageVulnerabilities {
    pub package: String,
    /// Number of packages in the graph that depend on this one directly.
    pub in_degree: Option<usize>,
    pub vulnerabilities: Vec<VulnRecord>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRecord {
    pub query: String,
    pub results: Vec<SearchResult>,
}

/// Structured summary of one assistant turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub package: Option<String>,
    pub construction: Option<ConstructionReport>,
    pub metrics: Option<GraphMetrics>,
    /// Packages sharing the highest in-degree.
    pub top_in_degree: Vec<TopPackage>,
    pub queries: Vec<QueryRecord>,
    pub vulnerabilities: Vec<PackageVulnerabilities>,
    pub searches: Vec<SearchRecord>,
    pub errors: Vec<String>,
}

impl Report {
    pub fn build(graph: Option<&DependencyGraph>, events: &[ToolEvent], mut errors: Vec<String>) -> Report {
        let mut construction = None;
        let mut queries = Vec::new();
        let mut vulnerabilities: Vec<PackageVulnerabilities> = Vec::new();
        let mut searches = Vec::new();
        for event in events {
            match event {
                ToolEvent::Constructed(r) => construction = Some(r.clone()),
                ToolEvent::Query { query, result } => queries.push(QueryRecord {
                    query: query.clone(),
                    result: result.as_ref().ok().cloned(),
                    error: result.as_ref().err().cloned(),
                }),
                ToolEvent::Vulnerabilities { package, result } => {
                    let label = format!("{}@{}", package.name, package.version);
                    let in_degree = graph
                        .and_then(|g| g.find(&package.name, &package.version))
                        .map(|id| graph.unwrap().in_degree(id));
                    let entry = PackageVulnerabilities {
                        package: label.clone(),
                        in_degree,
                        vulnerabilities: result.clone().unwrap_or_default(),
                        error: result.as_ref().err().cloned(),
                    };
                    match vulnerabilities.iter_mut().find(|v| v.package == label) {
                        Some(existing) => *existing = entry,
                        None => vulnerabilities.push(entry),
                    }
                }
                ToolEvent::Search { query, results } => searches.push(SearchRecord {
                    query: query.clone(),
                    results: results.clone(),
                }),
                ToolEvent::Failed { tool, message } => errors.push(format!("{tool}: {message}")),
            }
        }

        let top_in_degree = graph
            .map(|g| {
                let ranked = analytics::top_in_degree(g, g.node_count());
                let best = ranked.first().map(|e| e.in_degree).unwrap_or(0);
                ranked
                    .into_iter()
                    .take_while(|e| best > 0 && e.in_degree == best)
                    .map(|e| {
                        let package = e.node.label();
                        let vulns = vulnerabilities
                            .iter()
                            .find(|v| v.package == package && v.error.is_none())
                            .map(|v| v.vulnerabilities.iter().map(|r| r.id.clone()).collect());
                        TopPackage {
                            package,
                            in_degree: e.in_degree,
                            vulnerabilities: vulns,
                        }
                    })
                    .collect()
            })
            .unwrap_or_default();

        Report {
            package: graph.and_then(|g| g.root()).and_then(|r| graph.unwrap().node(r)).map(|n| n.label()),
            construction,
            metrics: graph.map(analytics::metrics),
            top_in_degree,
            queries,
            vulnerabilities,
            searches,
            errors,
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        if let Some(p) = &self.package {
            out.push_str(&format!("Package: {p}\n"));
        }
        if let Some(c) = &self.construction {
            out.push_str(&format!("{}\n", c.summary()));
        }
        if let Some(m) = &self.metrics {
            out.push_str(&format!(
                "Graph: {} nodes, {} edges, density {:.4}, depth {}, cycles {}, path chains {}\n",
                m.node_count,
                m.edge_count,
                m.density,
                m.depth,
                if m.has_cycles { "yes" } else { "no" },
                m.root_leaf_path_count
            ));
        }
        if !self.top_in_degree.is_empty() {
            out.push_str("Highest in-degree:\n");
            for t in &self.top_in_degree {
                let vulns = match &t.vulnerabilities {
                    Some(ids) if ids.is_empty() => "no known vulnerabilities".to_string(),
                    Some(ids) => ids.join(", "),
                    None => "not checked".to_string(),
                };
                out.push_str(&format!("  {} (in-degree {}): {vulns}\n", t.package, t.in_degree));
            }
        }
        if !self.vulnerabilities.is_empty() {
            out.push_str("Vulnerabilities:\n");
            for v in &self.vulnerabilities {
                match (&v.error, v.vulnerabilities.is_empty()) {
                    (Some(e), _) => out.push_str(&format!("  {}: lookup failed: {e}\n", v.package)),
                    (None, true) => out.push_str(&format!("  {}: none known\n", v.package)),
                    (None, false) => {
                        for r in &v.vulnerabilities {
                            out.push_str(&format!(
                                "  {}: {} [{}] {}\n",
                                v.package,
                                r.id,
                                r.severity.as_deref().unwrap_or("unrated"),
                                r.summary
                            ));
                        }
                    }
                }
            }
        }
        for q in &self.queries {
            out.push_str(&format!("Query: {}\n", q.query));
            match (&q.result, &q.error) {
                (Some(t), _) => out.push_str(&t.render_text()),
                (None, Some(e)) => out.push_str(&format!("  error: {e}\n")),
                _ => {}
            }
        }
        if !self.errors.is_empty() {
            out.push_str("Errors:\n");
            for e in &self.errors {
                out.push_str(&format!("  {e}\n"));
            }
        }
        out
    }
}
