//! Vulnerability lookups against OSV and a pluggable web-search provider.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::graph::PackageCoordinates;
use crate::http::{endpoint, HttpClient};

pub const DEFAULT_OSV_BASE_URL: &str = "https://api.osv.dev";
pub const DEFAULT_SEARCH_K: usize = 3;
pub const DEFAULT_OSV_CONCURRENCY: usize = 4;
const MAX_OSV_PAGES: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnrichError {
    #[error("network error: {0}")]
    Network(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("search provider unavailable: {0}")]
    ProviderUnavailable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VulnRecord {
    pub id: String,
    pub summary: String,
    pub severity: Option<String>,
    pub references: Vec<String>,
}

mod wire {
    use serde::Deserialize;

    #[derive(Deserialize)]
    pub struct Response {
        #[serde(default)]
        pub vulns: Vec<Vuln>,
        #[serde(default)]
        pub next_page_token: Option<String>,
    }

    #[derive(Deserialize)]
    pub struct Vuln {
        pub id: String,
        #[serde(default)]
        pub summary: Option<String>,
        #[serde(default)]
        pub details: Option<String>,
        #[serde(default)]
        pub severity: Vec<Severity>,
        #[serde(default)]
        pub database_specific: Option<serde_json::Value>,
        #[serde(default)]
        pub references: Vec<Reference>,
    }

    #[derive(Deserialize)]
    pub struct Severity {
        pub score: String,
    }

    #[derive(Deserialize)]
    pub struct Reference {
        pub url: String,
    }
}

/// Decodes an OSV `/v1/query` response body, returning the records and the
/// next page token if any.
pub fn decode_osv(body: &str) -> Result<(Vec<VulnRecord>, Option<String>), EnrichError> {
    let raw: wire::Response =
        serde_json::from_str(body).map_err(|e| EnrichError::Decode(e.to_string()))?;
    let records = raw
        .vulns
        .into_iter()
        .map(|v| {
            if v.id.trim().is_empty() {
                return Err(EnrichError::Decode("vulnerability with empty id".into()));
            }
            let severity = v
                .database_specific
                .as_ref()
                .and_then(|d| d.get("severity"))
                .and_then(|s| s.as_str())
                .map(str::to_string)
                .or_else(|| v.severity.first().map(|s| s.score.clone()));
            let summary = v
                .summary
                .or_else(|| v.details.and_then(|d| d.lines().next().map(str::to_string)))
                .unwrap_or_default();
            Ok(VulnRecord {
                id: v.id,
                summary,
                severity,
                references: v.references.into_iter().map(|r| r.url).collect(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let token = raw.next_page_token.filter(|t| !t.is_empty());
    Ok((records, token))
}

#[derive(Debug, Clone)]
pub struct OsvClient {
    base_url: String,
    http: HttpClient,
    concurrency: usize,
}

impl OsvClient {
    pub fn new(base_url: impl Into<String>, timeout: Duration) -> Self {
        Self {
            base_url: base_url.into(),
            http: HttpClient::new(timeout),
            concurrency: DEFAULT_OSV_CONCURRENCY,
        }
    }

    pub fn with_concurrency(mut self, cap: usize) -> Self {
        self.concurrency = cap.max(1);
        self
    }

    pub fn query(&self, coords: &PackageCoordinates) -> Result<Vec<VulnRecord>, EnrichError> {
        let url = endpoint(&self.base_url, &["v1", "query"]).map_err(|e| EnrichError::Network(e.0))?;
        let mut records: Vec<VulnRecord> = Vec::new();
        let mut seen = HashSet::new();
        let mut page_token: Option<String> = None;
        for _ in 0..MAX_OSV_PAGES {
            let mut body = json!({
                "package": {"name": coords.name, "ecosystem": coords.ecosystem.osv_name()},
                "version": coords.version,
            });
            if let Some(token) = &page_token {
                body["page_token"] = json!(token);
            }
            let response = self
                .http
                .post_json(&url, &body, &[])
                .map_err(|e| EnrichError::Network(e.0))?;
            if response.status != 200 {
                return Err(EnrichError::Network(format!(
                    "OSV answered HTTP {} for {coords}",
                    response.status
                )));
            }
            let (page, next) = decode_osv(&response.body)?;
            for record in page {
                if !seen.insert(record.id.clone()) {
                    return Err(EnrichError::Decode(format!(
                        "vulnerability id {} appears twice",
                        record.id
                    )));
                }
                records.push(record);
            }
            match next {
                Some(token) => page_token = Some(token),
                None => return Ok(records),
            }
        }
        Ok(records)
    }

    /// Queries every package with at most `concurrency` requests in flight.
    /// Results are returned in input order.
    pub fn query_batch(
        &self,
        packages: &[PackageCoordinates],
    ) -> Vec<Result<Vec<VulnRecord>, EnrichError>> {
        let mut results = Vec::with_capacity(packages.len());
        for chunk in packages.chunks(self.concurrency) {
            std::thread::scope(|scope| {
                let handles: Vec<_> = chunk.iter().map(|c| scope.spawn(move || self.query(c))).collect();
                for h in handles {
                    results.push(h.join().expect("OSV worker panicked"));
                }
            });
        }
        results
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub title: String,
    pub url: String,
    pub snippet: String,
}

pub trait SearchProvider: Send + Sync {
    /// The provider's results for `query`, at most `k` of them, in order.
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, EnrichError>;
}

/// Serves canned results from a JSON object mapping queries to result lists.
/// Lookup tries the exact query, then each key contained in the query
/// (case-insensitively, longest key first), then `"*"`.
#[derive(Debug, Clone, Default)]
pub struct StubSearchProvider {
    results: BTreeMap<String, Vec<SearchResult>>,
}

impl StubSearchProvider {
    pub fn new(results: BTreeMap<String, Vec<SearchResult>>) -> Result<Self, EnrichError> {
        for r in results.values().flatten() {
            if r.url.trim().is_empty() {
                return Err(EnrichError::Decode(format!("search result `{}` has an empty url", r.title)));
            }
        }
        Ok(Self { results })
    }

    pub fn from_json(text: &str) -> Result<Self, EnrichError> {
        Self::new(serde_json::from_str(text).map_err(|e| EnrichError::Decode(e.to_string()))?)
    }

    pub fn from_path(path: &Path) -> Result<Self, EnrichError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            EnrichError::ProviderUnavailable(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    fn lookup(&self, query: &str) -> &[SearchResult] {
        if let Some(r) = self.results.get(query) {
            return r;
        }
        let lowered = query.to_lowercase();
        let mut keys: Vec<&String> = self
            .results
            .keys()
            .filter(|k| k.as_str() != "*" && lowered.contains(&k.to_lowercase()))
            .collect();
        keys.sort_by_key(|k| std::cmp::Reverse(k.len()));
        keys.first()
            .map(|k| self.results[*k].as_slice())
            .or_else(|| self.results.get("*").map(Vec::as_slice))
            .unwrap_or(&[])
    }
}

impl SearchProvider for StubSearchProvider {
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, EnrichError> {
        Ok(self.lookup(query).iter().take(k).cloned().collect())
    }
}

/// Stands in when no provider is configured.
#[derive(Debug, Clone, Default)]
pub struct NoSearchProvider;

impl SearchProvider for NoSearchProvider {
    fn search(&self, _query: &str, _k: usize) -> Result<Vec<SearchResult>, EnrichError> {
        Err(EnrichError::ProviderUnavailable("no search provider is configured".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, FixtureServer};
    use crate::graph::Ecosystem;

    fn coords(name: &str, version: &str) -> PackageCoordinates {
        PackageCoordinates::new(Ecosystem::PyPI, name, version).unwrap()
    }

    fn result(i: usize) -> SearchResult {
        SearchResult {
            title: format!("t{i}"),
            url: format!("https://example.invalid/{i}"),
            snippet: String::new(),
        }
    }

    #[test]
    fn decode_cases() {
        assert_eq!(decode_osv(r#"{"vulns":[]}"#).unwrap().0, vec![]);
        assert_eq!(decode_osv("{}").unwrap().0, vec![]);
        assert!(matches!(decode_osv("<html>"), Err(EnrichError::Decode(_))));
        let (records, _) = decode_osv(fixtures::OSV_D).unwrap();
        assert_eq!(records[0].id, "GHSA-TEST-0001");
        assert_eq!(records[0].severity.as_deref(), Some("HIGH"));
        assert!(records[1].severity.as_deref().unwrap().starts_with("CVSS:3.1"));
        assert_eq!(records[0].references.len(), 2);
    }

    #[test]
    fn fixture_queries() {
        let server = FixtureServer::start_default();
        let client = OsvClient::new(server.base_url(), Duration::from_secs(5));
        assert_eq!(client.query(&coords("A", "1.0.0")).unwrap(), vec![]);
        let d = client.query(&coords("D", "1.0.0")).unwrap();
        assert_eq!(d.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), vec!["GHSA-TEST-0001", "PYSEC-TEST-0002"]);
        assert_eq!(d, client.query(&coords("D", "1.0.0")).unwrap());

        let batch = OsvClient::new(server.base_url(), Duration::from_secs(5))
            .with_concurrency(2)
            .query_batch(&[coords("D", "1.0.0"), coords("A", "1.0.0"), coords("B", "1.0.0")]);
        let counts: Vec<usize> = batch.into_iter().map(|r| r.unwrap().len()).collect();
        assert_eq!(counts, vec![2, 0, 1]);
    }

    #[test]
    fn malformed_and_duplicate_bodies() {
        let server = FixtureServer::builder()
            .osv(Ecosystem::PyPI, "bad", "1", "not json")
            .osv(Ecosystem::PyPI, "dup", "1", r#"{"vulns":[{"id":"X-1"},{"id":"X-1"}]}"#)
            .start();
        let client = OsvClient::new(server.base_url(), Duration::from_secs(5));
        assert!(matches!(client.query(&coords("bad", "1")), Err(EnrichError::Decode(_))));
        assert!(matches!(client.query(&coords("dup", "1")), Err(EnrichError::Decode(_))));
        let down = OsvClient::new("http://127.0.0.1:9", Duration::from_millis(500));
        assert!(matches!(down.query(&coords("A", "1")), Err(EnrichError::Network(_))));
    }

    #[test]
    fn stub_search_passthrough_and_truncation() {
        let three = StubSearchProvider::new(BTreeMap::from([("q".to_string(), (0..3).map(result).collect())])).unwrap();
        assert_eq!(three.search("q", 3).unwrap(), (0..3).map(result).collect::<Vec<_>>());
        let five = StubSearchProvider::new(BTreeMap::from([("q".to_string(), (0..5).map(result).collect())])).unwrap();
        assert_eq!(five.search("q", DEFAULT_SEARCH_K).unwrap(), (0..3).map(result).collect::<Vec<_>>());
        let none = StubSearchProvider::new(BTreeMap::from([("q".to_string(), vec![])])).unwrap();
        assert!(none.search("q", 3).unwrap().is_empty());
        assert!(matches!(NoSearchProvider.search("q", 3), Err(EnrichError::ProviderUnavailable(_))));
    }

    #[test]
    fn stub_search_fixture_lookup() {
        let stub = StubSearchProvider::from_json(fixtures::SEARCH_RESULTS).unwrap();
        let hits = stub.search("what is Chainlit used for?", 3).unwrap();
        assert_eq!(hits.len(), 3);
        assert_eq!(hits[0].title, "chainlit on PyPI");
        assert_eq!(stub.search("unrelated", 3).unwrap().len(), 1);
        assert!(StubSearchProvider::from_json(r#"{"q":[{"title":"t","url":" ","snippet":""}]}"#).is_err());
    }
}
