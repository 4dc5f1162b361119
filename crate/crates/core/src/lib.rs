//! Dependency knowledge graphs for package ecosystems.
//!
//! A package's resolved dependency closure is fetched from deps.dev and
//! stored as a property graph of `Package` nodes linked by `DEPENDS_ON`.
//! On top of the graph sit a Cypher-subset query engine, deterministic graph
//! analytics, OSV vulnerability lookups, and a multi-agent question answering
//! pipeline whose language-model calls go through a pluggable backend (an
//! OpenAI-compatible HTTP client, or a scripted backend for reproducible runs).

pub mod agents;
pub mod analytics;
pub mod cli;
pub mod config;
pub mod enrich;
pub mod fixtures;
pub mod graph;
pub mod http;
pub mod ingest;
pub mod query;
pub mod service;

pub use graph::{
    DependencyGraph, Ecosystem, GraphError, GraphId, GraphStore, NodeId, PackageCoordinates,
    PackageNode, SchemaDescription,
};
