//! Fetch a dependency graph from deps.dev and print it.
//!
//! With no arguments this runs offline against recorded responses. Pass
//! `ECOSYSTEM NAME VERSION` to query the live API, e.g.
//! `cargo run --example build_graph -- pypi chainlit 1.1.200`.

use std::time::Duration;

use depkg::fixtures::{self, FixtureServer};
use depkg::ingest::{DepsDevClient, DEFAULT_DEPSDEV_BASE_URL};
use depkg::PackageCoordinates;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (_server, base, coords) = match args.as_slice() {
        [eco, name, version] => (None, DEFAULT_DEPSDEV_BASE_URL.to_string(), PackageCoordinates::new(eco.parse()?, name, version)?),
        [] => {
            let server = FixtureServer::start_default();
            let base = server.base_url();
            (Some(server), base, fixtures::chainlit_coordinates())
        }
        _ => return Err("usage: build_graph [ECOSYSTEM NAME VERSION]".into()),
    };

    let client = DepsDevClient::new(base, Duration::from_secs(30));
    let (graph, report) = client.construct(&coords)?;
    println!("{}", report.summary());
    for node in graph.nodes() {
        let deps: Vec<String> = graph
            .out_neighbors(node.id)
            .iter()
            .filter_map(|&d| graph.node(d))
            .map(|n| n.label())
            .collect();
        println!("  {} -> [{}]", node.label(), deps.join(", "));
    }
    for flagged in &report.flagged {
        println!("  flagged {}: {}", flagged.package, flagged.errors.join("; "));
    }
    Ok(())
}
