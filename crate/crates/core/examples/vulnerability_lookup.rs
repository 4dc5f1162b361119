//! Look up known vulnerabilities in OSV for several packages at once.
//!
//! Runs against recorded responses; set `OSV_BASE_URL=https://api.osv.dev`
//! and pass `ECOSYSTEM NAME VERSION` triples to query the live service.

use std::time::Duration;

use depkg::enrich::OsvClient;
use depkg::fixtures::FixtureServer;
use depkg::{Ecosystem, PackageCoordinates};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let server = FixtureServer::start_default();
    let base = std::env::var("OSV_BASE_URL").unwrap_or_else(|_| server.base_url());
    let packages = if args.is_empty() {
        ["B", "C", "D"]
            .iter()
            .map(|n| PackageCoordinates::new(Ecosystem::PyPI, *n, "1.0.0"))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        args.chunks(3)
            .map(|c| match c {
                [e, n, v] => Ok(PackageCoordinates::new(e.parse()?, n, v)?),
                _ => Err("arguments come in ECOSYSTEM NAME VERSION triples".into()),
            })
            .collect::<Result<Vec<_>, Box<dyn std::error::Error>>>()?
    };

    let osv = OsvClient::new(base, Duration::from_secs(30)).with_concurrency(4);
    for (package, result) in packages.iter().zip(osv.query_batch(&packages)) {
        match result {
            Ok(records) if records.is_empty() => println!("{package}: no known vulnerabilities"),
            Ok(records) => {
                for r in records {
                    println!("{package}: {} [{}] {}", r.id, r.severity.as_deref().unwrap_or("unrated"), r.summary);
                }
            }
            Err(e) => println!("{package}: lookup failed: {e}"),
        }
    }
    Ok(())
}
