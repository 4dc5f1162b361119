//! Run Cypher queries against the four-package diamond A→{B,C}→D.

use depkg::fixtures;
use depkg::query;

fn main() {
    let graph = fixtures::diamond_as_chainlit();
    let queries = [
        // counts only chains that start at the root and end at a leaf
        "MATCH p=(root:Package {name: 'chainlit', version: '1.1.200'})-[:DEPENDS_ON*]->(leaf:Package) WHERE NOT (leaf)-[:DEPENDS_ON]->() RETURN count(p) AS pathChains",
        // counts every trail in the graph
        "MATCH p=()-[r:DEPENDS_ON*]->() RETURN count(p)",
        "MATCH (p:Package)<-[:DEPENDS_ON]-(d) RETURN p.name, count(d) ORDER BY count(d) DESC LIMIT 1",
        "MATCH p=(a:Package)-[:DEPENDS_ON*]->(b:Package) RETURN a.name AS from, b.name AS to, length(p) AS hops ORDER BY hops DESC",
        "MATCH (p:Pkg) RETURN p",
        "MATCH (p RETURN p",
    ];
    for q in queries {
        println!("{q}");
        match query::run(&graph, q) {
            Ok(table) => println!("{}", table.render_text()),
            Err(e) => println!("error: {e}\n"),
        }
    }
}
