//! The graph agent's query retry loop: each failed query's error text is
//! sent back until a query runs or the retry cap is reached.

use std::sync::Arc;

use depkg::agents::{Caps, Orchestrator, Script, Services, ToolCall, DEPENDENCY_GRAPH};
use depkg::fixtures;

fn cypher(q: &str) -> ToolCall {
    ToolCall::CypherQuery { query: q.into() }
}

fn run(queries: &[&str]) {
    let script = Script::default().agent(DEPENDENCY_GRAPH, queries.iter().map(|q| cypher(q).into()));
    let mut o = Orchestrator::new(Services::default(), Caps::default(), &mut |a| Box::new(script.backend(a)))
        .with_graph(Arc::new(fixtures::diamond()));
    match o.generate_cypher_with_retry("Which package has the most dependents?") {
        Ok(out) => {
            for e in &out.errors {
                println!("  rejected: {e}");
            }
            println!("  accepted after {} retries: {}", out.retries, out.query);
            print!("{}", out.table.render_text());
        }
        Err(e) => println!("  gave up: {e}"),
    }
}

fn main() {
    println!("one mistake:");
    run(&[
        "MATCH (p:Pkg)<-[:DEPENDS_ON]-(d) RETURN p.name, count(d)",
        "MATCH (p:Package)<-[:DEPENDS_ON]-(d) RETURN p.name, count(d) ORDER BY count(d) DESC LIMIT 1",
    ]);
    println!("too many mistakes:");
    run(&["MATCH x", "MATCH (p:Pkg) RETURN p", "MATCH (p)-[:IMPORTS]->(q) RETURN q", "RETURN", "MATCH (n:Package) RETURN n"]);
}
