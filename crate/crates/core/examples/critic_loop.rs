//! A reviewer catches a wrong answer and the assistant revises it.

use std::sync::Arc;

use depkg::agents::{Caps, Orchestrator, Script, ScriptStep, Services, ToolCall, ASSISTANT, CRITIC, DEPENDENCY_GRAPH};
use depkg::fixtures;

fn step(call: ToolCall) -> ScriptStep {
    call.into()
}

fn main() {
    let question = "How many path chains are in the dependency graph?";
    let ask_graph = |q: &str| step(ToolCall::Question { question: q.into(), target_agent: DEPENDENCY_GRAPH.into() });
    let done = |a: &str| step(ToolCall::Done { answer: a.into() });
    let script = Script::default()
        .agent(
            ASSISTANT,
            [
                ask_graph(question),
                done("There are 6 path chains."),
                ask_graph("Count only paths from the root to packages without dependencies."),
                done("There are 2 path chains."),
            ],
        )
        .agent(
            DEPENDENCY_GRAPH,
            [
                step(ToolCall::CypherQuery { query: "MATCH p=()-[r:DEPENDS_ON*]->() RETURN count(p)".into() }),
                done("6"),
                step(ToolCall::CypherQuery {
                    query: "MATCH p=(root:Package {name: 'A'})-[:DEPENDS_ON*]->(leaf) WHERE NOT (leaf)-[:DEPENDS_ON]->() RETURN count(p)".into(),
                }),
                done("2"),
            ],
        )
        .agent(
            CRITIC,
            [
                step(ToolCall::Feedback { approved: false, comments: "That counts every path, not root-to-leaf chains.".into() }),
                step(ToolCall::Feedback { approved: true, comments: String::new() }),
            ],
        );

    for critic in [false, true] {
        let mut o = Orchestrator::new(Services::default(), Caps::default(), &mut |a| Box::new(script.backend(a)))
            .with_graph(Arc::new(fixtures::diamond()))
            .with_critic(critic);
        let answer = o.ask(question);
        println!(
            "critic {}: {:?} (rounds {}, approved {:?})",
            if critic { "on " } else { "off" },
            answer.answer,
            answer.rounds,
            answer.approved
        );
    }
}
