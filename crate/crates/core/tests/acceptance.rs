//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;
mod oracle;

use std::sync::Arc;
use std::time::{Duration, Instant};

use depkg::agents::{
    AgentError, Caps, Event, Orchestrator, PackageArg, Script, ScriptStep, Services, Tool, ToolCall, AGENT_NAMES,
    ASSISTANT, CRITIC, DEPENDENCY_GRAPH, SEARCH,
};
use depkg::analytics::{self, AnalyticsError};
use depkg::enrich::{OsvClient, StubSearchProvider};
use depkg::fixtures::{self, FixtureServer};
use depkg::ingest::{build_graph, decode_document, DecodeError, DepsDevClient, Relation};
use depkg::query::{self, Scalar};
use depkg::{DependencyGraph, NodeId};
use oracle::Raw;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("query engine matches brute-force oracle", query_oracle),
        ("listing queries on the diamond give 2 and 6", listing_queries),
        ("analytics match exhaustive oracles", analytics_oracle),
        ("ingest builds the chainlit document and names decode errors", ingest),
        ("query retry feeds back errors and caps at 3", retry),
        ("critic loop corrects in 2 rounds and stops at 10", critic),
        ("end-to-end vulnerability report is reproducible", end_to_end),
        ("agents never run tools outside their allowed set", permission_fuzz),
        ("service matches golden exchanges and refuses concurrent turns", service_contract),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name} ({detail}; {secs:.2}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn scalar_count(g: &DependencyGraph, q: &str) -> Result<Scalar, String> {
    let t = query::run(g, q).map_err(|e| format!("{q}: {e}"))?;
    t.single().cloned().ok_or_else(|| format!("{q}: expected one value, got {:?}", t.rows))
}

fn query_oracle() -> Outcome {
    let started = Instant::now();
    let mut checks = 0;
    for seed in 0..200u64 {
        let n = 1 + (seed as usize % 12);
        let g = fixtures::random_dag(seed, n, 0.3);
        let r = Raw::of(&g);
        let root = g.node(g.root().unwrap()).unwrap();
        let mismatch = |what: &str, got: &dyn std::fmt::Debug, want: &dyn std::fmt::Debug| {
            format!("seed {seed}, {what}: engine {got:?}, oracle {want:?}")
        };

        let got = scalar_count(&g, "MATCH (p:Package) RETURN count(p) AS n")?;
        check!(got == Scalar::Int(oracle::node_count(&r)), "{}", mismatch("node count", &got, &oracle::node_count(&r)));

        let got = scalar_count(&g, "MATCH (a:Package)-[r:DEPENDS_ON]->(b:Package) RETURN count(r) AS n")?;
        check!(got == Scalar::Int(oracle::edge_count(&r)), "{}", mismatch("edge count", &got, &oracle::edge_count(&r)));

        let t = query::run(
            &g,
            "MATCH (p:Package)<-[:DEPENDS_ON]-(d:Package) RETURN p.name AS name, p.version AS version, count(d) AS dependents ORDER BY dependents DESC LIMIT 1",
        )
        .map_err(|e| e.to_string())?;
        let want: Vec<Vec<Scalar>> = oracle::top_in_degree_row(&r)
            .map(|(name, version, d)| vec![vec![Scalar::String(name), Scalar::String(version), Scalar::Int(d)]])
            .unwrap_or_default();
        check!(t.rows == want, "{}", mismatch("in-degree top-1", &t.rows, &want));

        let q = format!(
            "MATCH p=(root:Package {{name: '{}', version: '{}'}})-[:DEPENDS_ON*]->(leaf:Package) WHERE NOT (leaf)-[:DEPENDS_ON]->() RETURN count(p) AS chains",
            root.name, root.version
        );
        let got = scalar_count(&g, &q)?;
        check!(got == Scalar::Int(oracle::root_leaf_trails(&r)), "{}", mismatch("root-to-leaf paths", &got, &oracle::root_leaf_trails(&r)));

        let got = scalar_count(&g, "MATCH p=(a:Package)-[:DEPENDS_ON*]->(b:Package) RETURN max(length(p)) AS longest")?;
        let want = oracle::max_trail_length(&r).map(Scalar::Int).unwrap_or(Scalar::Null);
        check!(got == want, "{}", mismatch("max path length", &got, &want));

        let t = query::run(&g, "MATCH (p:Package) WHERE p.version = '1.0.0' RETURN p.name AS name, p.version AS version")
            .map_err(|e| e.to_string())?;
        let want: Vec<Vec<Scalar>> = oracle::with_version(&r, "1.0.0")
            .into_iter()
            .map(|(n, v)| vec![Scalar::String(n), Scalar::String(v)])
            .collect();
        check!(t.rows == want, "{}", mismatch("property filter", &t.rows, &want));
        checks += 6;
    }
    let elapsed = started.elapsed();
    check!(elapsed < Duration::from_secs(60), "took {elapsed:?}, limit 60s");
    Ok(format!("{checks} comparisons, 0 mismatches"))
}

const ROOT_LEAF_QUERY: &str = "MATCH p=(root:Package {name: 'chainlit', version: '1.1.200'})-[:DEPENDS_ON*]->(leaf:Package) WHERE NOT (leaf)-[:DEPENDS_ON]->() RETURN count(p) AS pathChains";
const ALL_TRAILS_QUERY: &str = "MATCH p=()-[r:DEPENDS_ON*]->() RETURN count(p)";

fn listing_queries() -> Outcome {
    for q in [ROOT_LEAF_QUERY, ALL_TRAILS_QUERY] {
        query::parse(q).map_err(|e| format!("{q}: {e}"))?;
    }
    let diamond = fixtures::diamond_as_chainlit();
    let root_leaf = scalar_count(&diamond, ROOT_LEAF_QUERY)?;
    let all = scalar_count(&diamond, ALL_TRAILS_QUERY)?;
    check!(root_leaf == Scalar::Int(2), "root-to-leaf variant gave {root_leaf:?}, expected 2");
    check!(all == Scalar::Int(6), "all-trails variant gave {all:?}, expected 6");
    let r = Raw::of(&diamond);
    check!(
        (oracle::root_leaf_trails(&r), oracle::all_trails(&r)) == (2, 6),
        "oracle disagrees with the fixture values"
    );
    Ok("root-to-leaf 2, all trails 6".into())
}

fn analytics_oracle() -> Outcome {
    for seed in 0..50u64 {
        let n = 1 + (seed as usize % 10);
        let g = if seed % 2 == 0 {
            fixtures::random_dag(seed, n, 0.3)
        } else {
            fixtures::random_graph(seed, n, 0.15)
        };
        let r = Raw::of(&g);
        let ctx = |what: &str| format!("seed {seed} ({n} nodes, {} edges), {what}", r.edges.len());

        let m = analytics::metrics(&g);
        check!(m.density == oracle::density(&r), "{}: {} vs {}", ctx("density"), m.density, oracle::density(&r));
        check!(m.depth == oracle::depth(&r), "{}: {} vs {}", ctx("depth"), m.depth, oracle::depth(&r));
        check!(m.has_cycles == oracle::has_cycle(&r), "{}", ctx("cycle presence"));
        check!(m.root_leaf_path_count == oracle::root_leaf_paths(&r), "{}: {} vs {}", ctx("path chains"), m.root_leaf_path_count, oracle::root_leaf_paths(&r));
        match analytics::count_root_leaf_paths(&g) {
            Ok(c) => check!(!oracle::has_cycle(&r) && c == oracle::root_leaf_paths(&r), "{}", ctx("path chains (acyclic)")),
            Err(AnalyticsError::CyclicGraph) => check!(oracle::has_cycle(&r), "{}", ctx("spurious CyclicGraph")),
            Err(e) => return Err(format!("{}: {e}", ctx("path chains"))),
        }

        let cycles = analytics::detect_cycles(&g);
        let cycles: Vec<Vec<usize>> = cycles.iter().map(|c| c.iter().map(|v| v.0).collect()).collect();
        check!(cycles.iter().all(|c| oracle::is_elementary_cycle(&r, c)), "{}: {cycles:?}", ctx("non-cycle reported"));
        for scc in oracle::nontrivial_sccs(&r) {
            check!(
                cycles.iter().any(|c| c.iter().all(|v| scc.contains(v))),
                "{}: no cycle reported for component {scc:?}",
                ctx("cycles")
            );
        }
        check!(cycles.is_empty() != oracle::has_cycle(&r), "{}", ctx("cycles vs acyclicity"));

        for k in [1, 3, n + 2] {
            let got: Vec<(usize, usize)> = analytics::top_in_degree(&g, k).iter().map(|e| (e.node.id.0, e.in_degree)).collect();
            check!(got == oracle::top_in_degree(&r, k), "{}: {got:?}", ctx(&format!("top-{k} in-degree")));
        }

        let got: oracle::Conflicts = analytics::multi_version_conflicts(&g)
            .into_iter()
            .map(|c| {
                let versions = c
                    .dependents
                    .into_iter()
                    .map(|(v, deps)| (v, deps.into_iter().map(|d| (d.name, d.version)).collect()))
                    .collect();
                (c.package_name, versions)
            })
            .collect();
        check!(got == oracle::conflicts(&r), "{}: {got:?} vs {:?}", ctx("conflicts"), oracle::conflicts(&r));
    }

    let diamond = fixtures::diamond();
    let m = analytics::metrics(&diamond);
    check!((m.density - 1.0 / 3.0).abs() < 1e-12, "diamond density {}", m.density);
    check!(m.depth == 2 && m.root_leaf_path_count == 2, "diamond depth {} paths {}", m.depth, m.root_leaf_path_count);
    let top = analytics::top_in_degree(&diamond, 1);
    check!(top.len() == 1 && top[0].node.name == "D" && top[0].in_degree == 2, "diamond top in-degree {top:?}");
    Ok("50 graphs; diamond density 0.333, depth 2, paths 2, top (D, 2)".into())
}

fn ingest() -> Outcome {
    let doc = decode_document(fixtures::DEPSDEV_CHAINLIT.as_bytes()).map_err(|e| e.to_string())?;
    let g = build_graph(&doc);
    check!((g.node_count(), g.edge_count()) == (3, 2), "chainlit has {} nodes, {} edges", g.node_count(), g.edge_count());
    let root = g.node(g.root().ok_or("chainlit has no root")?).unwrap();
    let self_node = &doc.nodes[doc.self_index()];
    check!(self_node.relation == Relation::SelfNode, "SELF index points at {:?}", self_node.relation);
    check!(
        (root.name.as_str(), root.version.as_str()) == (self_node.coordinates.name.as_str(), self_node.coordinates.version.as_str()),
        "root is {root:?}, SELF is {}",
        self_node.coordinates
    );
    check!(root.id == NodeId(0), "root is not the first node");

    let node = |name: &str, relation: &str| json!({"versionKey": {"system": "PYPI", "name": name, "version": "1.0"}, "relation": relation, "errors": []});
    let doc = |nodes: Vec<serde_json::Value>, edges: Vec<(usize, usize)>| {
        let edges: Vec<_> = edges.into_iter().map(|(f, t)| json!({"fromNode": f, "toNode": t, "requirement": ""})).collect();
        json!({"nodes": nodes, "edges": edges}).to_string()
    };
    let cases: Vec<(&str, String, fn(&DecodeError) -> bool)> = vec![
        ("truncated JSON", "{\"nodes\": [".into(), |e| matches!(e, DecodeError::Malformed(_))),
        (
            "duplicate coordinates",
            doc(vec![node("a", "SELF"), node("b", "DIRECT"), node("b", "INDIRECT")], vec![(0, 1)]),
            |e| matches!(e, DecodeError::DuplicateCoordinates { first: 1, second: 2, .. }),
        ),
        (
            "edge index out of range",
            doc(vec![node("a", "SELF"), node("b", "DIRECT")], vec![(0, 7)]),
            |e| matches!(e, DecodeError::IndexOutOfRange { index: 7, len: 2, .. }),
        ),
        ("self edge", doc(vec![node("a", "SELF")], vec![(0, 0)]), |e| matches!(e, DecodeError::SelfEdge { .. })),
        ("no SELF node", doc(vec![node("a", "DIRECT")], vec![]), |e| matches!(e, DecodeError::MissingSelf)),
        (
            "two SELF nodes",
            doc(vec![node("a", "SELF"), node("b", "SELF")], vec![]),
            |e| matches!(e, DecodeError::MultipleSelf { first: 0, second: 1 }),
        ),
    ];
    for (what, body, expected) in &cases {
        match decode_document(body.as_bytes()) {
            Err(e) if expected(&e) => {}
            other => return Err(format!("{what}: got {other:?}")),
        }
    }
    Ok(format!("chainlit 3 nodes / 2 edges rooted at SELF; {} malformed documents rejected", cases.len()))
}

fn cypher(query: &str) -> ScriptStep {
    ToolCall::CypherQuery { query: query.into() }.into()
}

fn done(answer: &str) -> ScriptStep {
    ToolCall::Done { answer: answer.into() }.into()
}

fn feedback(approved: bool, comments: &str) -> ScriptStep {
    ToolCall::Feedback { approved, comments: comments.into() }.into()
}

fn ask_graph(question: &str) -> ScriptStep {
    ToolCall::Question { question: question.into(), target_agent: DEPENDENCY_GRAPH.into() }.into()
}

fn orchestrator(script: &Script, services: Services) -> Orchestrator {
    Orchestrator::new(services, Caps::default(), &mut |agent| Box::new(script.backend(agent)))
}

fn retry() -> Outcome {
    let bad = "MATCH (n:Pkg) RETURN count(n)";
    let good = "MATCH (n:Package) RETURN count(n)";
    let script = Script::default().agent(DEPENDENCY_GRAPH, [cypher(bad), cypher(good)]);
    let backend = script.backend(DEPENDENCY_GRAPH);
    let seen = backend.observer();
    let mut backend = Some(backend);
    let mut o = Orchestrator::new(Services::default(), Caps::default(), &mut |agent| {
        match (agent == DEPENDENCY_GRAPH).then(|| backend.take()).flatten() {
            Some(b) => Box::new(b),
            None => Box::new(script.backend(agent)),
        }
    })
    .with_graph(Arc::new(fixtures::diamond()));
    let out = o.generate_cypher_with_retry("How many packages are there?").map_err(|e| e.to_string())?;
    check!(out.retries == 1, "{} retries", out.retries);
    check!(out.table.single() == Some(&Scalar::Int(4)), "result {:?}", out.table);
    let error_text = query::run(&fixtures::diamond(), bad).unwrap_err().to_string();
    let prompts = seen.lock().unwrap();
    let retry_prompt = &prompts.get(1).ok_or("no second prompt")?.last().unwrap().content;
    check!(retry_prompt.contains(&error_text), "retry prompt lacks `{error_text}`: {retry_prompt}");

    let invalid = ["MATCH x", "MATCH (n:Pkg) RETURN n", "MATCH (n)-[:IMPORTS]->(m) RETURN m", "MATCH (n) RETURN q"];
    let script = Script::default().agent(DEPENDENCY_GRAPH, invalid.iter().map(|q| cypher(q)).chain([cypher(good)]));
    let mut o = orchestrator(&script, Services::default()).with_graph(Arc::new(fixtures::diamond()));
    match o.generate_cypher_with_retry("q") {
        Err(AgentError::QueryGenerationFailed { errors }) if errors.len() == 4 => {}
        other => return Err(format!("four invalid queries gave {other:?}")),
    }
    Ok(format!("1 retry carrying `{error_text}`; 4 failures give QueryGenerationFailed"))
}

/// Pulls the first integer out of an answer.
fn number_in(answer: &str) -> Option<u64> {
    answer
        .split(|c: char| !c.is_ascii_digit())
        .find(|s| !s.is_empty())
        .and_then(|s| s.parse().ok())
}

fn critic() -> Outcome {
    let question = "How many path chains are in the dependency graph?";
    let truth = analytics::count_root_leaf_paths(&fixtures::diamond_as_chainlit()).unwrap();
    let producer = Script::default()
        .agent(
            ASSISTANT,
            [
                ask_graph(question),
                done("There are 6 path chains in the graph."),
                ask_graph("Count only paths from the root to packages with no dependencies."),
                done("There are 2 path chains from the root to a leaf."),
            ],
        )
        .agent(
            DEPENDENCY_GRAPH,
            [cypher(ALL_TRAILS_QUERY), done("6"), cypher(ROOT_LEAF_QUERY), done("2")],
        )
        .agent(
            CRITIC,
            [
                feedback(false, "That counts every path in the graph. Path chains run from the root to a leaf."),
                feedback(true, "Correct."),
            ],
        );
    let graph = Arc::new(fixtures::diamond_as_chainlit());

    let mut without = orchestrator(&producer, Services::default()).with_graph(graph.clone());
    let a = without.ask(question);
    check!(number_in(&a.answer) != Some(truth), "without the critic the answer was already correct: {}", a.answer);

    let mut with = orchestrator(&producer, Services::default()).with_graph(graph.clone()).with_critic(true);
    let b = with.ask(question);
    check!(number_in(&b.answer) == Some(truth), "with the critic the answer is still wrong: {}", b.answer);
    check!(b.rounds == 2 && b.approved == Some(true), "rounds {} approved {:?}", b.rounds, b.approved);

    let stubborn = Script::default()
        .agent(ASSISTANT, (0..15).map(|i| done(&format!("Draft {i}."))))
        .agent(CRITIC, (0..15).map(|_| feedback(false, "Not good enough.")));
    let mut o = orchestrator(&stubborn, Services::default()).with_critic(true);
    let c = o.ask(question);
    check!(c.rounds == 10 && c.approved == Some(false), "stubborn critic: rounds {} approved {:?}", c.rounds, c.approved);
    Ok(format!("without critic {:?}, with critic {:?} after 2 rounds; cap 10 rounds unapproved", number_in(&a.answer), number_in(&b.answer)))
}

fn fixture_services(server: &FixtureServer) -> Services {
    Services {
        depsdev: Some(DepsDevClient::new(server.base_url(), Duration::from_secs(5))),
        osv: Some(OsvClient::new(server.base_url(), Duration::from_secs(5))),
        search: Arc::new(StubSearchProvider::from_json(fixtures::SEARCH_RESULTS).unwrap()),
    }
}

const HUB_RISK_QUESTION: &str = "which packages in A version 1.0.0 pypi have the most dependencies relying on them (i.e., nodes have the highest in-degree in the graph), and what is the risk associated with a vulnerability in those packages?";

fn end_to_end() -> Outcome {
    let mut transcripts = Vec::new();
    let mut summary = String::new();
    for run in 0..3 {
        let server = FixtureServer::start_default();
        let mut o = orchestrator(&common::script("vulnerable-hubs.json"), fixture_services(&server));
        let out = o.ask(HUB_RISK_QUESTION);
        check!(out.report.errors.is_empty(), "run {run}: errors {:?}", out.report.errors);
        let top = &out.report.top_in_degree;
        check!(top.len() == 1, "run {run}: top in-degree {top:?}");
        check!(top[0].package == "D@1.0.0" && top[0].in_degree == 2, "run {run}: top {:?}", top[0]);
        let ids = top[0].vulnerabilities.clone().unwrap_or_default();
        check!(ids == ["GHSA-TEST-0001", "PYSEC-TEST-0002"], "run {run}: vulnerabilities {ids:?}");
        summary = format!("{} (in-degree {}): {}", top[0].package, top[0].in_degree, ids.join(", "));
        transcripts.push(o.transcript().to_jsonl());
    }
    check!(transcripts.iter().all(|t| t == &transcripts[0]), "transcripts differ between runs");
    Ok(format!("{summary}; {} transcript bytes identical across 3 runs", transcripts[0].len()))
}

fn random_step(rng: &mut ChaCha8Rng) -> ScriptStep {
    let agent = |rng: &mut ChaCha8Rng| {
        let names = [ASSISTANT, DEPENDENCY_GRAPH, SEARCH, CRITIC, "Nobody"];
        names[rng.random_range(0..names.len())].to_string()
    };
    let package = |rng: &mut ChaCha8Rng| PackageArg {
        ecosystem: rng.random_bool(0.5).then_some(depkg::Ecosystem::PyPI),
        name: ["A", "D", "missing"][rng.random_range(0..3)].into(),
        version: "1.0.0".into(),
    };
    match rng.random_range(0..14) {
        0 => ToolCall::ConstructKg(package(rng)).into(),
        1 => ToolCall::GraphSchema.into(),
        2 => cypher(["MATCH (n:Package) RETURN count(n)", "MATCH (n:Pkg) RETURN n", "RETURN"][rng.random_range(0..3)]),
        3 => ToolCall::VisualizeKg { format: depkg::agents::VizFormat::Dot }.into(),
        4 => ToolCall::WebSearch { query: "chainlit".into(), k: None }.into(),
        5 => ToolCall::Vulnerability { packages: vec![package(rng)] }.into(),
        6 => ToolCall::Question { question: "How many packages?".into(), target_agent: agent(rng) }.into(),
        7 => ToolCall::Forward { agent: agent(rng) }.into(),
        8 => ToolCall::UserInteraction { message: "Which version?".into() }.into(),
        9 => done("answer"),
        10 => feedback(rng.random_bool(0.5), "comments"),
        11 => "just text".into(),
        12 => ScriptStep::Malformed(json!({"tool": "cypher_query", "arguments": {"q": 1}})),
        _ => ScriptStep::Malformed(json!({"tool": "launch_missiles", "arguments": {}})),
    }
}

fn deps_dev_fetches(server: &FixtureServer) -> usize {
    server.requests().iter().filter(|r| r.starts_with("GET deps.dev")).count()
}

fn permission_fuzz() -> Outcome {
    let server = FixtureServer::start_default();
    let caps = Caps::default();
    let mut denied = 0;
    let mut executed = 0;
    let mut fetches = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut script = Script::default();
        for agent in AGENT_NAMES {
            let len = rng.random_range(0..25);
            script = script.agent(agent, (0..len).map(|_| random_step(&mut rng)).collect::<Vec<_>>());
        }
        let mut o = orchestrator(&script, fixture_services(&server)).with_critic(rng.random_bool(0.5));
        if rng.random_bool(0.5) {
            o.set_graph(Arc::new(fixtures::diamond()));
        }
        let fetched_before = deps_dev_fetches(&server);
        let _ = o.ask("Which packages are most depended on?");
        let fetched = deps_dev_fetches(&server) - fetched_before;
        fetches += fetched;

        let entries = o.transcript().entries();
        for (i, entry) in entries.iter().enumerate() {
            let spec = o.spec(&entry.agent).ok_or_else(|| format!("seed {seed}: unknown agent {}", entry.agent))?;
            match &entry.event {
                Event::ToolCall { call } if !spec.allows(call.tool()) => {
                    let next = entries.get(i + 1).map(|e| (&e.agent, &e.event));
                    check!(
                        matches!(next, Some((a, Event::PermissionDenied { tool })) if *a == entry.agent && *tool == call.tool()),
                        "seed {seed}: {} called `{}` without a denial",
                        entry.agent,
                        call.tool()
                    );
                    denied += 1;
                }
                Event::ToolResult { tool, .. } => {
                    check!(spec.allows(*tool), "seed {seed}: {} executed forbidden `{tool}`", entry.agent);
                    executed += 1;
                }
                Event::TaskEnd { steps, .. } => {
                    check!(*steps <= caps.max_steps, "seed {seed}: task ran {steps} steps");
                }
                Event::Verdict { round, .. } => {
                    check!(*round <= caps.critic_rounds, "seed {seed}: critic round {round}");
                }
                _ => {}
            }
        }
        let constructions = entries
            .iter()
            .filter(|e| e.agent == DEPENDENCY_GRAPH && matches!(e.event, Event::ToolResult { tool: Tool::ConstructKg, .. }))
            .count();
        check!(fetched <= constructions, "seed {seed}: {fetched} deps.dev fetches but {constructions} permitted constructions");
    }
    check!(executed > 0 && denied > 0 && fetches > 0, "fuzz did not exercise both paths ({executed} executed, {denied} denied)");
    Ok(format!("100 runs; {executed} tool executions allowed, {denied} calls denied, {fetches} deps.dev fetches"))
}

fn service_contract() -> Outcome {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| e.to_string())?;
    let exchanges = runtime.block_on(common::run_golden(false))?;
    let statuses = runtime.block_on(common::single_flight());
    let expected = [409, 409, 200, 200];
    check!(
        statuses.iter().map(|s| s.as_u16()).collect::<Vec<_>>() == expected,
        "single-flight statuses {statuses:?}"
    );
    Ok(format!("{exchanges} golden exchanges; concurrent turn refused with 409"))
}
