//! Deterministic graph analytics: density, depth, cycles, path chains,
//! in-degree ranking, version conflicts, and DOT export.

use depkg::analytics;
use depkg::fixtures;

fn main() {
    let diamond = fixtures::diamond();
    let m = analytics::metrics(&diamond);
    println!("diamond: {}", serde_json::to_string(&m).unwrap());
    for entry in analytics::top_in_degree(&diamond, 2) {
        println!("  in-degree {} {}", entry.in_degree, entry.node.label());
    }
    let d = diamond.find("D", "1.0.0").unwrap();
    for path in analytics::all_paths_to(&diamond, d, 10).unwrap().paths {
        let labels: Vec<String> = path.iter().map(|&n| diamond.node(n).unwrap().name.clone()).collect();
        println!("  path to D: {}", labels.join(" -> "));
    }
    print!("{}", analytics::render_dot(&diamond));

    let g2 = fixtures::g2();
    for c in analytics::multi_version_conflicts(&g2) {
        println!("conflict on {}: versions {:?}", c.package_name, c.versions);
        for (version, dependents) in &c.dependents {
            let names: Vec<String> = dependents.iter().map(|p| format!("{}@{}", p.name, p.version)).collect();
            println!("  {version} <- {}", names.join(", "));
        }
    }

    let triangle = fixtures::triangle();
    println!("triangle cycles: {:?}", analytics::detect_cycles(&triangle));
    println!("triangle path chains: {:?}", analytics::count_root_leaf_paths(&triangle));
}
