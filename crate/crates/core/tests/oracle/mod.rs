//! Brute-force reference implementations. They read only the raw node and
//! link lists and enumerate naively, sharing no code with the library.

#![allow(dead_code)]

use std::collections::BTreeMap;

use depkg::DependencyGraph;

pub struct Raw {
    pub names: Vec<String>,
    pub versions: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    pub root: Option<usize>,
}

impl Raw {
    pub fn of(g: &DependencyGraph) -> Raw {
        let doc = g.export_node_link();
        Raw {
            names: doc.nodes.iter().map(|n| n.name.clone()).collect(),
            versions: doc.nodes.iter().map(|n| n.version.clone()).collect(),
            edges: doc.links.iter().map(|l| (l.source.0, l.target.0)).collect(),
            root: doc.root.map(|r| r.0),
        }
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    fn has_out(&self, v: usize) -> bool {
        self.edges.iter().any(|&(a, _)| a == v)
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(_, b)| b == v).count()
    }

    /// Every trail (edge-unique walk of length ≥ 1), as edge-index lists.
    pub fn trails(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for start in 0..self.n() {
            let mut stack = vec![(start, Vec::<usize>::new())];
            while let Some((at, used)) = stack.pop() {
                for (i, &(a, b)) in self.edges.iter().enumerate() {
                    if a == at && !used.contains(&i) {
                        let mut next = used.clone();
                        next.push(i);
                        out.push(next.clone());
                        stack.push((b, next));
                    }
                }
            }
        }
        out
    }

    fn trail_end(&self, trail: &[usize]) -> usize {
        self.edges[*trail.last().unwrap()].1
    }

    fn trail_start(&self, trail: &[usize]) -> usize {
        self.edges[trail[0]].0
    }

    /// Simple paths (no repeated node) from `from`, including the
    /// zero-length path, as node lists.
    pub fn simple_paths_from(&self, from: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = vec![vec![from]];
        while let Some(path) = stack.pop() {
            let at = *path.last().unwrap();
            for &(a, b) in &self.edges {
                if a == at && !path.contains(&b) {
                    let mut next = path.clone();
                    next.push(b);
                    stack.push(next);
                }
            }
            out.push(path);
        }
        out
    }

    /// Transitive closure by repeated relaxation.
    pub fn reach(&self) -> Vec<Vec<bool>> {
        let n = self.n();
        let mut r = vec![vec![false; n]; n];
        for &(a, b) in &self.edges {
            r[a][b] = true;
        }
        loop {
            let mut changed = false;
            for i in 0..n {
                for j in 0..n {
                    if r[i][j] {
                        for k in 0..n {
                            if r[j][k] && !r[i][k] {
                                r[i][k] = true;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                return r;
            }
        }
    }
}

// ---- query templates ----

pub fn node_count(r: &Raw) -> i64 {
    r.n() as i64
}

pub fn edge_count(r: &Raw) -> i64 {
    let mut count = 0;
    for a in 0..r.n() {
        for b in 0..r.n() {
            count += r.edges.iter().filter(|&&e| e == (a, b)).count();
        }
    }
    count as i64
}

/// (name, version, in-degree) of the most depended-on node; ties go to the
/// lower node id. `None` when no node has a dependent.
pub fn top_in_degree_row(r: &Raw) -> Option<(String, String, i64)> {
    let mut best: Option<(usize, usize)> = None;
    for v in 0..r.n() {
        let d = r.in_degree(v);
        if d > 0 && best.is_none_or(|(_, bd)| d > bd) {
            best = Some((v, d));
        }
    }
    best.map(|(v, d)| (r.names[v].clone(), r.versions[v].clone(), d as i64))
}

pub fn root_leaf_trails(r: &Raw) -> i64 {
    let Some(root) = r.root else { return 0 };
    r.trails()
        .iter()
        .filter(|t| r.trail_start(t) == root && !r.has_out(r.trail_end(t)))
        .count() as i64
}

pub fn all_trails(r: &Raw) -> i64 {
    r.trails().len() as i64
}

pub fn max_trail_length(r: &Raw) -> Option<i64> {
    r.trails().iter().map(|t| t.len() as i64).max()
}

/// Names and versions of nodes at `version`, in node-id order.
pub fn with_version(r: &Raw, version: &str) -> Vec<(String, String)> {
    (0..r.n())
        .filter(|&v| r.versions[v] == version)
        .map(|v| (r.names[v].clone(), r.versions[v].clone()))
        .collect()
}

// ---- analytics ----

pub fn density(r: &Raw) -> f64 {
    let n = r.n();
    if n < 2 {
        0.0
    } else {
        r.edges.len() as f64 / (n * (n - 1)) as f64
    }
}

pub fn depth(r: &Raw) -> usize {
    r.root
        .map(|root| r.simple_paths_from(root).iter().map(|p| p.len() - 1).max().unwrap_or(0))
        .unwrap_or(0)
}

pub fn has_cycle(r: &Raw) -> bool {
    let reach = r.reach();
    (0..r.n()).any(|v| reach[v][v])
}

/// Node sets of the strongly connected components with ≥ 2 nodes.
pub fn nontrivial_sccs(r: &Raw) -> Vec<Vec<usize>> {
    let reach = r.reach();
    let mut seen = vec![false; r.n()];
    let mut out = Vec::new();
    for v in 0..r.n() {
        if seen[v] {
            continue;
        }
        let comp: Vec<usize> = (0..r.n()).filter(|&u| u == v || (reach[v][u] && reach[u][v])).collect();
        for &u in &comp {
            seen[u] = true;
        }
        if comp.len() >= 2 {
            out.push(comp);
        }
    }
    out
}

pub fn is_elementary_cycle(r: &Raw, cycle: &[usize]) -> bool {
    let distinct = cycle.iter().enumerate().all(|(i, v)| !cycle[..i].contains(v));
    !cycle.is_empty()
        && distinct
        && (0..cycle.len()).all(|i| r.edges.contains(&(cycle[i], cycle[(i + 1) % cycle.len()])))
}

/// Simple root-to-sink paths of length ≥ 1.
pub fn root_leaf_paths(r: &Raw) -> u64 {
    let Some(root) = r.root else { return 0 };
    r.simple_paths_from(root)
        .iter()
        .filter(|p| p.len() >= 2 && !r.has_out(*p.last().unwrap()))
        .count() as u64
}

/// (node id, in-degree) sorted by in-degree descending then id, first `k`.
pub fn top_in_degree(r: &Raw, k: usize) -> Vec<(usize, usize)> {
    let mut all: Vec<(usize, usize)> = (0..r.n()).map(|v| (v, r.in_degree(v))).collect();
    for i in 0..all.len() {
        for j in 0..all.len() - 1 - i {
            let (a, b) = (all[j], all[j + 1]);
            if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                all.swap(j, j + 1);
            }
        }
    }
    all.truncate(k);
    all
}

/// package name → version → dependents `(name, version)` in node-id order,
/// for names with at least two depended-on versions.
pub type Conflicts = BTreeMap<String, BTreeMap<String, Vec<(String, String)>>>;

pub fn conflicts(r: &Raw) -> Conflicts {
    let mut out = Conflicts::new();
    for name in r.names.iter() {
        if out.contains_key(name) {
            continue;
        }
        let mut versions = BTreeMap::new();
        for v in 0..r.n() {
            if &r.names[v] != name {
                continue;
            }
            let dependents: Vec<(String, String)> = (0..r.n())
                .filter(|&u| r.edges.contains(&(u, v)))
                .map(|u| (r.names[u].clone(), r.versions[u].clone()))
                .collect();
            if !dependents.is_empty() {
                versions.insert(r.versions[v].clone(), dependents);
            }
        }
        if versions.len() >= 2 {
            out.insert(name.clone(), versions);
        }
    }
    out
}
