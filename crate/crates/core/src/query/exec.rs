//! Pattern-matching executor.
//!
//! Bindings are enumerated depth-first with start nodes in id order and
//! neighbours in edge-insertion order, so result order is deterministic.
//! Variable-length expansion never reuses a relationship within one MATCH
//! clause (trail semantics), which keeps unbounded patterns finite on cyclic
//! graphs.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::HashMap;

use super::ast::*;
use super::{QueryError, ResultTable, Scalar};
use crate::graph::{DependencyGraph, NodeId, DEPENDS_ON, PACKAGE_LABEL};

/// Default cap on intermediate bindings produced while expanding patterns.
pub const DEFAULT_BINDING_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone)]
enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Node(NodeId),
    Rel(usize),
    RelList(Vec<usize>),
    Path { nodes: Vec<NodeId>, rels: Vec<usize> },
}

impl From<&Literal> for Value {
    fn from(lit: &Literal) -> Self {
        match lit {
            Literal::Null => Value::Null,
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Int(i) => Value::Int(*i),
            Literal::Float(x) => Value::Float(*x),
            Literal::String(s) => Value::Str(s.clone()),
        }
    }
}

/// Hashable identity of a value, used for grouping and DISTINCT.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Key {
    Null,
    Bool(bool),
    Int(i64),
    Float(u64),
    Str(String),
    Node(usize),
    Rel(usize),
    List(Vec<usize>),
    Path(Vec<usize>, Vec<usize>),
}

impl Value {
    fn key(&self) -> Key {
        match self {
            Value::Null => Key::Null,
            Value::Bool(b) => Key::Bool(*b),
            Value::Int(i) => Key::Int(*i),
            Value::Float(x) if x.fract() == 0.0 && x.abs() < 9.0e15 => Key::Int(*x as i64),
            Value::Float(x) => Key::Float(x.to_bits()),
            Value::Str(s) => Key::Str(s.clone()),
            Value::Node(n) => Key::Node(n.0),
            Value::Rel(r) => Key::Rel(*r),
            Value::RelList(rs) => Key::List(rs.clone()),
            Value::Path { nodes, rels } => Key::Path(nodes.iter().map(|n| n.0).collect(), rels.clone()),
        }
    }

    fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    fn truthy(&self) -> bool {
        matches!(self, Value::Bool(true))
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Bool(_) => 0,
            Value::Int(_) | Value::Float(_) => 1,
            Value::Str(_) => 2,
            Value::Node(_) => 3,
            Value::Rel(_) => 4,
            Value::RelList(_) => 5,
            Value::Path { .. } => 6,
            Value::Null => 7,
        }
    }
}

fn numeric_cmp(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (Value::Int(x), Value::Float(y)) => (*x as f64).partial_cmp(y),
        (Value::Float(x), Value::Int(y)) => x.partial_cmp(&(*y as f64)),
        (Value::Float(x), Value::Float(y)) => x.partial_cmp(y),
        _ => None,
    }
}

/// Total order used by ORDER BY, max and min. Nulls sort last.
fn order_values(a: &Value, b: &Value) -> Ordering {
    if let Some(ord) = numeric_cmp(a, b) {
        return ord;
    }
    match (a, b) {
        (Value::Bool(x), Value::Bool(y)) => x.cmp(y),
        (Value::Str(x), Value::Str(y)) => x.cmp(y),
        (Value::Node(x), Value::Node(y)) => x.cmp(y),
        (Value::Rel(x), Value::Rel(y)) => x.cmp(y),
        (Value::RelList(x), Value::RelList(y)) => x.cmp(y),
        (Value::Path { nodes: n1, rels: r1 }, Value::Path { nodes: n2, rels: r2 }) => {
            n1.cmp(n2).then_with(|| r1.cmp(r2))
        }
        _ => a.rank().cmp(&b.rank()),
    }
}

fn compare(a: &Value, op: CompareOp, b: &Value) -> bool {
    if a.is_null() || b.is_null() {
        return false;
    }
    let ord = numeric_cmp(a, b).or_else(|| match (a, b) {
        (Value::Str(x), Value::Str(y)) => Some(x.cmp(y)),
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        _ => None,
    });
    match (op, ord) {
        (CompareOp::Eq, Some(o)) => o == Ordering::Equal,
        (CompareOp::Neq, Some(o)) => o != Ordering::Equal,
        (CompareOp::Eq, None) => a.key() == b.key(),
        (CompareOp::Neq, None) => a.key() != b.key(),
        (CompareOp::Lt, Some(o)) => o == Ordering::Less,
        (CompareOp::Le, Some(o)) => o != Ordering::Greater,
        (CompareOp::Gt, Some(o)) => o == Ordering::Greater,
        (CompareOp::Ge, Some(o)) => o != Ordering::Less,
        (_, None) => false,
    }
}

type Binding = HashMap<String, Value>;
/// Grouping key values and the full projected row.
type KeyedRow = (Vec<Value>, Vec<Value>);

/// Executes parsed queries against one graph.
pub struct Executor<'g> {
    graph: &'g DependencyGraph,
    out_edges: Vec<Vec<(usize, NodeId)>>,
    in_edges: Vec<Vec<(usize, NodeId)>>,
    limit: usize,
    produced: Cell<usize>,
}

impl<'g> Executor<'g> {
    pub fn new(graph: &'g DependencyGraph) -> Self {
        let n = graph.node_count();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (idx, e) in graph.edges().iter().enumerate() {
            out_edges[e.from.0].push((idx, e.to));
            in_edges[e.to.0].push((idx, e.from));
        }
        Self {
            graph,
            out_edges,
            in_edges,
            limit: DEFAULT_BINDING_LIMIT,
            produced: Cell::new(0),
        }
    }

    /// Overrides the intermediate-binding cap.
    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit;
        self
    }

    pub fn execute(&self, query: &Query) -> Result<ResultTable, QueryError> {
        self.produced.set(0);
        let mut bindings = Vec::new();
        let mut binding = Binding::new();
        self.match_clauses(query, 0, &mut binding, &mut bindings)?;

        let aggregate = query.returns.iter().any(|r| r.expr.contains_aggregate());
        let mut rows: Vec<(Vec<Value>, Vec<Value>)> = if aggregate {
            self.aggregate_rows(query, &bindings)?
        } else {
            bindings
                .iter()
                .map(|b| {
                    let values = query
                        .returns
                        .iter()
                        .map(|r| self.eval(&r.expr, b))
                        .collect::<Result<Vec<_>, _>>()?;
                    let keys = query
                        .order_by
                        .iter()
                        .map(|s| match self.sort_column(query, &s.expr) {
                            Some(col) => Ok(values[col].clone()),
                            None => self.eval(&s.expr, b),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok((values, keys))
                })
                .collect::<Result<_, QueryError>>()?
        };

        if query.distinct {
            let mut seen = std::collections::HashSet::new();
            rows.retain(|(values, _)| seen.insert(values.iter().map(Value::key).collect::<Vec<_>>()));
        }
        if !query.order_by.is_empty() {
            rows.sort_by(|(_, ka), (_, kb)| {
                for (i, sort) in query.order_by.iter().enumerate() {
                    let mut ord = order_values(&ka[i], &kb[i]);
                    if sort.descending {
                        ord = ord.reverse();
                    }
                    if ord != Ordering::Equal {
                        return ord;
                    }
                }
                Ordering::Equal
            });
        }
        if let Some(limit) = query.limit {
            rows.truncate(limit as usize);
        }
        Ok(ResultTable {
            columns: query.returns.iter().map(ReturnItem::column_name).collect(),
            rows: rows
                .into_iter()
                .map(|(values, _)| values.iter().map(|v| self.to_scalar(v)).collect())
                .collect(),
        })
    }

    fn sort_column(&self, query: &Query, expr: &Expr) -> Option<usize> {
        if let Expr::Variable(name) = expr {
            if let Some(i) = query.returns.iter().position(|r| r.alias.as_deref() == Some(name)) {
                return Some(i);
            }
        }
        query.returns.iter().position(|r| &r.expr == expr)
    }

    fn aggregate_rows(
        &self,
        query: &Query,
        bindings: &[Binding],
    ) -> Result<Vec<KeyedRow>, QueryError> {
        let key_items: Vec<usize> = query
            .returns
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.expr.contains_aggregate())
            .map(|(i, _)| i)
            .collect();

        let mut groups: Vec<Vec<&Binding>> = Vec::new();
        if key_items.is_empty() {
            groups.push(bindings.iter().collect());
        } else {
            let mut index: HashMap<Vec<Key>, usize> = HashMap::new();
            for b in bindings {
                let key = key_items
                    .iter()
                    .map(|&i| self.eval(&query.returns[i].expr, b).map(|v| v.key()))
                    .collect::<Result<Vec<_>, _>>()?;
                let slot = *index.entry(key).or_insert_with(|| {
                    groups.push(Vec::new());
                    groups.len() - 1
                });
                groups[slot].push(b);
            }
        }

        let empty = Binding::new();
        groups
            .iter()
            .map(|group| {
                let values = query
                    .returns
                    .iter()
                    .map(|r| self.eval_group(&r.expr, group, &empty))
                    .collect::<Result<Vec<_>, _>>()?;
                let keys = query
                    .order_by
                    .iter()
                    .map(|s| match self.sort_column(query, &s.expr) {
                        Some(col) => Ok(values[col].clone()),
                        None => self.eval_group(&s.expr, group, &empty),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((values, keys))
            })
            .collect()
    }

    /// Evaluates an expression over a group: aggregates fold over the whole
    /// group, everything else reads the group's first binding.
    fn eval_group(&self, expr: &Expr, group: &[&Binding], empty: &Binding) -> Result<Value, QueryError> {
        if !expr.contains_aggregate() {
            return self.eval(expr, group.first().copied().unwrap_or(empty));
        }
        if expr.is_aggregate() {
            return self.aggregate(expr, group);
        }
        let mut folded = group.first().copied().unwrap_or(empty).clone();
        let mut counter = 0;
        let rewritten = self.fold_aggregates(expr, group, &mut folded, &mut counter)?;
        self.eval(&rewritten, &folded)
    }

    fn fold_aggregates(
        &self,
        expr: &Expr,
        group: &[&Binding],
        scratch: &mut Binding,
        counter: &mut usize,
    ) -> Result<Expr, QueryError> {
        if expr.is_aggregate() {
            let name = format!("\u{0}agg{}", *counter);
            *counter += 1;
            scratch.insert(name.clone(), self.aggregate(expr, group)?);
            return Ok(Expr::Variable(name));
        }
        let mut go = |e: &Expr| self.fold_aggregates(e, group, scratch, counter).map(Box::new);
        Ok(match expr {
            Expr::Compare(l, op, r) => Expr::Compare(go(l)?, *op, go(r)?),
            Expr::And(l, r) => Expr::And(go(l)?, go(r)?),
            Expr::Or(l, r) => Expr::Or(go(l)?, go(r)?),
            Expr::Not(e) => Expr::Not(go(e)?),
            Expr::IsNull { expr, negated } => Expr::IsNull {
                expr: go(expr)?,
                negated: *negated,
            },
            Expr::Length(e) => Expr::Length(go(e)?),
            other => other.clone(),
        })
    }

    fn aggregate(&self, expr: &Expr, group: &[&Binding]) -> Result<Value, QueryError> {
        let collect = |arg: &Expr| -> Result<Vec<Value>, QueryError> {
            let mut out = Vec::new();
            for b in group {
                let v = self.eval(arg, b)?;
                if !v.is_null() {
                    out.push(v);
                }
            }
            Ok(out)
        };
        match expr {
            Expr::Count { arg: None, .. } => Ok(Value::Int(group.len() as i64)),
            Expr::Count {
                arg: Some(arg),
                distinct,
            } => {
                let values = collect(arg)?;
                let n = if *distinct {
                    values.iter().map(Value::key).collect::<std::collections::HashSet<_>>().len()
                } else {
                    values.len()
                };
                Ok(Value::Int(n as i64))
            }
            Expr::Max(arg) => Ok(collect(arg)?
                .into_iter()
                .max_by(order_values)
                .unwrap_or(Value::Null)),
            Expr::Min(arg) => Ok(collect(arg)?
                .into_iter()
                .min_by(order_values)
                .unwrap_or(Value::Null)),
            other => Err(QueryError::UnsupportedFeature(format!("aggregate {other}"))),
        }
    }

    fn eval(&self, expr: &Expr, b: &Binding) -> Result<Value, QueryError> {
        Ok(match expr {
            Expr::Literal(l) => l.into(),
            Expr::Variable(v) => b.get(v).cloned().unwrap_or(Value::Null),
            Expr::Property(v, prop) => match b.get(v) {
                Some(Value::Node(id)) => {
                    let node = self.graph.node(*id).expect("bound node exists");
                    match prop.as_str() {
                        "name" => Value::Str(node.name.clone()),
                        "version" => Value::Str(node.version.clone()),
                        _ => Value::Null,
                    }
                }
                _ => Value::Null,
            },
            Expr::Compare(l, op, r) => Value::Bool(compare(&self.eval(l, b)?, *op, &self.eval(r, b)?)),
            Expr::IsNull { expr, negated } => Value::Bool(self.eval(expr, b)?.is_null() != *negated),
            Expr::And(l, r) => Value::Bool(self.eval(l, b)?.truthy() && self.eval(r, b)?.truthy()),
            Expr::Or(l, r) => Value::Bool(self.eval(l, b)?.truthy() || self.eval(r, b)?.truthy()),
            Expr::Not(e) => Value::Bool(!self.eval(e, b)?.truthy()),
            Expr::Pattern(p) => Value::Bool(self.pattern_exists(p, b)?),
            Expr::Length(e) => match self.eval(e, b)? {
                Value::Path { rels, .. } | Value::RelList(rels) => Value::Int(rels.len() as i64),
                Value::Str(s) => Value::Int(s.chars().count() as i64),
                _ => Value::Null,
            },
            Expr::Count { .. } | Expr::Max(_) | Expr::Min(_) => {
                return Err(QueryError::UnsupportedFeature(format!(
                    "aggregate {expr} outside RETURN/ORDER BY"
                )))
            }
        })
    }

    fn tick(&self) -> Result<(), QueryError> {
        let n = self.produced.get() + 1;
        self.produced.set(n);
        if n > self.limit {
            Err(QueryError::ExecutionLimit(self.limit))
        } else {
            Ok(())
        }
    }

    fn match_clauses(
        &self,
        query: &Query,
        clause: usize,
        b: &mut Binding,
        out: &mut Vec<Binding>,
    ) -> Result<(), QueryError> {
        if clause == query.matches.len() {
            let keep = match &query.where_clause {
                Some(w) => self.eval(w, b)?.truthy(),
                None => true,
            };
            if keep {
                out.push(b.clone());
            }
            return Ok(());
        }
        let mut used = Vec::new();
        self.match_patterns(&query.matches[clause].patterns, 0, b, &mut used, &mut |b| {
            self.match_clauses(query, clause + 1, b, out)?;
            Ok(false)
        })?;
        Ok(())
    }

    fn pattern_exists(&self, pattern: &PathPattern, b: &Binding) -> Result<bool, QueryError> {
        let mut scratch = b.clone();
        let mut used = Vec::new();
        self.match_patterns(std::slice::from_ref(pattern), 0, &mut scratch, &mut used, &mut |_| Ok(true))
    }

    /// Calls `emit` for every extension of `b` matching `patterns[idx..]`.
    /// Returns `true` once `emit` asks to stop.
    fn match_patterns(
        &self,
        patterns: &[PathPattern],
        idx: usize,
        b: &mut Binding,
        used: &mut Vec<usize>,
        emit: &mut dyn FnMut(&mut Binding) -> Result<bool, QueryError>,
    ) -> Result<bool, QueryError> {
        let Some(pattern) = patterns.get(idx) else {
            return emit(b);
        };
        let bound_start = pattern
            .start
            .variable
            .as_ref()
            .and_then(|v| match b.get(v) {
                Some(Value::Node(n)) => Some(*n),
                _ => None,
            });
        let candidates: Vec<NodeId> = match bound_start {
            Some(n) => vec![n],
            None => self.graph.nodes().iter().map(|n| n.id).collect(),
        };
        for start in candidates {
            if !self.node_matches(&pattern.start, start, b) {
                continue;
            }
            self.tick()?;
            let inserted = bind_node(&pattern.start, start, b);
            let mut nodes = vec![start];
            let mut rels = Vec::new();
            let stop = self.match_steps(patterns, idx, 0, start, &mut nodes, &mut rels, b, used, emit)?;
            if inserted {
                b.remove(pattern.start.variable.as_ref().unwrap());
            }
            if stop {
                return Ok(true);
            }
        }
        Ok(false)
    }

    #[allow(clippy::too_many_arguments)]
    fn match_steps(
        &self,
        patterns: &[PathPattern],
        idx: usize,
        step_idx: usize,
        current: NodeId,
        nodes: &mut Vec<NodeId>,
        rels: &mut Vec<usize>,
        b: &mut Binding,
        used: &mut Vec<usize>,
        emit: &mut dyn FnMut(&mut Binding) -> Result<bool, QueryError>,
    ) -> Result<bool, QueryError> {
        let pattern = &patterns[idx];
        let Some(step) = pattern.steps.get(step_idx) else {
            let path_var = pattern.variable.as_ref();
            if let Some(v) = path_var {
                b.insert(
                    v.clone(),
                    Value::Path {
                        nodes: nodes.clone(),
                        rels: rels.clone(),
                    },
                );
            }
            let stop = self.match_patterns(patterns, idx + 1, b, used, emit)?;
            if let Some(v) = path_var {
                b.remove(v);
            }
            return Ok(stop);
        };
        if step.rel.rel_type.as_deref().is_some_and(|t| t != DEPENDS_ON) {
            return Ok(false);
        }

        match step.rel.length {
            None => {
                let rel_var = step.rel.variable.as_ref();
                let prebound = rel_var.and_then(|v| b.get(v)).map(Value::key);
                for (edge, next) in self.neighbors(current, step.rel.direction) {
                    if used.contains(&edge) || !self.node_matches(&step.node, next, b) {
                        continue;
                    }
                    if prebound.as_ref().is_some_and(|k| *k != Key::Rel(edge)) {
                        continue;
                    }
                    self.tick()?;
                    let bind_rel = rel_var.filter(|_| prebound.is_none());
                    if let Some(v) = bind_rel {
                        b.insert(v.clone(), Value::Rel(edge));
                    }
                    let inserted = bind_node(&step.node, next, b);
                    used.push(edge);
                    nodes.push(next);
                    rels.push(edge);
                    let stop =
                        self.match_steps(patterns, idx, step_idx + 1, next, nodes, rels, b, used, emit)?;
                    rels.pop();
                    nodes.pop();
                    used.pop();
                    if inserted {
                        b.remove(step.node.variable.as_ref().unwrap());
                    }
                    if let Some(v) = bind_rel {
                        b.remove(v);
                    }
                    if stop {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Some(range) => {
                let mut segment = Vec::new();
                self.expand(
                    patterns, idx, step_idx, range, current, &mut segment, nodes, rels, b, used, emit,
                )
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn expand(
        &self,
        patterns: &[PathPattern],
        idx: usize,
        step_idx: usize,
        range: LengthRange,
        current: NodeId,
        segment: &mut Vec<usize>,
        nodes: &mut Vec<NodeId>,
        rels: &mut Vec<usize>,
        b: &mut Binding,
        used: &mut Vec<usize>,
        emit: &mut dyn FnMut(&mut Binding) -> Result<bool, QueryError>,
    ) -> Result<bool, QueryError> {
        let step = &patterns[idx].steps[step_idx];
        let depth = segment.len() as u32;
        let rel_var = step.rel.variable.as_ref();
        let prebound = rel_var.and_then(|v| b.get(v)).map(Value::key);
        let rel_ok = prebound.as_ref().is_none_or(|k| *k == Key::List(segment.clone()));
        if depth >= range.lower() && rel_ok && self.node_matches(&step.node, current, b) {
            let bind_rel = rel_var.filter(|_| prebound.is_none());
            if let Some(v) = bind_rel {
                b.insert(v.clone(), Value::RelList(segment.clone()));
            }
            let inserted = bind_node(&step.node, current, b);
            let stop = self.match_steps(patterns, idx, step_idx + 1, current, nodes, rels, b, used, emit)?;
            if inserted {
                b.remove(step.node.variable.as_ref().unwrap());
            }
            if let Some(v) = bind_rel {
                b.remove(v);
            }
            if stop {
                return Ok(true);
            }
        }
        if range.max.is_some_and(|hi| depth >= hi) {
            return Ok(false);
        }
        for (edge, next) in self.neighbors(current, step.rel.direction) {
            if used.contains(&edge) {
                continue;
            }
            self.tick()?;
            used.push(edge);
            segment.push(edge);
            nodes.push(next);
            rels.push(edge);
            let stop = self.expand(
                patterns, idx, step_idx, range, next, segment, nodes, rels, b, used, emit,
            )?;
            rels.pop();
            nodes.pop();
            segment.pop();
            used.pop();
            if stop {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn neighbors(&self, node: NodeId, direction: Direction) -> Vec<(usize, NodeId)> {
        match direction {
            Direction::Outgoing => self.out_edges[node.0].clone(),
            Direction::Incoming => self.in_edges[node.0].clone(),
            Direction::Either => {
                let mut all = self.out_edges[node.0].clone();
                all.extend(self.in_edges[node.0].iter().copied());
                all
            }
        }
    }

    fn node_matches(&self, pattern: &NodePattern, id: NodeId, b: &Binding) -> bool {
        if let Some(v) = &pattern.variable {
            match b.get(v) {
                Some(Value::Node(bound)) if *bound != id => return false,
                Some(Value::Node(_)) | None => {}
                Some(_) => return false,
            }
        }
        if pattern.label.as_deref().is_some_and(|l| l != PACKAGE_LABEL) {
            return false;
        }
        let node = self.graph.node(id).expect("node exists");
        pattern.properties.iter().all(|(key, lit)| {
            let actual = match key.as_str() {
                "name" => Value::Str(node.name.clone()),
                "version" => Value::Str(node.version.clone()),
                _ => Value::Null,
            };
            compare(&actual, CompareOp::Eq, &lit.into())
        })
    }

    fn to_scalar(&self, value: &Value) -> Scalar {
        let label = |id: &NodeId| self.graph.node(*id).expect("node exists").label();
        let rel = |idx: &usize| {
            let e = self.graph.edges()[*idx];
            format!("{}-[:{DEPENDS_ON}]->{}", label(&e.from), label(&e.to))
        };
        match value {
            Value::Null => Scalar::Null,
            Value::Bool(b) => Scalar::Bool(*b),
            Value::Int(i) => Scalar::Int(*i),
            Value::Float(x) => Scalar::Float(*x),
            Value::Str(s) => Scalar::String(s.clone()),
            Value::Node(id) => Scalar::String(label(id)),
            Value::Rel(idx) => Scalar::String(rel(idx)),
            Value::RelList(rs) => Scalar::String(format!(
                "[{}]",
                rs.iter().map(rel).collect::<Vec<_>>().join(", ")
            )),
            Value::Path { nodes, .. } => Scalar::String(
                nodes.iter().map(label).collect::<Vec<_>>().join(" -> "),
            ),
        }
    }
}

fn bind_node(pattern: &NodePattern, id: NodeId, b: &mut Binding) -> bool {
    match &pattern.variable {
        Some(v) if !b.contains_key(v) => {
            b.insert(v.clone(), Value::Node(id));
            true
        }
        _ => false,
    }
}
