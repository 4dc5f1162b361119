//! Cypher-subset query engine over a [`DependencyGraph`].
//!
//! The accepted language (see `docs/cypher-subset.ebnf` in the repository):
//! one or more `MATCH` clauses of path patterns, an optional `WHERE`
//! predicate (comparisons, `IS [NOT] NULL`, `AND`/`OR`/`NOT`, pattern
//! existence), a `RETURN [DISTINCT]` list built from variables, property
//! access, `count`, `max`, `min` and `length`, an optional `ORDER BY` and an
//! optional `LIMIT`.

mod ast;
mod exec;
mod lexer;
mod parser;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use ast::*;
pub use exec::{Executor, DEFAULT_BINDING_LIMIT};
pub use parser::parse;
pub use validate::validate;

use crate::graph::DependencyGraph;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("SyntaxError at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("UnboundVariable: variable `{0}` is not bound by MATCH")]
    UnboundVariable(String),
    #[error("VariableConflict: `{0}` is bound more than once with different kinds")]
    VariableConflict(String),
    #[error("UnknownLabel: label `{0}` is not in the graph schema (labels: Package)")]
    UnknownLabel(String),
    #[error("UnknownRelationship: relationship type `{0}` is not in the graph schema (types: DEPENDS_ON)")]
    UnknownRelationship(String),
    #[error("UnknownProperty: property `{0}` is not in the graph schema (properties: name, version)")]
    UnknownProperty(String),
    #[error("UnsupportedFeature: {0}")]
    UnsupportedFeature(String),
    #[error("ExecutionLimit: expansion exceeded {0} intermediate bindings")]
    ExecutionLimit(usize),
}

/// One cell of a [`ResultTable`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    String(String),
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Null => f.write_str("null"),
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Int(i) => write!(f, "{i}"),
            Scalar::Float(x) => write!(f, "{x}"),
            Scalar::String(s) => f.write_str(s),
        }
    }
}

/// Tabular query result; serializes as `{"columns":[...],"rows":[[...]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Scalar>>,
}

impl ResultTable {
    /// The single value of a one-row, one-column result.
    pub fn single(&self) -> Option<&Scalar> {
        match (self.columns.len(), self.rows.as_slice()) {
            (1, [row]) => row.first(),
            _ => None,
        }
    }

    /// Plain-text table with aligned columns.
    pub fn render_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(ToString::to_string).collect())
            .collect();
        let widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(i, c)| {
                cells
                    .iter()
                    .map(|r| r[i].chars().count())
                    .chain(std::iter::once(c.chars().count()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |values: &[String]| {
            values
                .iter()
                .zip(&widths)
                .map(|(v, w)| format!("{v:<w$}"))
                .collect::<Vec<_>>()
                .join(" | ")
                .trim_end()
                .to_string()
        };
        let mut out = line(&self.columns);
        out.push('\n');
        out.push_str(
            &widths
                .iter()
                .map(|w| "-".repeat(*w))
                .collect::<Vec<_>>()
                .join("-+-"),
        );
        out.push('\n');
        for row in &cells {
            out.push_str(&line(row));
            out.push('\n');
        }
        out.push_str(&format!("({} row{})\n", self.rows.len(), if self.rows.len() == 1 { "" } else { "s" }));
        out
    }
}

/// Executes an already validated query.
pub fn execute(graph: &DependencyGraph, query: &Query) -> Result<ResultTable, QueryError> {
    Executor::new(graph).execute(query)
}

/// Parse, validate against the graph schema, then execute.
pub fn run(graph: &DependencyGraph, text: &str) -> Result<ResultTable, QueryError> {
    let query = parse(text)?;
    validate(&query, &graph.schema())?;
    execute(graph, &query)
}
