//! Syntax tree for the supported Cypher subset.
//!
//! `Display` renders a tree back to query text that parses to an equal tree.

use std::fmt::{self, Write};

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub matches: Vec<MatchClause>,
    pub where_clause: Option<Expr>,
    pub distinct: bool,
    pub returns: Vec<ReturnItem>,
    pub order_by: Vec<SortItem>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchClause {
    pub patterns: Vec<PathPattern>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPattern {
    pub variable: Option<String>,
    pub start: NodePattern,
    pub steps: Vec<PatternStep>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternStep {
    pub rel: RelPattern,
    pub node: NodePattern,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodePattern {
    pub variable: Option<String>,
    pub label: Option<String>,
    pub properties: Vec<(String, Literal)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Outgoing,
    Incoming,
    Either,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelPattern {
    pub variable: Option<String>,
    pub rel_type: Option<String>,
    pub direction: Direction,
    /// `Some` for variable-length relationships (`*`, `*2`, `*1..3`, ...).
    pub length: Option<LengthRange>,
}

/// Bounds as written; a missing lower bound means 1, a missing upper bound
/// means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LengthRange {
    pub min: Option<u32>,
    pub max: Option<u32>,
}

impl LengthRange {
    pub fn lower(&self) -> u32 {
        self.min.unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    String(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Neq => "<>",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Literal),
    Variable(String),
    Property(String, String),
    Compare(Box<Expr>, CompareOp, Box<Expr>),
    IsNull { expr: Box<Expr>, negated: bool },
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    /// Pattern-existence predicate, e.g. `(leaf)-[:DEPENDS_ON]->()`.
    Pattern(PathPattern),
    /// `count(*)` when `arg` is `None`.
    Count { arg: Option<Box<Expr>>, distinct: bool },
    Max(Box<Expr>),
    Min(Box<Expr>),
    Length(Box<Expr>),
}

impl Expr {
    pub fn is_aggregate(&self) -> bool {
        matches!(self, Expr::Count { .. } | Expr::Max(_) | Expr::Min(_))
    }

    pub fn contains_aggregate(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= e.is_aggregate());
        found
    }

    /// Pre-order traversal over this expression and its sub-expressions.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Literal(_) | Expr::Variable(_) | Expr::Property(..) | Expr::Pattern(_) => {}
            Expr::Compare(l, _, r) | Expr::And(l, r) | Expr::Or(l, r) => {
                l.walk(f);
                r.walk(f);
            }
            Expr::IsNull { expr, .. } | Expr::Not(expr) | Expr::Max(expr) | Expr::Min(expr) | Expr::Length(expr) => {
                expr.walk(f)
            }
            Expr::Count { arg, .. } => {
                if let Some(arg) = arg {
                    arg.walk(f)
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Or(..) => 1,
            Expr::And(..) => 2,
            Expr::Not(_) => 3,
            Expr::Compare(..) | Expr::IsNull { .. } => 4,
            _ => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnItem {
    pub expr: Expr,
    pub alias: Option<String>,
}

impl ReturnItem {
    /// Column name: the alias if given, else the rendered expression.
    pub fn column_name(&self) -> String {
        self.alias.clone().unwrap_or_else(|| self.expr.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortItem {
    pub expr: Expr,
    pub descending: bool,
}

const RESERVED: &[&str] = &[
    "MATCH", "WHERE", "RETURN", "DISTINCT", "AS", "ORDER", "BY", "ASC", "DESC", "ASCENDING",
    "DESCENDING", "LIMIT", "AND", "OR", "NOT", "IS", "NULL", "TRUE", "FALSE", "XOR", "WITH",
    "CREATE", "MERGE", "DELETE", "DETACH", "SET", "REMOVE", "UNWIND", "OPTIONAL", "CALL", "UNION",
    "SKIP", "IN", "STARTS", "ENDS", "CONTAINS", "YIELD",
];

pub(crate) fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(word))
}

fn write_ident(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    let simple = name
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if simple && !is_reserved(name) {
        f.write_str(name)
    } else {
        write!(f, "`{}`", name.replace('`', "``"))
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Null => f.write_str("null"),
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Float(x) => {
                let s = format!("{x:?}");
                f.write_str(&s)
            }
            Literal::String(s) => {
                f.write_char('\'')?;
                for c in s.chars() {
                    match c {
                        '\'' => f.write_str("\\'")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        '\r' => f.write_str("\\r")?,
                        c => f.write_char(c)?,
                    }
                }
                f.write_char('\'')
            }
        }
    }
}

impl fmt::Display for NodePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_char('(')?;
        if let Some(v) = &self.variable {
            write_ident(f, v)?;
        }
        if let Some(l) = &self.label {
            f.write_char(':')?;
            write_ident(f, l)?;
        }
        if !self.properties.is_empty() {
            if self.variable.is_some() || self.label.is_some() {
                f.write_char(' ')?;
            }
            f.write_char('{')?;
            for (i, (k, v)) in self.properties.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_ident(f, k)?;
                write!(f, ": {v}")?;
            }
            f.write_char('}')?;
        }
        f.write_char(')')
    }
}

impl fmt::Display for RelPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.direction == Direction::Incoming { "<-[" } else { "-[" })?;
        if let Some(v) = &self.variable {
            write_ident(f, v)?;
        }
        if let Some(t) = &self.rel_type {
            f.write_char(':')?;
            write_ident(f, t)?;
        }
        if let Some(range) = &self.length {
            f.write_char('*')?;
            match (range.min, range.max) {
                (None, None) => {}
                (Some(lo), None) => write!(f, "{lo}..")?,
                (None, Some(hi)) => write!(f, "..{hi}")?,
                (Some(lo), Some(hi)) => write!(f, "{lo}..{hi}")?,
            }
        }
        f.write_str(if self.direction == Direction::Outgoing { "]->" } else { "]-" })
    }
}

impl fmt::Display for PathPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(v) = &self.variable {
            write_ident(f, v)?;
            f.write_str(" = ")?;
        }
        write!(f, "{}", self.start)?;
        for step in &self.steps {
            write!(f, "{}{}", step.rel, step.node)?;
        }
        Ok(())
    }
}

fn fmt_child(f: &mut fmt::Formatter<'_>, child: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prec = self.precedence();
        match self {
            Expr::Literal(l) => write!(f, "{l}"),
            Expr::Variable(v) => write_ident(f, v),
            Expr::Property(v, p) => {
                write_ident(f, v)?;
                f.write_char('.')?;
                write_ident(f, p)
            }
            Expr::Compare(l, op, r) => {
                fmt_child(f, l, l.precedence() <= prec)?;
                write!(f, " {} ", op.symbol())?;
                fmt_child(f, r, r.precedence() <= prec)
            }
            Expr::IsNull { expr, negated } => {
                fmt_child(f, expr, expr.precedence() <= prec)?;
                f.write_str(if *negated { " IS NOT NULL" } else { " IS NULL" })
            }
            Expr::And(l, r) | Expr::Or(l, r) => {
                fmt_child(f, l, l.precedence() < prec)?;
                f.write_str(if matches!(self, Expr::And(..)) { " AND " } else { " OR " })?;
                fmt_child(f, r, r.precedence() <= prec)
            }
            Expr::Not(inner) => {
                f.write_str("NOT ")?;
                fmt_child(f, inner, inner.precedence() < prec)
            }
            Expr::Pattern(p) => write!(f, "{p}"),
            Expr::Count { arg, distinct } => {
                f.write_str("count(")?;
                if *distinct {
                    f.write_str("DISTINCT ")?;
                }
                match arg {
                    Some(a) => write!(f, "{a}")?,
                    None => f.write_char('*')?,
                }
                f.write_char(')')
            }
            Expr::Max(a) => write!(f, "max({a})"),
            Expr::Min(a) => write!(f, "min({a})"),
            Expr::Length(a) => write!(f, "length({a})"),
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, clause) in self.matches.iter().enumerate() {
            if i > 0 {
                f.write_char(' ')?;
            }
            f.write_str("MATCH ")?;
            for (j, p) in clause.patterns.iter().enumerate() {
                if j > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{p}")?;
            }
        }
        if let Some(w) = &self.where_clause {
            write!(f, " WHERE {w}")?;
        }
        f.write_str(" RETURN ")?;
        if self.distinct {
            f.write_str("DISTINCT ")?;
        }
        for (i, item) in self.returns.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", item.expr)?;
            if let Some(a) = &item.alias {
                f.write_str(" AS ")?;
                write_ident(f, a)?;
            }
        }
        if !self.order_by.is_empty() {
            f.write_str(" ORDER BY ")?;
            for (i, s) in self.order_by.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{}", s.expr)?;
                if s.descending {
                    f.write_str(" DESC")?;
                }
            }
        }
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}
