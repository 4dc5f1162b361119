use std::collections::HashMap;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::QueryError;

const UNSUPPORTED_CLAUSES: &[&str] = &[
    "WITH", "CREATE", "MERGE", "DELETE", "DETACH", "SET", "REMOVE", "UNWIND", "OPTIONAL", "CALL",
    "UNION", "SKIP", "XOR", "IN", "STARTS", "ENDS", "CONTAINS", "YIELD",
];

/// Parses query text and checks that every referenced variable is bound.
pub fn parse(text: &str) -> Result<Query, QueryError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let query = parser.query()?;
    check_scope(&query)?;
    Ok(query)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, QueryError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let idx = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn bump(&mut self) -> Tok {
        let tok = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        Err(QueryError::Syntax {
            offset: self.offset(),
            expected: expected.to_string(),
            found: self.peek().describe(),
        })
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.error(kw)
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> PResult<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            self.error(what)
        }
    }

    fn unsupported_keyword(&self) -> Option<String> {
        match self.peek() {
            Tok::Ident(s) if UNSUPPORTED_CLAUSES.iter().any(|k| k.eq_ignore_ascii_case(s)) => {
                Some(s.to_ascii_uppercase())
            }
            _ => None,
        }
    }

    fn reject_unsupported(&self) -> PResult<()> {
        match self.unsupported_keyword() {
            Some(kw) => Err(QueryError::UnsupportedFeature(format!("{kw} is not supported"))),
            None => Ok(()),
        }
    }

    fn query(&mut self) -> PResult<Query> {
        let mut matches = Vec::new();
        loop {
            self.reject_unsupported()?;
            if !self.eat_keyword("MATCH") {
                break;
            }
            let mut patterns = vec![self.path_pattern(true)?];
            while self.eat(&Tok::Comma) {
                patterns.push(self.path_pattern(true)?);
            }
            matches.push(MatchClause { patterns });
        }
        if matches.is_empty() {
            return self.error("MATCH");
        }
        let where_clause = if self.eat_keyword("WHERE") {
            Some(self.expr()?)
        } else {
            None
        };
        self.reject_unsupported()?;
        self.expect_keyword("RETURN")?;
        let distinct = self.eat_keyword("DISTINCT");
        let mut returns = vec![self.return_item()?];
        while self.eat(&Tok::Comma) {
            returns.push(self.return_item()?);
        }
        let mut order_by = Vec::new();
        self.reject_unsupported()?;
        if self.eat_keyword("ORDER") {
            self.expect_keyword("BY")?;
            loop {
                let expr = self.expr()?;
                let descending = if self.eat_keyword("DESC") || self.eat_keyword("DESCENDING") {
                    true
                } else {
                    let _ = self.eat_keyword("ASC") || self.eat_keyword("ASCENDING");
                    false
                };
                order_by.push(SortItem { expr, descending });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.reject_unsupported()?;
        let limit = if self.eat_keyword("LIMIT") {
            match self.peek().clone() {
                Tok::Int(n) if n > 0 => {
                    self.bump();
                    Some(n as u64)
                }
                _ => return self.error("positive integer"),
            }
        } else {
            None
        };
        self.reject_unsupported()?;
        if *self.peek() != Tok::Eof {
            return self.error("end of query");
        }
        Ok(Query {
            matches,
            where_clause,
            distinct,
            returns,
            order_by,
            limit,
        })
    }

    fn return_item(&mut self) -> PResult<ReturnItem> {
        let expr = self.expr()?;
        let alias = if self.eat_keyword("AS") {
            Some(self.variable_name()?)
        } else {
            None
        };
        Ok(ReturnItem { expr, alias })
    }

    fn variable_name(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.bump();
                Ok(s)
            }
            Tok::Quoted(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.error("identifier"),
        }
    }

    /// Labels, relationship types and property keys may be keywords.
    fn symbolic_name(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) | Tok::Quoted(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.error(what),
        }
    }

    fn at_variable(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => !is_reserved(s),
            Tok::Quoted(_) => true,
            _ => false,
        }
    }

    fn path_pattern(&mut self, allow_path_var: bool) -> PResult<PathPattern> {
        let variable = if allow_path_var && self.at_variable() && *self.peek_at(1) == Tok::Eq {
            let name = self.variable_name()?;
            self.bump();
            Some(name)
        } else {
            None
        };
        if let (Tok::Ident(f), Tok::LParen) = (self.peek(), self.peek_at(1)) {
            return Err(QueryError::UnsupportedFeature(format!("path function {f}()")));
        }
        let start = self.node_pattern()?;
        let mut steps = Vec::new();
        while matches!(self.peek(), Tok::Minus) || (matches!(self.peek(), Tok::Lt) && *self.peek_at(1) == Tok::Minus) {
            let rel = self.rel_pattern()?;
            let node = self.node_pattern()?;
            steps.push(PatternStep { rel, node });
        }
        Ok(PathPattern {
            variable,
            start,
            steps,
        })
    }

    fn node_pattern(&mut self) -> PResult<NodePattern> {
        self.expect(&Tok::LParen, "'('")?;
        let mut node = NodePattern::default();
        if self.at_variable() {
            node.variable = Some(self.variable_name()?);
        }
        if self.eat(&Tok::Colon) {
            node.label = Some(self.symbolic_name("label")?);
            if *self.peek() == Tok::Colon {
                return Err(QueryError::UnsupportedFeature("multiple labels".into()));
            }
        }
        if *self.peek() == Tok::LBrace {
            node.properties = self.property_map()?;
        }
        self.expect(&Tok::RParen, "')'")?;
        Ok(node)
    }

    fn property_map(&mut self) -> PResult<Vec<(String, Literal)>> {
        self.expect(&Tok::LBrace, "'{'")?;
        let mut props = Vec::new();
        if self.eat(&Tok::RBrace) {
            return Ok(props);
        }
        loop {
            let key = self.symbolic_name("property key")?;
            self.expect(&Tok::Colon, "':'")?;
            let value = self.literal()?;
            props.push((key, value));
            if self.eat(&Tok::Comma) {
                continue;
            }
            self.expect(&Tok::RBrace, "'}' or ','")?;
            return Ok(props);
        }
    }

    fn rel_pattern(&mut self) -> PResult<RelPattern> {
        let incoming = self.eat(&Tok::Lt);
        self.expect(&Tok::Minus, "'-'")?;
        let mut rel = RelPattern {
            variable: None,
            rel_type: None,
            direction: Direction::Either,
            length: None,
        };
        if self.eat(&Tok::LBracket) {
            if self.at_variable() {
                rel.variable = Some(self.variable_name()?);
            }
            if self.eat(&Tok::Colon) {
                rel.rel_type = Some(self.symbolic_name("relationship type")?);
                if *self.peek() == Tok::Pipe {
                    return Err(QueryError::UnsupportedFeature(
                        "relationship type alternatives".into(),
                    ));
                }
            }
            if self.eat(&Tok::Star) {
                rel.length = Some(self.length_range()?);
            }
            if *self.peek() == Tok::LBrace {
                return Err(QueryError::UnsupportedFeature("relationship properties".into()));
            }
            self.expect(&Tok::RBracket, "']'")?;
        }
        self.expect(&Tok::Minus, "'-'")?;
        let outgoing = self.eat(&Tok::Gt);
        rel.direction = match (incoming, outgoing) {
            (true, false) => Direction::Incoming,
            (false, true) => Direction::Outgoing,
            _ => Direction::Either,
        };
        Ok(rel)
    }

    fn length_range(&mut self) -> PResult<LengthRange> {
        let bound = |p: &mut Parser| -> PResult<Option<u32>> {
            match p.peek().clone() {
                Tok::Int(n) if (0..=u32::MAX as i64).contains(&n) => {
                    p.bump();
                    Ok(Some(n as u32))
                }
                Tok::Int(_) => p.error("non-negative length bound"),
                _ => Ok(None),
            }
        };
        let min = bound(self)?;
        if self.eat(&Tok::DotDot) {
            let max = bound(self)?;
            if let (Some(lo), Some(hi)) = (min, max) {
                if lo > hi {
                    return Err(QueryError::Syntax {
                        offset: self.offset(),
                        expected: format!("upper bound >= {lo}"),
                        found: hi.to_string(),
                    });
                }
            }
            Ok(LengthRange { min, max })
        } else {
            Ok(LengthRange { min, max: min })
        }
    }

    fn literal(&mut self) -> PResult<Literal> {
        let negative = self.eat(&Tok::Minus);
        let lit = match self.peek().clone() {
            Tok::Int(i) => Literal::Int(if negative { -i } else { i }),
            Tok::Float(x) => Literal::Float(if negative { -x } else { x }),
            _ if negative => return self.error("number"),
            Tok::Str(s) => Literal::String(s),
            Tok::Ident(s) if s.eq_ignore_ascii_case("true") => Literal::Bool(true),
            Tok::Ident(s) if s.eq_ignore_ascii_case("false") => Literal::Bool(false),
            Tok::Ident(s) if s.eq_ignore_ascii_case("null") => Literal::Null,
            _ => return self.error("literal"),
        };
        self.bump();
        Ok(lit)
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut left = self.and_expr()?;
        while self.eat_keyword("OR") {
            let right = self.and_expr()?;
            left = Expr::Or(Box::new(left), Box::new(right));
        }
        self.reject_unsupported()?;
        Ok(left)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut left = self.not_expr()?;
        while self.eat_keyword("AND") {
            let right = self.not_expr()?;
            left = Expr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.eat_keyword("NOT") {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let left = self.primary()?;
        if self.eat_keyword("IS") {
            let negated = self.eat_keyword("NOT");
            self.expect_keyword("NULL")?;
            return Ok(Expr::IsNull {
                expr: Box::new(left),
                negated,
            });
        }
        let op = match self.peek() {
            Tok::Eq => CompareOp::Eq,
            Tok::Neq => CompareOp::Neq,
            Tok::Lt => CompareOp::Lt,
            Tok::Le => CompareOp::Le,
            Tok::Gt => CompareOp::Gt,
            Tok::Ge => CompareOp::Ge,
            _ => {
                self.reject_unsupported()?;
                return Ok(left);
            }
        };
        self.bump();
        let right = self.primary()?;
        Ok(Expr::Compare(Box::new(left), op, Box::new(right)))
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::LParen => {
                let save = self.pos;
                if let Ok(pattern) = self.path_pattern(false) {
                    if !pattern.steps.is_empty() {
                        return Ok(Expr::Pattern(pattern));
                    }
                }
                self.pos = save;
                self.bump();
                let inner = self.expr()?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::Int(_) | Tok::Float(_) | Tok::Str(_) | Tok::Minus => Ok(Expr::Literal(self.literal()?)),
            Tok::Ident(s)
                if ["true", "false", "null"].iter().any(|k| k.eq_ignore_ascii_case(&s)) =>
            {
                Ok(Expr::Literal(self.literal()?))
            }
            Tok::Ident(s) if *self.peek_at(1) == Tok::LParen => self.function(&s),
            Tok::Ident(_) | Tok::Quoted(_) => {
                self.reject_unsupported()?;
                let var = self.variable_name()?;
                if self.eat(&Tok::Dot) {
                    let prop = self.symbolic_name("property key")?;
                    Ok(Expr::Property(var, prop))
                } else {
                    Ok(Expr::Variable(var))
                }
            }
            _ => self.error("expression"),
        }
    }

    fn function(&mut self, name: &str) -> PResult<Expr> {
        let lower = name.to_ascii_lowercase();
        if !matches!(lower.as_str(), "count" | "max" | "min" | "length") {
            return Err(QueryError::UnsupportedFeature(format!("function {name}()")));
        }
        self.bump();
        self.expect(&Tok::LParen, "'('")?;
        let expr = if lower == "count" {
            let distinct = self.eat_keyword("DISTINCT");
            let arg = if !distinct && self.eat(&Tok::Star) {
                None
            } else {
                Some(Box::new(self.expr()?))
            };
            Expr::Count { arg, distinct }
        } else {
            let arg = Box::new(self.expr()?);
            match lower.as_str() {
                "max" => Expr::Max(arg),
                "min" => Expr::Min(arg),
                _ => Expr::Length(arg),
            }
        };
        self.expect(&Tok::RParen, "')'")?;
        Ok(expr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarKind {
    Node,
    Relationship,
    Path,
}

/// Variables bound by the MATCH clauses, with their kinds.
pub(crate) fn bound_variables(query: &Query) -> Result<HashMap<String, VarKind>, QueryError> {
    let mut vars: HashMap<String, VarKind> = HashMap::new();
    let mut declare = |name: &str, kind: VarKind| -> Result<(), QueryError> {
        match vars.get(name) {
            None => {
                vars.insert(name.to_string(), kind);
                Ok(())
            }
            Some(VarKind::Node) if kind == VarKind::Node => Ok(()),
            Some(_) => Err(QueryError::VariableConflict(name.to_string())),
        }
    };
    for clause in &query.matches {
        for pattern in &clause.patterns {
            for node in std::iter::once(&pattern.start).chain(pattern.steps.iter().map(|s| &s.node)) {
                if let Some(v) = &node.variable {
                    declare(v, VarKind::Node)?;
                }
            }
            for step in &pattern.steps {
                if let Some(v) = &step.rel.variable {
                    declare(v, VarKind::Relationship)?;
                }
            }
            if let Some(v) = &pattern.variable {
                declare(v, VarKind::Path)?;
            }
        }
    }
    Ok(vars)
}

fn check_scope(query: &Query) -> Result<(), QueryError> {
    let vars = bound_variables(query)?;
    let check_expr = |expr: &Expr, extra: &[String]| -> Result<(), QueryError> {
        let mut err = None;
        expr.walk(&mut |e| {
            if err.is_some() {
                return;
            }
            match e {
                Expr::Variable(v) | Expr::Property(v, _) => {
                    if !vars.contains_key(v) && !extra.contains(v) {
                        err = Some(QueryError::UnboundVariable(v.clone()));
                    }
                }
                Expr::Pattern(p) => {
                    let nodes = std::iter::once(&p.start).chain(p.steps.iter().map(|s| &s.node));
                    for v in nodes.filter_map(|n| n.variable.as_ref()) {
                        if vars.get(v) != Some(&VarKind::Node) {
                            err = Some(QueryError::UnboundVariable(v.clone()));
                        }
                    }
                    for v in p.steps.iter().filter_map(|s| s.rel.variable.as_ref()) {
                        if vars.get(v) != Some(&VarKind::Relationship) {
                            err = Some(QueryError::UnboundVariable(v.clone()));
                        }
                    }
                }
                _ => {}
            }
        });
        err.map_or(Ok(()), Err)
    };
    let nested_aggregate = |expr: &Expr| {
        let mut nested = false;
        expr.walk(&mut |e| {
            if e.is_aggregate() {
                let mut inner = 0;
                e.walk(&mut |x| inner += x.is_aggregate() as usize);
                nested |= inner > 1;
            }
        });
        nested
    };

    if let Some(w) = &query.where_clause {
        if w.contains_aggregate() {
            return Err(QueryError::UnsupportedFeature("aggregate in WHERE".into()));
        }
        check_expr(w, &[])?;
    }
    for item in &query.returns {
        check_expr(&item.expr, &[])?;
        if nested_aggregate(&item.expr) {
            return Err(QueryError::UnsupportedFeature("nested aggregate".into()));
        }
    }
    let aliases: Vec<String> = query.returns.iter().filter_map(|r| r.alias.clone()).collect();
    for sort in &query.order_by {
        check_expr(&sort.expr, &aliases)?;
        if nested_aggregate(&sort.expr) {
            return Err(QueryError::UnsupportedFeature("nested aggregate".into()));
        }
    }
    Ok(())
}
