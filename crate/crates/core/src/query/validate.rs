use super::ast::{Expr, PathPattern, Query};
use super::QueryError;
use crate::graph::SchemaDescription;

/// Checks labels, relationship types and property keys against `schema`.
pub fn validate(query: &Query, schema: &SchemaDescription) -> Result<(), QueryError> {
    let mut patterns: Vec<&PathPattern> = query.matches.iter().flat_map(|m| m.patterns.iter()).collect();
    let mut exprs: Vec<&Expr> = Vec::new();
    if let Some(w) = &query.where_clause {
        exprs.push(w);
    }
    exprs.extend(query.returns.iter().map(|r| &r.expr));
    exprs.extend(query.order_by.iter().map(|s| &s.expr));

    let mut properties = Vec::new();
    for expr in &exprs {
        expr.walk(&mut |e| match e {
            Expr::Pattern(p) => patterns.push(p),
            Expr::Property(_, prop) => properties.push(prop.as_str()),
            _ => {}
        });
    }

    for pattern in patterns {
        let nodes = std::iter::once(&pattern.start).chain(pattern.steps.iter().map(|s| &s.node));
        for node in nodes {
            if let Some(label) = &node.label {
                if !schema.labels.iter().any(|l| l == label) {
                    return Err(QueryError::UnknownLabel(label.clone()));
                }
            }
            for (key, _) in &node.properties {
                if !schema.has_property(key) {
                    return Err(QueryError::UnknownProperty(key.clone()));
                }
            }
        }
        for step in &pattern.steps {
            if let Some(t) = &step.rel.rel_type {
                if !schema.relationship_types.iter().any(|r| r == t) {
                    return Err(QueryError::UnknownRelationship(t.clone()));
                }
            }
        }
    }
    for prop in properties {
        if !schema.has_property(prop) {
            return Err(QueryError::UnknownProperty(prop.to_string()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse;

    fn check(q: &str) -> Result<(), QueryError> {
        validate(&parse(q).unwrap(), &SchemaDescription::dependency_schema())
    }

    #[test]
    fn accepts_schema_tokens() {
        check("MATCH (a:Package)-[:DEPENDS_ON]->(b:Package) WHERE a.name = 'x' RETURN b.version").unwrap();
    }

    #[test]
    fn names_offending_tokens() {
        assert_eq!(check("MATCH (p:Pkg) RETURN p"), Err(QueryError::UnknownLabel("Pkg".into())));
        assert_eq!(
            check("MATCH (a)-[:IMPORTS]->(b) RETURN a"),
            Err(QueryError::UnknownRelationship("IMPORTS".into()))
        );
        assert_eq!(
            check("MATCH (a {license: 'MIT'}) RETURN a"),
            Err(QueryError::UnknownProperty("license".into()))
        );
        assert_eq!(
            check("MATCH (a) RETURN a.license"),
            Err(QueryError::UnknownProperty("license".into()))
        );
    }

    #[test]
    fn relationship_type_is_case_sensitive() {
        assert_eq!(
            check("MATCH (a)-[:depends_on]->(b) RETURN a"),
            Err(QueryError::UnknownRelationship("depends_on".into()))
        );
    }

    #[test]
    fn checks_where_patterns() {
        assert_eq!(
            check("MATCH (a) WHERE NOT (a)-[:USES]->() RETURN a"),
            Err(QueryError::UnknownRelationship("USES".into()))
        );
    }
}
