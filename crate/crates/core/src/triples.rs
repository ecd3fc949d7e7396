//! `subject | predicate | object` triple sets.

use std::collections::HashSet;

use crate::error::TripleError;
use crate::graph::{Edge, LabeledGraph, Node};

/// Builds a graph from one triple per non-blank line.
///
/// Each distinct entity string becomes one node whose id and label are that
/// string, in order of first appearance. The first subject is the root.
pub fn parse_triples(text: &str) -> Result<LabeledGraph, TripleError> {
    let mut nodes = Vec::new();
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    let mut root = None;
    let mut last_line = 0;
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        last_line = line_no;
        let parts: Vec<&str> = line.split('|').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(TripleError::Separators { line: line_no });
        }
        if parts.iter().any(|p| p.is_empty()) {
            return Err(TripleError::EmptyField { line: line_no });
        }
        let (s, p, o) = (parts[0], parts[1], parts[2]);
        if s == o {
            return Err(TripleError::Graph {
                line: line_no,
                source: crate::error::GraphError::SelfLoop(s.to_string()),
            });
        }
        for entity in [s, o] {
            if seen.insert(entity.to_string()) {
                nodes.push(Node::new(entity, entity));
            }
        }
        root.get_or_insert_with(|| s.to_string());
        edges.push(Edge::new(s, p, o));
    }
    let root = root.ok_or(TripleError::EmptyGraph)?;
    LabeledGraph::new(nodes, edges, &root).map_err(|source| TripleError::Graph {
        line: last_line,
        source,
    })
}

/// Inverse of [`parse_triples`] for graphs whose node ids equal their labels.
pub fn to_triples(g: &LabeledGraph) -> String {
    g.edges()
        .iter()
        .map(|e| format!("{} | {} | {}\n", e.source, e.label, e.target))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_shared_entity_nodes() {
        let g = parse_triples("Alan_Bean | occupation | Test_pilot\n\nAlan_Bean | birthPlace | Wheeler,_Texas\n").unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.root(), "Alan_Bean");
        assert_eq!(parse_triples(&to_triples(&g)).unwrap(), g);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert_eq!(parse_triples(" \n"), Err(TripleError::EmptyGraph));
        assert_eq!(parse_triples("a | b\n"), Err(TripleError::Separators { line: 1 }));
        assert_eq!(parse_triples("a | b | c\na | b | c | d"), Err(TripleError::Separators { line: 2 }));
        assert_eq!(parse_triples("a |  | c"), Err(TripleError::EmptyField { line: 1 }));
        assert!(matches!(parse_triples("a | r | a"), Err(TripleError::Graph { line: 1, .. })));
    }
}
