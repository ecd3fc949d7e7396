//! Subject-predicate-object interactions read off AMR graphs.

use serde::{Deserialize, Serialize};

use crate::graph::{view_label, LabeledGraph};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interaction {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

fn is_role(label: &str, role: &str) -> bool {
    label.strip_prefix(':').unwrap_or(label) == role
}

/// One interaction per `(ARG0, ARG1)` pair of outgoing edges of each node,
/// visiting nodes in traversal order and edges in stored order. Labels have
/// sense suffixes removed.
pub fn extract_spo(g: &LabeledGraph) -> Vec<Interaction> {
    let mut out = Vec::new();
    for p in g.traversal_order() {
        let targets = |role: &str| -> Vec<usize> {
            g.outgoing(p)
                .iter()
                .filter(|&&k| is_role(&g.edges()[k].label, role))
                .map(|&k| g.ends(k).1)
                .collect()
        };
        let (subjects, objects) = (targets("ARG0"), targets("ARG1"));
        for &s in &subjects {
            for &o in &objects {
                out.push(Interaction {
                    subject: view_label(g.node(s)).to_string(),
                    predicate: view_label(g.node(p)).to_string(),
                    object: view_label(g.node(o)).to_string(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penman::parse_penman;

    fn triples(text: &str) -> Vec<(String, String, String)> {
        extract_spo(&parse_penman(text).unwrap())
            .into_iter()
            .map(|i| (i.subject, i.predicate, i.object))
            .collect()
    }

    #[test]
    fn fragment_pattern() {
        assert!(triples("(b / boy :mod (t / tall))").is_empty());
        let two = triples("(s / see-01 :ARG0 (b / boy) :ARG1 (c / cat) :ARG1 (d / dog))");
        assert_eq!(two.len(), 2);
        assert_eq!(two[1], ("boy".into(), "see".into(), "dog".into()));
    }
}
