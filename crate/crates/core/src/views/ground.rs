//! Grounding graph triples onto sentence tokens.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::alignment::Alignment;
use crate::error::ViewError;
use crate::graph::LabeledGraph;

pub const COMPOUND_LABEL: &str = "compound";
/// Label used for every arc when edge labels are switched off.
pub const PLACEHOLDER_LABEL: &str = "<arc>";

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroundedArc {
    pub head: usize,
    pub label: String,
    pub modifier: usize,
}

/// Labeled token-to-token arcs. Arcs are distinct and never connect a token
/// to itself.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedArcSet {
    pub arcs: Vec<GroundedArc>,
    pub sentence_length: usize,
    /// Edges dropped because an endpoint is unaligned.
    pub skipped_unaligned: usize,
    /// Edges dropped because both endpoints start on the same token.
    pub skipped_collisions: usize,
}

impl GroundedArcSet {
    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    /// `head<TAB>label<TAB>modifier` lines.
    pub fn to_tsv(&self) -> String {
        self.arcs
            .iter()
            .map(|a| format!("{}\t{}\t{}\n", a.head, a.label, a.modifier))
            .collect()
    }
}

/// Projects every edge onto the first tokens of its aligned endpoints and
/// links each multi-token node's first token to its other tokens with
/// `compound` arcs.
///
/// Edges with an unaligned endpoint, or whose endpoints share their first
/// token, are counted and dropped. Repeated arcs are kept once. Edge arcs
/// come first in edge order, then compound arcs in node order.
pub fn ground_triples(
    g: &LabeledGraph,
    a: &Alignment,
    sentence_length: usize,
    include_edge_labels: bool,
) -> Result<GroundedArcSet, ViewError> {
    for (node, toks) in a.iter() {
        if let Some(&bad) = toks.iter().find(|&&t| t >= sentence_length) {
            return Err(ViewError::AlignmentOutOfRange {
                node: node.to_string(),
                index: bad,
                length: sentence_length,
            });
        }
    }
    let first = |i: usize| a.get(&g.node(i).id).map(|t| t[0]);
    let label = |l: &str| {
        if include_edge_labels {
            l.to_string()
        } else {
            PLACEHOLDER_LABEL.to_string()
        }
    };
    let mut out = GroundedArcSet {
        sentence_length,
        ..Default::default()
    };
    let mut seen = HashSet::new();
    let mut push = |out: &mut GroundedArcSet, arc: GroundedArc| {
        if seen.insert(arc.clone()) {
            out.arcs.push(arc);
        }
    };
    for (k, e) in g.edges().iter().enumerate() {
        let (s, t) = g.ends(k);
        match (first(s), first(t)) {
            (Some(h), Some(m)) if h == m => out.skipped_collisions += 1,
            (Some(head), Some(modifier)) => push(
                &mut out,
                GroundedArc {
                    head,
                    label: label(&e.label),
                    modifier,
                },
            ),
            _ => out.skipped_unaligned += 1,
        }
    }
    for n in g.nodes() {
        if let Some(toks) = a.get(&n.id) {
            for &m in &toks[1..] {
                push(
                    &mut out,
                    GroundedArc {
                        head: toks[0],
                        label: label(COMPOUND_LABEL),
                        modifier: m,
                    },
                );
            }
        }
    }
    Ok(out)
}
