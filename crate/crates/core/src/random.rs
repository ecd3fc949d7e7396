//! Seeded random graphs for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::{Edge, LabeledGraph, Node};

pub const EDGE_LABELS: [&str; 5] = [":ARG0", ":ARG1", ":ARG2", ":mod", ":time"];

/// Random rooted graph with `2..=max_nodes` nodes and distinct labels.
///
/// A random spanning tree hangs every node under the root; afterwards each
/// non-root node receives one extra incoming edge with probability
/// `reentrancy`. Node order is shuffled so the root is not always first.
pub fn random_rooted_graph(rng: &mut impl Rng, max_nodes: usize, reentrancy: f64) -> LabeledGraph {
    let n = rng.gen_range(2..=max_nodes.max(2));
    let mut edges = Vec::new();
    for i in 1..n {
        let parent = rng.gen_range(0..i);
        let label = EDGE_LABELS[rng.gen_range(0..EDGE_LABELS.len())];
        edges.push(Edge::new(format!("v{parent}"), label, format!("v{i}")));
    }
    for i in 1..n {
        if rng.gen_bool(reentrancy) {
            let mut from = rng.gen_range(0..n - 1);
            if from >= i {
                from += 1;
            }
            let label = EDGE_LABELS[rng.gen_range(0..EDGE_LABELS.len())];
            edges.push(Edge::new(format!("v{from}"), label, format!("v{i}")));
        }
    }
    edges.shuffle(rng);
    let mut nodes: Vec<Node> = (0..n).map(|i| Node::new(format!("v{i}"), format!("c{i}"))).collect();
    nodes.shuffle(rng);
    LabeledGraph::new(nodes, edges, "v0").expect("generated graph is valid")
}

/// Random graph on `1..=max_nodes` nodes with `edge_prob` chance of an edge
/// for each ordered pair; it may be disconnected. Labels repeat.
pub fn random_graph(rng: &mut impl Rng, max_nodes: usize, edge_prob: f64) -> LabeledGraph {
    let n = rng.gen_range(1..=max_nodes.max(1));
    let nodes: Vec<Node> = (0..n)
        .map(|i| Node::new(format!("v{i}"), format!("c{}", rng.gen_range(0..3))))
        .collect();
    let mut edges = Vec::new();
    for s in 0..n {
        for t in 0..n {
            if s != t && rng.gen_bool(edge_prob) {
                let label = EDGE_LABELS[rng.gen_range(0..EDGE_LABELS.len())];
                edges.push(Edge::new(format!("v{s}"), label, format!("v{t}")));
            }
        }
    }
    edges.shuffle(rng);
    LabeledGraph::new(nodes, edges, "v0").expect("generated graph is valid")
}
