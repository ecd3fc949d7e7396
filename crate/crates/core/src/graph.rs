use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    /// A concept or entity.
    #[default]
    Variable,
    /// A PENMAN constant (string, number, polarity marker).
    Constant,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "is_variable")]
    pub kind: NodeKind,
}

fn is_variable(kind: &NodeKind) -> bool {
    *kind == NodeKind::Variable
}

impl Node {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            kind: NodeKind::Variable,
        }
    }

    pub fn constant(id: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            kind: NodeKind::Constant,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub label: String,
    pub target: String,
}

impl Edge {
    pub fn new(source: impl Into<String>, label: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            label: label.into(),
            target: target.into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    root: String,
}

/// Rooted graph with labeled nodes and directed labeled edges.
///
/// Node ids are unique, every edge endpoint exists, the root exists and there
/// are no self-loops. Node and edge order is preserved as given and drives
/// every traversal.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct LabeledGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    root: usize,
    index: HashMap<String, usize>,
    ends: Vec<(usize, usize)>,
    outgoing: Vec<Vec<usize>>,
    incident: Vec<Vec<usize>>,
}

impl PartialEq for LabeledGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges && self.root == other.root
    }
}

impl Eq for LabeledGraph {}

impl TryFrom<RawGraph> for LabeledGraph {
    type Error = GraphError;

    fn try_from(raw: RawGraph) -> Result<Self, GraphError> {
        Self::new(raw.nodes, raw.edges, &raw.root)
    }
}

impl From<LabeledGraph> for RawGraph {
    fn from(g: LabeledGraph) -> Self {
        let root = g.nodes[g.root].id.clone();
        RawGraph {
            nodes: g.nodes,
            edges: g.edges,
            root,
        }
    }
}

impl LabeledGraph {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>, root: &str) -> Result<Self, GraphError> {
        if nodes.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(n.id.clone()));
            }
        }
        let mut ends = Vec::with_capacity(edges.len());
        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut incident = vec![Vec::new(); nodes.len()];
        for (k, e) in edges.iter().enumerate() {
            let s = *index
                .get(&e.source)
                .ok_or_else(|| GraphError::UnknownNode(e.source.clone()))?;
            let t = *index
                .get(&e.target)
                .ok_or_else(|| GraphError::UnknownNode(e.target.clone()))?;
            if s == t {
                return Err(GraphError::SelfLoop(e.source.clone()));
            }
            ends.push((s, t));
            outgoing[s].push(k);
            incident[s].push(k);
            incident[t].push(k);
        }
        let root = *index
            .get(root)
            .ok_or_else(|| GraphError::UnknownRoot(root.to_string()))?;
        Ok(Self {
            nodes,
            edges,
            root,
            index,
            ends,
            outgoing,
            incident,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn root(&self) -> &str {
        &self.nodes[self.root].id
    }

    pub fn root_index(&self) -> usize {
        self.root
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn label(&self, i: usize) -> &str {
        &self.nodes[i].label
    }

    /// `(source index, target index)` of edge `k`.
    pub fn ends(&self, k: usize) -> (usize, usize) {
        self.ends[k]
    }

    /// Outgoing edge indices of node `i`, in stored order.
    pub fn outgoing(&self, i: usize) -> &[usize] {
        &self.outgoing[i]
    }

    /// Edge indices touching node `i` in either direction, in stored order.
    pub fn incident(&self, i: usize) -> &[usize] {
        &self.incident[i]
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.incident[i].len() - self.outgoing[i].len()
    }

    /// Node indices in depth-first preorder from the root following edge
    /// direction, then every node not reached, in stored order.
    pub fn traversal_order(&self) -> Vec<usize> {
        let mut seen = vec![false; self.nodes.len()];
        let mut order = Vec::with_capacity(self.nodes.len());
        let starts = std::iter::once(self.root).chain(0..self.nodes.len());
        for start in starts {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                order.push(v);
                for &k in self.outgoing[v].iter().rev() {
                    let t = self.ends[k].1;
                    if !seen[t] {
                        stack.push(t);
                    }
                }
            }
        }
        order
    }

    /// Nodes reachable from the root along edge direction.
    pub fn reachable_from_root(&self) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        seen[self.root] = true;
        while let Some(v) = stack.pop() {
            for &k in &self.outgoing[v] {
                let t = self.ends[k].1;
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen
    }

    /// Same structure with `f` applied to every node label.
    pub fn map_labels(&self, mut f: impl FnMut(&Node) -> String) -> Self {
        let mut g = self.clone();
        for n in &mut g.nodes {
            n.label = f(n);
        }
        g
    }
}

/// `want-01` → `want`. Labels without a two-digit sense suffix are returned
/// unchanged.
pub fn strip_sense(label: &str) -> &str {
    let b = label.as_bytes();
    let n = b.len();
    if n >= 4 && b[n - 3] == b'-' && b[n - 2].is_ascii_digit() && b[n - 1].is_ascii_digit() {
        &label[..n - 3]
    } else {
        label
    }
}

/// Label as it appears in the views: sense suffixes are removed from
/// concepts, constants are kept verbatim.
pub fn view_label(node: &Node) -> &str {
    match node.kind {
        NodeKind::Variable => strip_sense(&node.label),
        NodeKind::Constant => &node.label,
    }
}

/// Drops `:wiki` relations (and constants left without any edge) and, when
/// `strip_senses` is set, removes sense suffixes from concept labels.
pub fn simplify(g: &LabeledGraph, strip_senses: bool) -> LabeledGraph {
    let keep_edge: Vec<bool> = g.edges.iter().map(|e| e.label != ":wiki").collect();
    let mut degree = vec![0usize; g.nodes.len()];
    for (k, &(s, t)) in g.ends.iter().enumerate() {
        if keep_edge[k] {
            degree[s] += 1;
            degree[t] += 1;
        }
    }
    let nodes: Vec<Node> = g
        .nodes
        .iter()
        .enumerate()
        .filter(|&(i, n)| !(n.kind == NodeKind::Constant && degree[i] == 0 && i != g.root))
        .map(|(_, n)| {
            let mut n = n.clone();
            if strip_senses {
                n.label = view_label(&n).to_string();
            }
            n
        })
        .collect();
    let edges: Vec<Edge> = g
        .edges
        .iter()
        .zip(&keep_edge)
        .filter(|(_, &k)| k)
        .map(|(e, _)| e.clone())
        .collect();
    LabeledGraph::new(nodes, edges, g.root()).expect("subgraph of a valid graph")
}

/// Replaces every re-entrant mention by a fresh leaf copy of the mentioned
/// node, turning a rooted graph into a tree.
///
/// The first edge that reaches a node in depth-first order (edge order, from
/// the root, then from unreached nodes in stored order) keeps pointing to it;
/// every later edge into that node is redirected to a copy with the same
/// label and no outgoing edges. Copies get ids `<id>~<k>`.
pub fn expand_reentrancies(g: &LabeledGraph) -> LabeledGraph {
    let n = g.nodes.len();
    let mut seen = vec![false; n];
    let mut tree_edge = vec![false; g.edges.len()];
    let starts = std::iter::once(g.root).chain(0..n);
    for start in starts {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        // Frames of (node, next outgoing position).
        let mut stack = vec![(start, 0usize)];
        while let Some(top) = stack.last_mut() {
            let (v, pos) = *top;
            if pos == g.outgoing[v].len() {
                stack.pop();
                continue;
            }
            top.1 += 1;
            let k = g.outgoing[v][pos];
            let t = g.ends[k].1;
            if !seen[t] {
                seen[t] = true;
                tree_edge[k] = true;
                stack.push((t, 0));
            }
        }
    }
    // An edge into a start node (reached before any edge) is re-entrant too.
    let mut nodes = g.nodes.clone();
    let mut edges = Vec::with_capacity(g.edges.len());
    let mut copies = vec![0usize; n];
    let mut taken: std::collections::HashSet<String> = g.nodes.iter().map(|n| n.id.clone()).collect();
    for (k, e) in g.edges.iter().enumerate() {
        if tree_edge[k] {
            edges.push(e.clone());
            continue;
        }
        let t = g.ends[k].1;
        let id = loop {
            copies[t] += 1;
            let candidate = format!("{}~{}", g.nodes[t].id, copies[t]);
            if taken.insert(candidate.clone()) {
                break candidate;
            }
        };
        nodes.push(Node {
            id: id.clone(),
            label: g.nodes[t].label.clone(),
            kind: g.nodes[t].kind,
        });
        edges.push(Edge::new(e.source.clone(), e.label.clone(), id));
    }
    LabeledGraph::new(nodes, edges, g.root()).expect("expansion keeps the graph valid")
}
