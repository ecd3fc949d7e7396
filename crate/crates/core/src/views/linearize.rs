//! Bracketed depth-first linearization and its inverse.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ViewError;
use crate::graph::{view_label, Edge, LabeledGraph, Node};

/// Synthetic root token joining the components of a disconnected graph.
pub const FOREST_ROOT: &str = "AND";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Open,
    Close,
    NodeLabel,
    EdgeLabel,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphToken {
    pub kind: TokenKind,
    pub text: String,
}

impl GraphToken {
    fn open() -> Self {
        Self {
            kind: TokenKind::Open,
            text: "(".into(),
        }
    }

    fn close() -> Self {
        Self {
            kind: TokenKind::Close,
            text: ")".into(),
        }
    }

    fn node(text: &str) -> Self {
        Self {
            kind: TokenKind::NodeLabel,
            text: text.into(),
        }
    }

    fn edge(text: &str) -> Self {
        Self {
            kind: TokenKind::EdgeLabel,
            text: text.into(),
        }
    }
}

/// Child visiting order used by [`linearize`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChildOrder {
    /// Outgoing edges in stored order.
    Input,
    /// Outgoing edges shuffled per node by a generator seeded with this value.
    Random(u64),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearizedGraph {
    pub tokens: Vec<GraphToken>,
}

impl LinearizedGraph {
    /// Space-separated token texts.
    pub fn to_text(&self) -> String {
        self.tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ")
    }

    /// Token texts for the graph decoder vocabulary.
    pub fn texts(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.text.clone()).collect()
    }

    /// Classifies whitespace-separated tokens by position: the token after
    /// `(` is a node label; inside a node, with edge labels enabled, tokens
    /// alternate between an edge label and its value.
    pub fn from_text(text: &str, edge_labels: bool) -> Result<Self, ViewError> {
        let mut tokens = Vec::new();
        let mut depth = 0usize;
        let mut after_open = false;
        let mut after_edge = false;
        for (i, w) in text.split_whitespace().enumerate() {
            let token = match w {
                "(" => {
                    after_open = true;
                    after_edge = false;
                    depth += 1;
                    GraphToken::open()
                }
                ")" => {
                    if after_open {
                        return Err(ViewError::Unexpected {
                            expected: "a node label",
                            position: i,
                        });
                    }
                    if after_edge {
                        return Err(ViewError::DanglingEdgeLabel(i - 1));
                    }
                    depth = depth.checked_sub(1).ok_or(ViewError::Unbalanced(i))?;
                    GraphToken::close()
                }
                _ if after_open => {
                    after_open = false;
                    GraphToken::node(w)
                }
                _ if depth == 0 => return Err(ViewError::Unbalanced(i)),
                _ if edge_labels && !after_edge => {
                    after_edge = true;
                    GraphToken::edge(w)
                }
                _ => {
                    after_edge = false;
                    GraphToken::node(w)
                }
            };
            tokens.push(token);
        }
        let n = tokens.len();
        if after_edge {
            return Err(ViewError::DanglingEdgeLabel(n - 1));
        }
        if depth != 0 || after_open {
            return Err(ViewError::Unbalanced(n));
        }
        Ok(Self { tokens })
    }
}

struct Walker<'a> {
    g: &'a LabeledGraph,
    edge_labels: bool,
    rng: Option<ChaCha8Rng>,
    visited: Vec<bool>,
    out: Vec<GraphToken>,
}

impl Walker<'_> {
    fn children(&mut self, v: usize) -> Vec<usize> {
        let mut c = self.g.outgoing(v).to_vec();
        if let Some(rng) = &mut self.rng {
            c.shuffle(rng);
        }
        c
    }

    fn expand(&mut self, start: usize) {
        self.visited[start] = true;
        self.out.push(GraphToken::open());
        self.out.push(GraphToken::node(view_label(self.g.node(start))));
        let first = self.children(start);
        let mut stack = vec![(first, 0usize)];
        while let Some((kids, pos)) = stack.last_mut() {
            if *pos == kids.len() {
                self.out.push(GraphToken::close());
                stack.pop();
                continue;
            }
            let k = kids[*pos];
            *pos += 1;
            if self.edge_labels {
                self.out.push(GraphToken::edge(&self.g.edges()[k].label));
            }
            let t = self.g.ends(k).1;
            if self.visited[t] {
                self.out.push(GraphToken::node(view_label(self.g.node(t))));
            } else {
                self.visited[t] = true;
                self.out.push(GraphToken::open());
                self.out.push(GraphToken::node(view_label(self.g.node(t))));
                let kids = self.children(t);
                stack.push((kids, 0));
            }
        }
    }
}

fn walker(g: &LabeledGraph, order: ChildOrder, edge_labels: bool) -> Walker<'_> {
    Walker {
        g,
        edge_labels,
        rng: match order {
            ChildOrder::Input => None,
            ChildOrder::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        },
        visited: vec![false; g.node_count()],
        out: Vec::new(),
    }
}

/// Depth-first bracketed linearization from the root.
///
/// Each node is expanded once as `( label child... )`; a later mention emits
/// only its label. Labels have sense suffixes removed. Fails on a node that
/// cannot be reached from the root.
pub fn linearize(g: &LabeledGraph, order: ChildOrder, edge_labels: bool) -> Result<LinearizedGraph, ViewError> {
    let mut w = walker(g, order, edge_labels);
    w.expand(g.root_index());
    if let Some(i) = w.visited.iter().position(|v| !v) {
        return Err(ViewError::NodeUnreachable(g.node(i).id.clone()));
    }
    Ok(LinearizedGraph { tokens: w.out })
}

/// Like [`linearize`], but a graph with nodes unreachable from the root is
/// written as `( AND (root...) (next...) ... )`, starting further expansions
/// at unvisited nodes in stored order. Fully reachable graphs are written
/// exactly as by [`linearize`].
pub fn linearize_covering(g: &LabeledGraph, order: ChildOrder, edge_labels: bool) -> LinearizedGraph {
    let mut w = walker(g, order, edge_labels);
    w.expand(g.root_index());
    if w.visited.iter().all(|&v| v) {
        return LinearizedGraph { tokens: w.out };
    }
    let mut inner = std::mem::take(&mut w.out);
    while let Some(i) = w.visited.iter().position(|v| !v) {
        w.expand(i);
        inner.append(&mut w.out);
    }
    let mut tokens = vec![GraphToken::open(), GraphToken::node(FOREST_ROOT)];
    tokens.extend(inner);
    tokens.push(GraphToken::close());
    LinearizedGraph { tokens }
}

/// Rebuilds a graph from a linearization.
///
/// A bare label refers to the earliest expanded node carrying that label.
/// Reparsed nodes get ids `n0, n1, ...` in expansion order. When the outer
/// node is the forest root and its children carry no edge labels, the forest
/// wrapper is dropped and the first component's root becomes the root.
pub fn reparse_linearized(lin: &LinearizedGraph) -> Result<LabeledGraph, ViewError> {
    let toks = &lin.tokens;
    let mut nodes: Vec<Node> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();

    let label_at = |i: usize| -> Result<&str, ViewError> {
        match toks.get(i) {
            Some(t) if t.kind == TokenKind::NodeLabel => Ok(&t.text),
            _ => Err(ViewError::Unexpected {
                expected: "a node label after `(`",
                position: i,
            }),
        }
    };
    let open = |nodes: &mut Vec<Node>, stack: &mut Vec<usize>, label: &str| -> usize {
        let id = nodes.len();
        nodes.push(Node::new(format!("n{id}"), label));
        stack.push(id);
        id
    };

    if toks.first().map(|t| t.kind) != Some(TokenKind::Open) {
        return Err(ViewError::Unexpected {
            expected: "`(`",
            position: 0,
        });
    }
    let top = label_at(1)?;
    let forest = top == FOREST_ROOT && toks.get(2).map(|t| t.kind) == Some(TokenKind::Open);
    if !forest {
        open(&mut nodes, &mut stack, top);
    }
    let mut i = 2usize;
    let mut closed = false;
    while i < toks.len() {
        let t = &toks[i];
        let parent = stack.last().copied();
        match (t.kind, parent) {
            (TokenKind::Close, Some(_)) => {
                stack.pop();
                i += 1;
                if stack.is_empty() && !forest {
                    closed = true;
                    break;
                }
            }
            (TokenKind::Close, None) if forest => {
                closed = true;
                i += 1;
                break;
            }
            (TokenKind::Open, None) if forest => {
                let label = label_at(i + 1)?;
                open(&mut nodes, &mut stack, label);
                i += 2;
            }
            (TokenKind::EdgeLabel, Some(p)) => {
                let value = toks.get(i + 1).ok_or(ViewError::DanglingEdgeLabel(i))?;
                let child = match value.kind {
                    TokenKind::Open => {
                        let label = label_at(i + 2)?;
                        i += 3;
                        open(&mut nodes, &mut stack, label)
                    }
                    TokenKind::NodeLabel => {
                        i += 2;
                        mention(&nodes, &value.text, i - 1)?
                    }
                    _ => return Err(ViewError::DanglingEdgeLabel(i)),
                };
                edges.push(Edge::new(format!("n{p}"), t.text.clone(), format!("n{child}")));
            }
            (TokenKind::Open, Some(p)) => {
                let label = label_at(i + 1)?;
                let id = open(&mut nodes, &mut stack, label);
                edges.push(Edge::new(format!("n{p}"), "", format!("n{id}")));
                i += 2;
            }
            (TokenKind::NodeLabel, Some(p)) => {
                let child = mention(&nodes, &t.text, i)?;
                edges.push(Edge::new(format!("n{p}"), "", format!("n{child}")));
                i += 1;
            }
            _ => return Err(ViewError::Unbalanced(i)),
        }
    }
    if !closed || i != toks.len() || nodes.is_empty() {
        return Err(ViewError::Unbalanced(i));
    }
    Ok(LabeledGraph::new(nodes, edges, "n0")?)
}

fn mention(nodes: &[Node], label: &str, position: usize) -> Result<usize, ViewError> {
    nodes
        .iter()
        .position(|n| n.label == label)
        .ok_or_else(|| ViewError::UndefinedMention {
            label: label.to_string(),
            position,
        })
}
