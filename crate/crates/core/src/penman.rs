//! PENMAN notation reader and writer.

use std::collections::{HashMap, HashSet};

use crate::error::{PenmanError, PenmanErrorKind};
use crate::graph::{Edge, LabeledGraph, Node, NodeKind};

/// Deepest bracket nesting accepted by [`parse_penman`].
pub const MAX_DEPTH: usize = 512;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Open,
    Close,
    Slash,
    Role(String),
    Str(String),
    Sym(String),
}

fn is_delim(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '"' | '/')
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, PenmanError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |kind, offset| PenmanError { kind, offset };
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        match c {
            _ if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '(' => {
                out.push((Tok::Open, start));
                i += 1;
            }
            ')' => {
                out.push((Tok::Close, start));
                i += 1;
            }
            '/' => {
                out.push((Tok::Slash, start));
                i += 1;
            }
            '"' => {
                i += 1;
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None => return Err(err(PenmanErrorKind::UnterminatedString, start)),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') if i + 1 < chars.len() => {
                            s.push(chars[i + 1]);
                            i += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push((Tok::Str(s), start));
            }
            _ => {
                while i < chars.len() && !is_delim(chars[i]) {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                if let Some(rest) = s.strip_prefix(':') {
                    if rest.is_empty() {
                        return Err(err(PenmanErrorKind::Expected("a relation name after `:`"), start));
                    }
                    out.push((Tok::Role(s), start));
                } else {
                    out.push((Tok::Sym(s), start));
                }
            }
        }
    }
    Ok(out)
}

enum Target {
    Node(String),
    Mention { text: String, slot: usize },
    Literal { text: String, slot: usize },
}

enum Slot {
    Variable(String),
    Pending,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    vars: HashMap<String, String>,
    slots: Vec<Slot>,
    edges: Vec<(String, String, Option<Target>)>,
}

impl Parser {
    fn err(&self, kind: PenmanErrorKind) -> PenmanError {
        let offset = self.toks.get(self.pos).map_or(self.end, |t| t.1);
        PenmanError { kind, offset }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    /// Parses one bracketed node and returns its variable. Nesting is handled
    /// with an explicit stack so adversarial depth cannot exhaust the call
    /// stack.
    fn parse_graph(&mut self) -> Result<String, PenmanError> {
        // Each frame: (variable, index of the edge waiting for this node).
        let mut stack: Vec<(String, Option<usize>)> = Vec::new();
        let top = self.open_node()?;
        stack.push((top.clone(), None));
        while let Some((var, _)) = stack.last() {
            let var = var.clone();
            match self.peek().cloned() {
                None => return Err(self.err(PenmanErrorKind::Unbalanced)),
                Some(Tok::Close) => {
                    self.pos += 1;
                    stack.pop();
                }
                Some(Tok::Role(role)) => {
                    let role_at = self.toks[self.pos].1;
                    self.pos += 1;
                    match self.peek().cloned() {
                        Some(Tok::Open) => {
                            if stack.len() >= MAX_DEPTH {
                                return Err(self.err(PenmanErrorKind::TooDeep(MAX_DEPTH)));
                            }
                            let edge = self.edges.len();
                            self.edges.push((var, role, None));
                            let child = self.open_node()?;
                            self.edges[edge].2 = Some(Target::Node(child.clone()));
                            stack.push((child, Some(edge)));
                        }
                        Some(Tok::Sym(text)) => {
                            self.pos += 1;
                            let slot = self.slots.len();
                            self.slots.push(Slot::Pending);
                            self.edges.push((var, role, Some(Target::Mention { text, slot })));
                        }
                        Some(Tok::Str(text)) => {
                            self.pos += 1;
                            let slot = self.slots.len();
                            self.slots.push(Slot::Pending);
                            self.edges.push((var, role, Some(Target::Literal { text, slot })));
                        }
                        _ => {
                            return Err(PenmanError {
                                kind: PenmanErrorKind::RelationWithoutValue(role),
                                offset: role_at,
                            })
                        }
                    }
                }
                Some(Tok::Open) => return Err(self.err(PenmanErrorKind::Expected("a relation before `(`"))),
                Some(_) => return Err(self.err(PenmanErrorKind::Expected("a relation or `)`"))),
            }
        }
        Ok(top)
    }

    /// Consumes `( var / concept` and registers the variable.
    fn open_node(&mut self) -> Result<String, PenmanError> {
        if self.peek() != Some(&Tok::Open) {
            return Err(self.err(PenmanErrorKind::Expected("`(`")));
        }
        self.pos += 1;
        let var = match self.peek() {
            Some(Tok::Sym(v)) => v.clone(),
            None => return Err(self.err(PenmanErrorKind::Unbalanced)),
            _ => return Err(self.err(PenmanErrorKind::Expected("a variable"))),
        };
        if self.vars.contains_key(&var) {
            return Err(self.err(PenmanErrorKind::DuplicateVariable(var)));
        }
        self.pos += 1;
        if self.peek() != Some(&Tok::Slash) {
            return Err(self.err(PenmanErrorKind::Expected("`/` after the variable")));
        }
        self.pos += 1;
        let concept = match self.peek() {
            Some(Tok::Sym(c)) | Some(Tok::Str(c)) => c.clone(),
            None => return Err(self.err(PenmanErrorKind::Unbalanced)),
            _ => return Err(self.err(PenmanErrorKind::Expected("a concept"))),
        };
        self.pos += 1;
        self.vars.insert(var.clone(), concept);
        self.slots.push(Slot::Variable(var.clone()));
        Ok(var)
    }
}

/// Parses one PENMAN graph.
///
/// Relations keep their leading colon (`:ARG0`). A bare symbol value that
/// names a variable anywhere in the graph is a re-entrant reference; any
/// other bare symbol or quoted string becomes a constant node with a
/// synthetic id. Node order follows first appearance in the text and edge
/// order follows the relations.
pub fn parse_penman(text: &str) -> Result<LabeledGraph, PenmanError> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(PenmanError {
            kind: PenmanErrorKind::Empty,
            offset: 0,
        });
    }
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.chars().count(),
        vars: HashMap::new(),
        slots: Vec::new(),
        edges: Vec::new(),
    };
    let root = p.parse_graph()?;
    if p.pos < p.toks.len() {
        return Err(p.err(if p.toks[p.pos].0 == Tok::Close {
            PenmanErrorKind::Unbalanced
        } else {
            PenmanErrorKind::TrailingContent
        }));
    }

    let mut used: HashSet<String> = p.vars.keys().cloned().collect();
    let mut counter = 0usize;
    let mut fresh = || loop {
        let id = format!("_{counter}");
        counter += 1;
        if used.insert(id.clone()) {
            return id;
        }
    };
    let mut slot_nodes: Vec<Option<Node>> = p
        .slots
        .iter()
        .map(|s| match s {
            Slot::Variable(v) => Some(Node::new(v.clone(), p.vars[v].clone())),
            Slot::Pending => None,
        })
        .collect();
    let mut edges = Vec::with_capacity(p.edges.len());
    for (source, role, target) in p.edges {
        let target = match target.expect("every relation is completed") {
            Target::Node(v) => v,
            Target::Mention { text, .. } if p.vars.contains_key(&text) => text,
            Target::Mention { text, slot } | Target::Literal { text, slot } => {
                let id = fresh();
                slot_nodes[slot] = Some(Node::constant(id.clone(), text));
                id
            }
        };
        edges.push(Edge::new(source, role, target));
    }
    let nodes: Vec<Node> = slot_nodes.into_iter().flatten().collect();
    LabeledGraph::new(nodes, edges, &root).map_err(|e| PenmanError {
        kind: PenmanErrorKind::Graph(e),
        offset: 0,
    })
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty() || s.starts_with(':') || s.chars().any(is_delim) || s.contains('\\')
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn atom(s: &str) -> String {
    if needs_quotes(s) {
        quote(s)
    } else {
        s.to_string()
    }
}

/// Writes `g` in PENMAN notation.
///
/// Variables are renamed `v0, v1, ...` in traversal order so that arbitrary
/// node ids survive the round trip. Constants without outgoing edges and with
/// a single incoming edge are written as quoted literals; every other node is
/// written as a variable. Fails with the first node not reachable from the
/// root.
pub fn to_penman(g: &LabeledGraph) -> Result<String, crate::error::ViewError> {
    let reach = g.reachable_from_root();
    if let Some(i) = reach.iter().position(|r| !r) {
        return Err(crate::error::ViewError::NodeUnreachable(g.node(i).id.clone()));
    }
    let literal: Vec<bool> = (0..g.node_count())
        .map(|i| {
            g.node(i).kind == NodeKind::Constant
                && g.outgoing(i).is_empty()
                && g.in_degree(i) == 1
                && i != g.root_index()
        })
        .collect();
    let mut var = vec![None::<usize>; g.node_count()];
    let mut next = 0usize;
    let mut out = String::new();
    // Frames of (node, next outgoing position).
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let mut open = |v: usize, out: &mut String, var: &mut Vec<Option<usize>>| {
        var[v] = Some(next);
        out.push_str(&format!("(v{next} / {}", atom(g.label(v))));
        next += 1;
    };
    open(g.root_index(), &mut out, &mut var);
    stack.push((g.root_index(), 0));
    while let Some(top) = stack.last_mut() {
        let (v, pos) = *top;
        if pos == g.outgoing(v).len() {
            out.push(')');
            stack.pop();
            continue;
        }
        top.1 += 1;
        let k = g.outgoing(v)[pos];
        let t = g.ends(k).1;
        out.push(' ');
        out.push_str(&g.edges()[k].label);
        out.push(' ');
        if literal[t] {
            out.push_str(&quote(g.label(t)));
        } else if let Some(n) = var[t] {
            out.push_str(&format!("v{n}"));
        } else {
            open(t, &mut out, &mut var);
            stack.push((t, 0));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_graph_with_reentrancy() {
        let g = parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02 :ARG0 b))").unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.root(), "w");
        let labels: Vec<_> = g.edges().iter().map(|e| e.label.as_str()).collect();
        assert_eq!(labels, [":ARG0", ":ARG1", ":ARG0"]);
        assert_eq!(g.edges()[2].target, "b");
    }

    #[test]
    fn constants_and_forward_references() {
        let g = parse_penman(r#"(a / and :op1 b :op2 (b / boy :polarity -) :name "New \"York\"")"#).unwrap();
        assert_eq!(g.edges()[0].target, "b");
        let consts: Vec<_> = g
            .nodes()
            .iter()
            .filter(|n| n.kind == NodeKind::Constant)
            .map(|n| n.label.as_str())
            .collect();
        assert_eq!(consts, ["-", "New \"York\""]);
    }

    fn kind(text: &str) -> PenmanErrorKind {
        parse_penman(text).unwrap_err().kind
    }

    #[test]
    fn error_kinds_and_offsets() {
        assert_eq!(kind("   "), PenmanErrorKind::Empty);
        assert_eq!(kind("(a / b"), PenmanErrorKind::Unbalanced);
        assert_eq!(kind("(a / b))"), PenmanErrorKind::Unbalanced);
        assert_eq!(kind("(a / b :ARG0)"), PenmanErrorKind::RelationWithoutValue(":ARG0".into()));
        assert_eq!(kind("(a / b :ARG0 (a / c))"), PenmanErrorKind::DuplicateVariable("a".into()));
        assert_eq!(kind("(a / b) x"), PenmanErrorKind::TrailingContent);
        assert_eq!(kind("(a / \"b"), PenmanErrorKind::UnterminatedString);
        let e = parse_penman("(a / b :ARG0)").unwrap_err();
        assert_eq!(e.offset, 7);
        assert!(matches!(kind("(a / b :r a)"), PenmanErrorKind::Graph(_)));
    }

    #[test]
    fn deep_nesting_is_rejected_not_overflowed() {
        let mut s = String::from("(a0 / x");
        for i in 1..=MAX_DEPTH + 5 {
            s.push_str(&format!(" :r (a{i} / x"));
        }
        s.push_str(&")".repeat(MAX_DEPTH + 6));
        assert_eq!(kind(&s), PenmanErrorKind::TooDeep(MAX_DEPTH));
    }

    #[test]
    fn writer_round_trips_structure() {
        let src = r#"(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02 :ARG0 b :mod "odd label") :polarity -)"#;
        let g = parse_penman(src).unwrap();
        let text = to_penman(&g).unwrap();
        let back = parse_penman(&text).unwrap();
        assert!(crate::iso::is_isomorphic(&g, &back));
    }
}
