//! Shortest undirected relation paths between node pairs.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ViewError;
use crate::graph::LabeledGraph;

pub const SELF_FEATURE: &str = "SELF";
pub const NOPATH_FEATURE: &str = "NOPATH";
pub const UNK_FEATURE: &str = "<unk-path>";
pub const DEFAULT_FEATURE_CAPACITY: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Traversed from source to target.
    Down,
    /// Traversed from target to source.
    Up,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Down => Direction::Up,
            Direction::Up => Direction::Down,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Direction::Down => '↓',
            Direction::Up => '↑',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hop {
    pub label: String,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelationPath {
    SelfPair,
    NoPath,
    Hops(Vec<Hop>),
}

impl RelationPath {
    /// The same path walked from the other end.
    pub fn reversed(&self) -> Self {
        match self {
            RelationPath::Hops(h) => RelationPath::Hops(
                h.iter()
                    .rev()
                    .map(|x| Hop {
                        label: x.label.clone(),
                        direction: x.direction.flip(),
                    })
                    .collect(),
            ),
            other => other.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            RelationPath::Hops(h) => h.len(),
            _ => 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for RelationPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelationPath::SelfPair => f.write_str(SELF_FEATURE),
            RelationPath::NoPath => f.write_str(NOPATH_FEATURE),
            RelationPath::Hops(h) => {
                for (i, hop) in h.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{}{}", hop.label, hop.direction.symbol())?;
                }
                Ok(())
            }
        }
    }
}

/// Path text together with its index in a [`FeatureVocabulary`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationPathFeature {
    pub text: String,
    pub vocab_index: usize,
}

/// Undirected hop distances from `to` to every node (`usize::MAX` when
/// disconnected).
fn distances(g: &LabeledGraph, to: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.node_count()];
    dist[to] = 0;
    let mut queue = VecDeque::from([to]);
    while let Some(u) = queue.pop_front() {
        for &k in g.incident(u) {
            let (s, t) = g.ends(k);
            let w = if s == u { t } else { s };
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Walks from `from` toward the node whose distances are `dist`, taking at
/// every step the lowest-indexed edge that shortens the distance. This picks
/// the lexicographically smallest edge sequence among shortest paths.
fn walk(g: &LabeledGraph, from: usize, dist: &[usize]) -> Vec<Hop> {
    let mut hops = Vec::with_capacity(dist[from]);
    let mut u = from;
    while dist[u] > 0 {
        let (k, w, dir) = g
            .incident(u)
            .iter()
            .filter_map(|&k| {
                let (s, t) = g.ends(k);
                let (w, dir) = if s == u {
                    (t, Direction::Down)
                } else {
                    (s, Direction::Up)
                };
                (dist[w] + 1 == dist[u]).then_some((k, w, dir))
            })
            .min_by_key(|x| x.0)
            .expect("a node at positive distance has a closer neighbour");
        hops.push(Hop {
            label: g.edges()[k].label.clone(),
            direction: dir,
        });
        u = w;
    }
    hops
}

fn canonical(g: &LabeledGraph, src: usize, dst: usize, dist_to: impl Fn(usize) -> Vec<usize>) -> RelationPath {
    if src == dst {
        return RelationPath::SelfPair;
    }
    // The walk always starts at the lower index so that the chosen path does
    // not depend on which end is asked for.
    let (lo, hi) = (src.min(dst), src.max(dst));
    let dist = dist_to(hi);
    if dist[lo] == usize::MAX {
        return RelationPath::NoPath;
    }
    let path = RelationPath::Hops(walk(g, lo, &dist));
    if src == lo {
        path
    } else {
        path.reversed()
    }
}

/// Shortest path from `src` to `dst` ignoring edge direction.
///
/// Each hop records the edge label and whether it was walked along (`↓`) or
/// against (`↑`) the edge. Among equally short paths the one with the
/// smallest sequence of edge indices, read from the lower-indexed endpoint,
/// is chosen, so `path(b, a)` is always `path(a, b).reversed()`.
pub fn path_feature(g: &LabeledGraph, src: &str, dst: &str) -> Result<RelationPath, ViewError> {
    let s = g.index_of(src).ok_or_else(|| ViewError::UnknownNode(src.to_string()))?;
    let d = g.index_of(dst).ok_or_else(|| ViewError::UnknownNode(dst.to_string()))?;
    Ok(canonical(g, s, d, |to| distances(g, to)))
}

/// Paths for every ordered pair of node indices; `result[i][j]` is the path
/// from node `i` to node `j`.
pub fn all_pair_paths(g: &LabeledGraph) -> Vec<Vec<RelationPath>> {
    let n = g.node_count();
    let dist: Vec<Vec<usize>> = (0..n).map(|i| distances(g, i)).collect();
    let mut out = vec![vec![RelationPath::SelfPair; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let p = canonical(g, i, j, |to| dist[to].clone());
            out[j][i] = p.reversed();
            out[i][j] = p;
        }
    }
    out
}

/// Path texts mapped to dense indices. Indices 0, 1 and 2 are reserved for
/// `SELF`, `NOPATH` and the unknown-path marker; the rest hold the most
/// frequent training paths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureVocabulary {
    entries: Vec<String>,
    index: HashMap<String, usize>,
}

impl FeatureVocabulary {
    pub const SELF: usize = 0;
    pub const NOPATH: usize = 1;
    pub const UNK: usize = 2;

    fn reserved() -> Vec<String> {
        vec![SELF_FEATURE.into(), NOPATH_FEATURE.into(), UNK_FEATURE.into()]
    }

    /// Counts every ordered pair of every graph and keeps at most `capacity`
    /// entries in total. Ties in frequency go to the path seen first.
    pub fn build<'a>(graphs: impl IntoIterator<Item = &'a LabeledGraph>, capacity: usize) -> Self {
        let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
        for g in graphs {
            for row in all_pair_paths(g) {
                for p in row {
                    if let RelationPath::Hops(_) = p {
                        let next = counts.len();
                        counts.entry(p.to_string()).or_insert((0, next)).0 += 1;
                    }
                }
            }
        }
        let mut ranked: Vec<(String, (usize, usize))> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
        let mut entries = Self::reserved();
        entries.extend(ranked.into_iter().map(|(t, _)| t).take(capacity.saturating_sub(3)));
        Self::from_entries(entries).expect("reserved entries lead")
    }

    /// Rebuilds a vocabulary from its entries in index order. The first three
    /// must be the reserved markers and entries must be distinct.
    pub fn from_entries(entries: Vec<String>) -> Option<Self> {
        if entries.len() < 3 || entries[..3] != Self::reserved()[..] {
            return None;
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.clone(), i).is_some() {
                return None;
            }
        }
        Some(Self { entries, index })
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, text: &str) -> usize {
        self.index.get(text).copied().unwrap_or(Self::UNK)
    }

    pub fn feature(&self, path: &RelationPath) -> RelationPathFeature {
        let text = path.to_string();
        let vocab_index = self.lookup(&text);
        RelationPathFeature { text, vocab_index }
    }

    /// Feature indices for every ordered node pair, row-major.
    pub fn pair_indices(&self, g: &LabeledGraph) -> Vec<usize> {
        all_pair_paths(g)
            .into_iter()
            .flatten()
            .map(|p| self.lookup(&p.to_string()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Node};

    fn diamond() -> LabeledGraph {
        // a -> b -> d and a -> c -> d: two shortest a..d paths.
        LabeledGraph::new(
            ["a", "b", "c", "d"].iter().map(|i| Node::new(*i, *i)).collect(),
            vec![
                Edge::new("a", "x", "c"),
                Edge::new("a", "y", "b"),
                Edge::new("b", "z", "d"),
                Edge::new("c", "w", "d"),
            ],
            "a",
        )
        .unwrap()
    }

    #[test]
    fn texts() {
        let g = diamond();
        assert_eq!(path_feature(&g, "a", "a").unwrap().to_string(), "SELF");
        assert_eq!(path_feature(&g, "a", "d").unwrap().to_string(), "x↓ w↓");
        assert_eq!(path_feature(&g, "d", "a").unwrap().to_string(), "w↑ x↑");
        assert_eq!(path_feature(&g, "b", "c").unwrap().to_string(), "y↑ x↓");
        assert!(path_feature(&g, "a", "q").is_err());
    }

    #[test]
    fn all_pairs_agree_with_single_queries() {
        let g = diamond();
        let all = all_pair_paths(&g);
        for (i, a) in g.nodes().iter().enumerate() {
            for (j, b) in g.nodes().iter().enumerate() {
                assert_eq!(all[i][j], path_feature(&g, &a.id, &b.id).unwrap());
            }
        }
    }

    #[test]
    fn vocabulary_reserves_and_ranks() {
        let g = diamond();
        let v = FeatureVocabulary::build([&g], 5);
        assert_eq!(v.len(), 5);
        assert_eq!(&v.entries()[..3], &["SELF", "NOPATH", "<unk-path>"]);
        assert_eq!(v.lookup("SELF"), 0);
        assert_eq!(v.lookup("never seen"), FeatureVocabulary::UNK);
        let disconnected = LabeledGraph::new(vec![Node::new("a", "a"), Node::new("b", "b")], vec![], "a").unwrap();
        assert_eq!(v.pair_indices(&disconnected), vec![0, 1, 1, 0]);
        assert!(FeatureVocabulary::from_entries(vec!["x".into()]).is_none());
        assert_eq!(FeatureVocabulary::from_entries(v.entries().to_vec()).unwrap(), v);
    }
}
