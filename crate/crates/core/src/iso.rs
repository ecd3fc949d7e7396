//! Exact label-preserving isomorphism for small rooted graphs.

use std::collections::HashMap;

use crate::graph::LabeledGraph;

type PairLabels = HashMap<(usize, usize), Vec<String>>;

fn pair_labels(g: &LabeledGraph) -> PairLabels {
    let mut m: PairLabels = HashMap::new();
    for (k, e) in g.edges().iter().enumerate() {
        m.entry(g.ends(k)).or_default().push(e.label.clone());
    }
    for v in m.values_mut() {
        v.sort();
    }
    m
}

fn signature(g: &LabeledGraph, i: usize) -> (String, usize, usize) {
    (g.label(i).to_string(), g.outgoing(i).len(), g.in_degree(i))
}

/// True when a bijection between the node sets maps root to root, preserves
/// node labels, and maps the multiset of labeled edges of `a` onto that of
/// `b`. Node ids and node kinds are ignored.
pub fn is_isomorphic(a: &LabeledGraph, b: &LabeledGraph) -> bool {
    let n = a.node_count();
    if n != b.node_count() || a.edge_count() != b.edge_count() {
        return false;
    }
    if a.label(a.root_index()) != b.label(b.root_index()) {
        return false;
    }
    let mut sa: Vec<_> = (0..n).map(|i| signature(a, i)).collect();
    let mut sb: Vec<_> = (0..n).map(|i| signature(b, i)).collect();
    let (ea, eb) = (pair_labels(a), pair_labels(b));
    let mut la: Vec<_> = a.edges().iter().map(|e| &e.label).collect();
    let mut lb: Vec<_> = b.edges().iter().map(|e| &e.label).collect();
    la.sort();
    lb.sort();
    if la != lb {
        return false;
    }
    let sigs_a = sa.clone();
    let sigs_b = sb.clone();
    sa.sort();
    sb.sort();
    if sa != sb {
        return false;
    }

    // Map nodes in traversal order so each new node is usually adjacent to a
    // mapped one, which prunes early.
    let order = a.traversal_order();
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    map[a.root_index()] = b.root_index();
    used[b.root_index()] = true;
    let order: Vec<usize> = order.into_iter().filter(|&v| v != a.root_index()).collect();
    if sigs_a[a.root_index()] != sigs_b[b.root_index()] {
        return false;
    }
    let ctx = Ctx {
        a,
        b,
        ea: &ea,
        eb: &eb,
        sigs_a: &sigs_a,
        sigs_b: &sigs_b,
    };
    if !ctx.consistent(a.root_index(), &map) {
        return false;
    }
    ctx.extend(&order, 0, &mut map, &mut used)
}

struct Ctx<'a> {
    a: &'a LabeledGraph,
    b: &'a LabeledGraph,
    ea: &'a PairLabels,
    eb: &'a PairLabels,
    sigs_a: &'a [(String, usize, usize)],
    sigs_b: &'a [(String, usize, usize)],
}

impl Ctx<'_> {
    /// Edges between `v` and every mapped node agree in both directions.
    fn consistent(&self, v: usize, map: &[usize]) -> bool {
        let fv = map[v];
        let empty = Vec::new();
        for &k in self.a.incident(v) {
            let (s, t) = self.a.ends(k);
            let (fs, ft) = (map[s], map[t]);
            if fs == usize::MAX || ft == usize::MAX {
                continue;
            }
            let la = self.ea.get(&(s, t)).unwrap_or(&empty);
            let lb = self.eb.get(&(fs, ft)).unwrap_or(&empty);
            if la != lb {
                return false;
            }
        }
        // Edges in `b` at the image with a mapped partner must have a
        // preimage; counting them keeps the check symmetric.
        let mapped_a = self
            .a
            .incident(v)
            .iter()
            .filter(|&&k| {
                let (s, t) = self.a.ends(k);
                map[s] != usize::MAX && map[t] != usize::MAX
            })
            .count();
        let inverse_mapped = |x: usize| map.contains(&x);
        let mapped_b = self
            .b
            .incident(fv)
            .iter()
            .filter(|&&k| {
                let (s, t) = self.b.ends(k);
                inverse_mapped(s) && inverse_mapped(t)
            })
            .count();
        mapped_a == mapped_b
    }

    fn extend(&self, order: &[usize], depth: usize, map: &mut [usize], used: &mut [bool]) -> bool {
        let Some(&v) = order.get(depth) else {
            return true;
        };
        for w in 0..self.b.node_count() {
            if used[w] || self.sigs_a[v] != self.sigs_b[w] {
                continue;
            }
            map[v] = w;
            used[w] = true;
            if self.consistent(v, map) && self.extend(order, depth + 1, map, used) {
                return true;
            }
            map[v] = usize::MAX;
            used[w] = false;
        }
        false
    }
}
