use std::collections::HashMap;

use mvae_core::random::{random_graph, random_rooted_graph};
use mvae_core::views::{
    all_pair_paths, extract_spo, ground_triples, linearize, path_feature, reparse_linearized, ChildOrder,
    LinearizedGraph,
};
use mvae_core::{is_isomorphic, parse_penman, simplify, to_penman, Alignment, Edge, LabeledGraph, Node};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every simple undirected path from `from` to `to`, as edge indices.
fn simple_paths(g: &LabeledGraph, from: usize, to: usize) -> Vec<Vec<usize>> {
    fn go(g: &LabeledGraph, u: usize, to: usize, seen: &mut Vec<bool>, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if u == to {
            out.push(path.clone());
            return;
        }
        for k in 0..g.edge_count() {
            let (s, t) = g.ends(k);
            let w = if s == u {
                t
            } else if t == u {
                s
            } else {
                continue;
            };
            if !seen[w] {
                seen[w] = true;
                path.push(k);
                go(g, w, to, seen, path, out);
                path.pop();
                seen[w] = false;
            }
        }
    }
    let mut seen = vec![false; g.node_count()];
    seen[from] = true;
    let mut out = Vec::new();
    go(g, from, to, &mut seen, &mut Vec::new(), &mut out);
    out
}

fn render(g: &LabeledGraph, start: usize, edges: &[usize]) -> String {
    let mut u = start;
    let mut hops = Vec::new();
    for &k in edges {
        let (s, t) = g.ends(k);
        let label = &g.edges()[k].label;
        if s == u {
            hops.push(format!("{label}↓"));
            u = t;
        } else {
            hops.push(format!("{label}↑"));
            u = s;
        }
    }
    hops.join(" ")
}

/// Expected path text by exhaustive enumeration: shortest paths, smallest
/// edge-index sequence read from the lower-indexed end.
fn oracle_path(g: &LabeledGraph, src: usize, dst: usize) -> String {
    if src == dst {
        return "SELF".into();
    }
    let (lo, hi) = (src.min(dst), src.max(dst));
    let paths = simple_paths(g, lo, hi);
    let Some(min_len) = paths.iter().map(Vec::len).min() else {
        return "NOPATH".into();
    };
    let best = paths.into_iter().filter(|p| p.len() == min_len).min().unwrap();
    if src == lo {
        render(g, lo, &best)
    } else {
        let rev: Vec<usize> = best.into_iter().rev().collect();
        render(g, hi, &rev)
    }
}

#[test]
fn path_features_match_exhaustive_enumeration() {
    for seed in 0..100 {
        let g = random_graph(&mut rng(seed), 10, 0.12);
        let all = all_pair_paths(&g);
        for i in 0..g.node_count() {
            for j in 0..g.node_count() {
                let want = oracle_path(&g, i, j);
                let got = path_feature(&g, &g.node(i).id, &g.node(j).id).unwrap();
                assert_eq!(got.to_string(), want, "seed {seed} pair {i},{j}");
                assert_eq!(all[i][j], got);
                assert_eq!(all[j][i], got.reversed());
            }
        }
    }
}

/// Brute-force isomorphism over all node permutations.
fn brute_isomorphic(a: &LabeledGraph, b: &LabeledGraph) -> bool {
    let n = a.node_count();
    if n != b.node_count() || a.edge_count() != b.edge_count() {
        return false;
    }
    let edges = |g: &LabeledGraph, map: &[usize]| {
        let mut e: Vec<(usize, String, usize)> = (0..g.edge_count())
            .map(|k| {
                let (s, t) = g.ends(k);
                (map[s], g.edges()[k].label.clone(), map[t])
            })
            .collect();
        e.sort();
        e
    };
    let identity: Vec<usize> = (0..n).collect();
    let eb = edges(b, &identity);
    let mut perm = identity.clone();
    loop {
        let labels_ok = (0..n).all(|i| a.label(i) == b.label(perm[i]));
        if labels_ok && perm[a.root_index()] == b.root_index() && edges(a, &perm) == eb {
            return true;
        }
        // Next lexicographic permutation.
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else {
            return false;
        };
        let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
}

fn relabel_ids(g: &LabeledGraph, r: &mut impl Rng) -> LabeledGraph {
    let mut ids: Vec<usize> = (0..g.node_count()).collect();
    ids.shuffle(r);
    let name: HashMap<&str, String> = g
        .nodes()
        .iter()
        .zip(&ids)
        .map(|(n, k)| (n.id.as_str(), format!("x{k}")))
        .collect();
    let mut nodes: Vec<Node> = g
        .nodes()
        .iter()
        .map(|n| Node {
            id: name[n.id.as_str()].clone(),
            ..n.clone()
        })
        .collect();
    nodes.shuffle(r);
    let mut edges: Vec<Edge> = g
        .edges()
        .iter()
        .map(|e| Edge::new(name[e.source.as_str()].clone(), e.label.clone(), name[e.target.as_str()].clone()))
        .collect();
    edges.shuffle(r);
    LabeledGraph::new(nodes, edges, &name[g.root()]).unwrap()
}

proptest! {
    #[test]
    fn isomorphism_agrees_with_brute_force(s1 in 0u64..10_000, s2 in 0u64..10_000) {
        let a = random_graph(&mut rng(s1), 6, 0.25);
        let b = random_graph(&mut rng(s2), 6, 0.25);
        prop_assert_eq!(is_isomorphic(&a, &b), brute_isomorphic(&a, &b));
        let c = relabel_ids(&a, &mut rng(s2));
        prop_assert!(is_isomorphic(&a, &c));
        prop_assert!(brute_isomorphic(&a, &c));
    }

    #[test]
    fn linearization_round_trips(seed in any::<u64>(), order_seed in any::<u64>(), labels in any::<bool>()) {
        let g = random_rooted_graph(&mut rng(seed), 12, 0.2);
        for order in [ChildOrder::Input, ChildOrder::Random(order_seed)] {
            let lin = linearize(&g, order, true).unwrap();
            prop_assert!(is_isomorphic(&reparse_linearized(&lin).unwrap(), &g));
            let text = linearize(&g, order, labels).unwrap();
            prop_assert_eq!(LinearizedGraph::from_text(&text.to_text(), labels).unwrap(), text);
        }
    }

    #[test]
    fn linearization_is_seed_deterministic(seed in any::<u64>(), order_seed in any::<u64>()) {
        let g = random_rooted_graph(&mut rng(seed), 12, 0.2);
        let a = linearize(&g, ChildOrder::Random(order_seed), true).unwrap();
        let b = linearize(&g, ChildOrder::Random(order_seed), true).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn penman_writer_round_trips(seed in any::<u64>()) {
        let g = random_rooted_graph(&mut rng(seed), 12, 0.2);
        let text = to_penman(&g).unwrap();
        let back = parse_penman(&text).unwrap();
        prop_assert!(is_isomorphic(&g, &back), "{}", text);
    }

    #[test]
    fn simplify_is_idempotent(seed in any::<u64>()) {
        let g = random_rooted_graph(&mut rng(seed), 12, 0.2);
        let g = g.map_labels(|n| format!("{}-0{}", n.label, n.id.len() % 10));
        let once = simplify(&g, true);
        prop_assert_eq!(simplify(&once, true), once);
    }

    #[test]
    fn grounded_arc_count(seed in any::<u64>(), len in 8usize..30) {
        let mut r = rng(seed);
        let g = random_rooted_graph(&mut r, 8, 0.0);
        // Disjoint token spans so that no two nodes share a first token.
        let mut a = Alignment::new();
        let mut next = 0;
        let mut sizes = HashMap::new();
        for n in g.nodes() {
            let size = r.gen_range(0..3usize);
            if size > 0 && next + size <= len {
                a.insert(n.id.clone(), (next..next + size).collect()).unwrap();
                sizes.insert(n.id.clone(), size);
                next += size;
            }
        }
        let arcs = ground_triples(&g, &a, len, true).unwrap();
        let alignable = g.edges().iter().filter(|e| sizes.contains_key(&e.source) && sizes.contains_key(&e.target)).count();
        let compound: usize = sizes.values().map(|s| s - 1).sum();
        prop_assert_eq!(arcs.len(), alignable + compound);
        prop_assert_eq!(arcs.skipped_unaligned, g.edge_count() - alignable);
    }

    #[test]
    fn spo_ignores_node_ids(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_rooted_graph(&mut r, 10, 0.2);
        let ids: Vec<Node> = g.nodes().iter().map(|n| Node { id: format!("renamed-{}", n.id), ..n.clone() }).collect();
        let edges: Vec<Edge> = g.edges().iter().map(|e| Edge::new(format!("renamed-{}", e.source), e.label.clone(), format!("renamed-{}", e.target))).collect();
        let h = LabeledGraph::new(ids, edges, &format!("renamed-{}", g.root())).unwrap();
        prop_assert_eq!(extract_spo(&g), extract_spo(&h));
    }
}
