//! Node-to-token alignments and the surface matcher for knowledge-graph
//! entities.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::AlignmentError;
use crate::graph::LabeledGraph;

/// Node id to the ordered, distinct sentence-token indices it covers.
/// Nodes without an entry are unaligned.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Alignment {
    entries: BTreeMap<String, Vec<usize>>,
}

impl Alignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an entry, sorting the indices. Fails on repeated indices or an
    /// empty list.
    pub fn insert(&mut self, node: impl Into<String>, mut tokens: Vec<usize>) -> Result<(), AlignmentError> {
        tokens.sort_unstable();
        if tokens.is_empty() {
            return Err(AlignmentError::Malformed { line: 0 });
        }
        if let Some(w) = tokens.windows(2).find(|w| w[0] == w[1]) {
            return Err(AlignmentError::RepeatedIndex { line: 0, index: w[0] });
        }
        let node = node.into();
        if self.entries.contains_key(&node) {
            return Err(AlignmentError::DuplicateNode { line: 0, id: node });
        }
        self.entries.insert(node, tokens);
        Ok(())
    }

    pub fn get(&self, node: &str) -> Option<&[usize]> {
        self.entries.get(node).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// One `node-id<TAB>i,j,...` line per entry.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| {
                let idx: Vec<String> = v.iter().map(usize::to_string).collect();
                format!("{k}\t{}\n", idx.join(","))
            })
            .collect()
    }
}

/// Reads `node-id<TAB>i,j,...` lines. Blank lines are skipped.
pub fn load_alignments(text: &str) -> Result<Alignment, AlignmentError> {
    let mut a = Alignment::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (id, rest) = line.split_once('\t').ok_or(AlignmentError::Malformed { line: line_no })?;
        let id = id.trim();
        if id.is_empty() || rest.trim().is_empty() {
            return Err(AlignmentError::Malformed { line: line_no });
        }
        let mut tokens = Vec::new();
        for part in rest.trim().split(',') {
            let part = part.trim();
            let idx: usize = part.parse().map_err(|_| AlignmentError::BadIndex {
                line: line_no,
                text: part.to_string(),
            })?;
            tokens.push(idx);
        }
        a.insert(id, tokens).map_err(|e| match e {
            AlignmentError::RepeatedIndex { index, .. } => AlignmentError::RepeatedIndex { line: line_no, index },
            AlignmentError::DuplicateNode { id, .. } => AlignmentError::DuplicateNode { line: line_no, id },
            _ => AlignmentError::Malformed { line: line_no },
        })?;
    }
    Ok(a)
}

/// Lower-cased words of an entity label: a trailing parenthesized
/// abbreviation is dropped and underscores split words.
pub fn entity_words(label: &str) -> Vec<String> {
    let split = |s: &str| -> Vec<String> {
        s.split(|c: char| c == '_' || c.is_whitespace())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect()
    };
    let trimmed = label.trim_end();
    if trimmed.ends_with(')') {
        if let Some(open) = trimmed.rfind('(') {
            let words = split(&trimmed[..open]);
            if !words.is_empty() {
                return words;
            }
        }
    }
    split(label)
}

fn find_span(sentence: &[String], words: &[String]) -> Option<usize> {
    if words.is_empty() || words.len() > sentence.len() {
        return None;
    }
    (0..=sentence.len() - words.len()).find(|&p| sentence[p..p + words.len()].iter().zip(words).all(|(s, w)| s == w))
}

/// Matches each node against the longest prefix of its label words found as
/// a contiguous span of `sentence` (case-insensitive), taking the earliest
/// occurrence. Unmatched nodes stay unaligned. Also returns the matched
/// share of nodes.
pub fn match_kg_nodes(g: &LabeledGraph, sentence: &[String]) -> (Alignment, f64) {
    let lowered: Vec<String> = sentence.iter().map(|t| t.to_lowercase()).collect();
    let mut a = Alignment::new();
    for node in g.nodes() {
        let words = entity_words(&node.label);
        for k in (1..=words.len()).rev() {
            if let Some(p) = find_span(&lowered, &words[..k]) {
                a.insert(node.id.clone(), (p..p + k).collect()).expect("fresh distinct span");
                break;
            }
        }
    }
    let (m, t) = node_coverage(g, &a);
    (a, m as f64 / t as f64)
}

/// Share of nodes of `g` with at least one aligned token.
pub fn node_coverage(g: &LabeledGraph, a: &Alignment) -> (usize, usize) {
    let matched = g.nodes().iter().filter(|n| a.get(&n.id).is_some()).count();
    (matched, g.node_count())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub examples: usize,
    /// Mean over examples of the per-example matched fraction.
    pub mean_coverage: f64,
    /// Matched nodes over all nodes in the corpus.
    pub pooled_coverage: f64,
    /// Per-example fractions in ten equal bins over `[0, 1]`; a fraction of
    /// exactly 1 falls in the last bin.
    pub histogram: [usize; 10],
    pub per_example: Vec<f64>,
}

impl fmt::Display for CoverageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "examples\t{}", self.examples)?;
        writeln!(f, "mean_coverage\t{:.6}", self.mean_coverage)?;
        writeln!(f, "pooled_coverage\t{:.6}", self.pooled_coverage)?;
        for (i, c) in self.histogram.iter().enumerate() {
            writeln!(f, "bin_{:.1}_{:.1}\t{c}", i as f64 / 10.0, (i + 1) as f64 / 10.0)?;
        }
        Ok(())
    }
}

/// Coverage statistics of [`match_kg_nodes`] over a corpus of graphs and
/// tokenized sentences.
pub fn coverage_report<'a, I>(corpus: I) -> Result<CoverageReport, AlignmentError>
where
    I: IntoIterator<Item = (&'a LabeledGraph, &'a [String])>,
{
    let mut per_example = Vec::new();
    let (mut matched, mut total) = (0usize, 0usize);
    for (g, sentence) in corpus {
        let (a, _) = match_kg_nodes(g, sentence);
        let (m, t) = node_coverage(g, &a);
        matched += m;
        total += t;
        per_example.push(m as f64 / t as f64);
    }
    if per_example.is_empty() {
        return Err(AlignmentError::NoExamples);
    }
    let mut histogram = [0usize; 10];
    for &c in &per_example {
        histogram[((c * 10.0).floor() as usize).min(9)] += 1;
    }
    Ok(CoverageReport {
        examples: per_example.len(),
        mean_coverage: per_example.iter().sum::<f64>() / per_example.len() as f64,
        pooled_coverage: matched as f64 / total as f64,
        histogram,
        per_example,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triples::parse_triples;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn load_and_write_round_trip() {
        let a = load_alignments("b\t3\nw\t1,0\n\n").unwrap();
        assert_eq!(a.get("w"), Some(&[0, 1][..]));
        assert_eq!(load_alignments(&a.to_text()).unwrap(), a);
    }

    #[test]
    fn load_errors_carry_lines() {
        assert_eq!(load_alignments("a 1"), Err(AlignmentError::Malformed { line: 1 }));
        assert_eq!(load_alignments("a\t"), Err(AlignmentError::Malformed { line: 1 }));
        assert!(matches!(load_alignments("a\tx"), Err(AlignmentError::BadIndex { line: 1, .. })));
        assert_eq!(load_alignments("a\t1,1"), Err(AlignmentError::RepeatedIndex { line: 1, index: 1 }));
        assert!(matches!(
            load_alignments("a\t1\n\na\t2"),
            Err(AlignmentError::DuplicateNode { line: 3, .. })
        ));
    }

    #[test]
    fn entity_word_rules() {
        assert_eq!(entity_words("New_York_(NY)"), ["new", "york"]);
        assert_eq!(entity_words("(NY)"), ["(ny)"]);
        assert_eq!(entity_words("Alan Bean"), ["alan", "bean"]);
    }

    #[test]
    fn longest_prefix_earliest_position() {
        let g = parse_triples("New_York_City | country | United_States\n").unwrap();
        let s = words("New York is in the United States , New York City too");
        let (a, _) = match_kg_nodes(&g, &s);
        assert_eq!(a.get("New_York_City"), Some(&[8, 9, 10][..]));
        assert_eq!(a.get("United_States"), Some(&[5, 6][..]));
        let s = words("new york and the united nations");
        let (a, _) = match_kg_nodes(&g, &s);
        assert_eq!(a.get("New_York_City"), Some(&[0, 1][..]));
        assert_eq!(a.get("United_States"), Some(&[4][..]));
    }

    #[test]
    fn coverage_arithmetic() {
        let g1 = parse_triples("A | r | B\nA | r | C\nA | r | D\n").unwrap();
        let g2 = parse_triples("E | r | F\n").unwrap();
        let s1 = words("A and B");
        let s2 = words("E F");
        let r = coverage_report([(&g1, s1.as_slice()), (&g2, s2.as_slice())]).unwrap();
        assert_eq!(r.per_example, vec![0.5, 1.0]);
        assert_eq!(r.mean_coverage, 0.75);
        assert_eq!(r.pooled_coverage, 4.0 / 6.0);
        assert_eq!(r.histogram[5], 1);
        assert_eq!(r.histogram[9], 1);
        let empty: Vec<(&LabeledGraph, &[String])> = vec![];
        assert_eq!(coverage_report(empty), Err(AlignmentError::NoExamples));
    }
}
