//! Small template corpus of AMR-like graphs with exact alignments, used to
//! check that the model can memorize its training data.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{AlignedExample, Record, Task, ViewOptions, Vocabularies};
use crate::error::Result;
use crate::train::Corpus;

const ENTITIES: [&str; 9] = [
    "boy",
    "girl",
    "dog",
    "cat",
    "teacher",
    "doctor",
    "bird",
    "king",
    "police officer",
];
const PREDICATES: [(&str, &str); 6] = [
    ("see-01", "sees"),
    ("like-01", "likes"),
    ("help-01", "helps"),
    ("chase-01", "chases"),
    ("find-01", "finds"),
    ("call-01", "calls"),
];
/// Control verbs: `X <verb> Y to <predicate> Z`.
const CONTROL: [(&str, &str); 3] = [("want-01", "wants"), ("ask-02", "asks"), ("tell-01", "tells")];
const ADJECTIVES: [&str; 4] = ["big", "small", "happy", "old"];

struct Builder<'r> {
    rng: &'r mut ChaCha8Rng,
    sentence: Vec<String>,
    align: BTreeMap<String, Vec<usize>>,
}

impl Builder<'_> {
    fn word(&mut self, w: &str) -> usize {
        self.sentence.push(w.to_string());
        self.sentence.len() - 1
    }

    /// `the [adj] noun`, returning the PENMAN fragment.
    fn phrase(&mut self, var: &str, noun: &str, adj_rate: f64) -> String {
        self.word("the");
        let adj = self
            .rng
            .gen_bool(adj_rate)
            .then(|| ADJECTIVES[self.rng.gen_range(0..ADJECTIVES.len())]);
        if let Some(a) = adj {
            let at = self.word(a);
            self.align.insert(format!("{var}m"), vec![at]);
        }
        let at: Vec<usize> = noun.split(' ').map(|w| self.word(w)).collect();
        self.align.insert(var.to_string(), at);
        let concept = noun.replace(' ', "-");
        match adj {
            Some(a) => format!("({var} / {concept} :mod ({var}m / {a}))"),
            None => format!("({var} / {concept})"),
        }
    }

    fn verb(&mut self, var: &str, form: &str) {
        let at = self.word(form);
        self.align.insert(var.to_string(), vec![at]);
    }
}

/// `count` records with distinct sentences, each with at most 9 nodes and
/// 12 tokens. Every node is aligned and no node has two parents.
pub fn synthetic_records(count: usize, seed: u64) -> Vec<Record> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut ents = ENTITIES.to_vec();
        ents.shuffle(&mut rng);
        let (pred, form) = PREDICATES[rng.gen_range(0..PREDICATES.len())];
        let control = rng.gen_bool(0.5).then(|| CONTROL[rng.gen_range(0..CONTROL.len())]);
        let mut b = Builder {
            rng: &mut rng,
            sentence: Vec::new(),
            align: BTreeMap::new(),
        };
        let graph = match control {
            None => {
                let a = b.phrase("a", ents[0], 0.5);
                b.verb("p", form);
                let o = b.phrase("b", ents[1], 0.3);
                format!("(p / {pred} :ARG0 {a} :ARG1 {o})")
            }
            Some((cpred, cform)) => {
                let a = b.phrase("a", ents[0], 0.3);
                b.verb("c", cform);
                let o = b.phrase("b", ents[1], 0.0);
                b.word("to");
                b.verb("p", pred.split('-').next().unwrap_or(pred));
                let t = b.phrase("d", ents[2], 0.3);
                format!("(c / {cpred} :ARG0 {a} :ARG1 (p / {pred} :ARG0 {o} :ARG1 {t}))")
            }
        };
        let Builder { sentence, align, .. } = b;
        if sentence.len() > 12 || !seen.insert(sentence.join(" ")) {
            continue;
        }
        out.push(Record {
            id: format!("syn{}", out.len()),
            graph: Some(graph),
            triples: None,
            sentence,
            alignments: Some(align),
        });
    }
    out
}

/// Preprocessed synthetic corpus; every token is kept in the vocabularies.
pub fn synthetic_corpus(count: usize, seed: u64) -> Result<Corpus> {
    let views = ViewOptions {
        task: Task::Amr,
        edge_labels: true,
    };
    let examples = synthetic_records(count, seed)
        .iter()
        .map(|r| AlignedExample::from_record(r, views))
        .collect::<Result<Vec<_>>>()?;
    let vocabs = Vocabularies::build(&examples, 1000, 1, true);
    Corpus::new(examples, vocabs, views)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_are_distinct_and_small() {
        let c = synthetic_corpus(20, 3).unwrap();
        assert_eq!(c.examples.len(), 20);
        for (ex, inst) in c.examples.iter().zip(&c.instances) {
            assert!(ex.graph.node_count() <= 10);
            assert!(ex.sentence.len() <= 12);
            assert!(ex.arcs.len() >= ex.graph.edge_count());
            assert!(inst.sentence.iter().all(|&t| t != crate::vocab::UNK));
        }
        assert_eq!(synthetic_records(5, 9), synthetic_records(5, 9));
    }
}
