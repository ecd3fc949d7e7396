//! Automatic proxy for relation preservation: an interaction counts as
//! kept when its subject, predicate and object words all occur in the
//! hypothesis and some subject occurrence precedes some object occurrence.

use mvae_core::views::{extract_spo, Interaction};
use mvae_core::LabeledGraph;
use serde::Serialize;

use crate::error::{ModelError, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExampleRecall {
    pub interactions: usize,
    pub preserved: usize,
}

impl ExampleRecall {
    /// `None` when the graph has no interactions.
    pub fn recall(&self) -> Option<f64> {
        (self.interactions > 0).then(|| self.preserved as f64 / self.interactions as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecallReport {
    pub interactions: usize,
    pub preserved: usize,
    /// Examples without any interaction.
    pub skipped: usize,
    pub per_example: Vec<ExampleRecall>,
}

impl RecallReport {
    /// Pooled recall; `None` when no example has an interaction.
    pub fn recall(&self) -> Option<f64> {
        (self.interactions > 0).then(|| self.preserved as f64 / self.interactions as f64)
    }
}

fn positions(tokens: &[String], word: &str) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| *t == word)
        .map(|(i, _)| i)
        .collect()
}

/// Whether `hyp` preserves `it`. Matching is case-insensitive.
pub fn preserved(it: &Interaction, hyp: &[String]) -> bool {
    let lower: Vec<String> = hyp.iter().map(|t| t.to_lowercase()).collect();
    let subj = positions(&lower, &it.subject.to_lowercase());
    let obj = positions(&lower, &it.object.to_lowercase());
    let pred = positions(&lower, &it.predicate.to_lowercase());
    match (subj.first(), obj.last()) {
        (Some(s), Some(o)) => !pred.is_empty() && s < o,
        _ => false,
    }
}

pub fn relation_recall(graphs: &[&LabeledGraph], hypotheses: &[Vec<String>]) -> Result<RecallReport> {
    if graphs.len() != hypotheses.len() {
        return Err(ModelError::CountMismatch {
            refs: graphs.len(),
            hyps: hypotheses.len(),
        });
    }
    let mut report = RecallReport {
        interactions: 0,
        preserved: 0,
        skipped: 0,
        per_example: Vec::with_capacity(graphs.len()),
    };
    for (g, hyp) in graphs.iter().zip(hypotheses) {
        let spo = extract_spo(g);
        let kept = spo.iter().filter(|it| preserved(it, hyp)).count();
        if spo.is_empty() {
            report.skipped += 1;
        }
        report.interactions += spo.len();
        report.preserved += kept;
        report.per_example.push(ExampleRecall {
            interactions: spo.len(),
            preserved: kept,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn it(s: &str, p: &str, o: &str) -> Interaction {
        Interaction {
            subject: s.into(),
            predicate: p.into(),
            object: o.into(),
        }
    }

    #[test]
    fn order_and_presence() {
        let x = it("boy", "want", "eat");
        assert!(preserved(&x, &words("the Boy wants to eat , want")));
        assert!(!preserved(&x, &words("eat the boy want")));
        assert!(!preserved(&x, &words("the boy will eat")));
    }

    #[test]
    fn count_mismatch() {
        assert!(relation_recall(&[], &[words("a")]).is_err());
    }
}
