//! Corpus-level BLEU with one reference per hypothesis, following the
//! Moses `multi-bleu.perl` conventions: whitespace tokens, case-sensitive,
//! clipped n-gram counts pooled over the corpus for n = 1..4, geometric
//! mean of the precisions, brevity penalty on the pooled lengths.

use std::collections::HashMap;
use std::fmt;

use crate::error::{ModelError, Result};

pub const MAX_ORDER: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct BleuScore {
    /// Score in percent.
    pub bleu: f64,
    /// Modified precisions for n = 1..4, in percent.
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl fmt::Display for BleuScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.precisions;
        let ratio = if self.ref_len == 0 {
            0.0
        } else {
            self.hyp_len as f64 / self.ref_len as f64
        };
        write!(
            f,
            "BLEU = {:.2}, {:.1}/{:.1}/{:.1}/{:.1} (BP={:.3}, ratio={:.3}, hyp_len={}, ref_len={})",
            self.bleu, p[0], p[1], p[2], p[3], self.brevity_penalty, ratio, self.hyp_len, self.ref_len
        )
    }
}

fn ngrams<'b, 'a>(tokens: &'b [&'a str], n: usize) -> HashMap<&'b [&'a str], usize> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

/// BLEU of tokenized `hypotheses` against `references`.
pub fn corpus_bleu<S: AsRef<str>>(references: &[Vec<S>], hypotheses: &[Vec<S>]) -> Result<BleuScore> {
    if references.len() != hypotheses.len() {
        return Err(ModelError::CountMismatch {
            refs: references.len(),
            hyps: hypotheses.len(),
        });
    }
    let mut matched = [0usize; MAX_ORDER];
    let mut total = [0usize; MAX_ORDER];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (r, h) in references.iter().zip(hypotheses) {
        let r: Vec<&str> = r.iter().map(AsRef::as_ref).collect();
        let h: Vec<&str> = h.iter().map(AsRef::as_ref).collect();
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=MAX_ORDER {
            let rc = ngrams(&r, n);
            for (g, c) in ngrams(&h, n) {
                matched[n - 1] += c.min(rc.get(g).copied().unwrap_or(0));
                total[n - 1] += c;
            }
        }
    }
    let mut precisions = [0.0; MAX_ORDER];
    for n in 0..MAX_ORDER {
        if total[n] > 0 {
            precisions[n] = 100.0 * matched[n] as f64 / total[n] as f64;
        }
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    let bleu = if matched.iter().any(|&m| m == 0) {
        0.0
    } else {
        let log_mean: f64 = (0..MAX_ORDER)
            .map(|n| (matched[n] as f64 / total[n] as f64).ln())
            .sum::<f64>()
            / MAX_ORDER as f64;
        100.0 * brevity_penalty * log_mean.exp()
    };
    Ok(BleuScore {
        bleu,
        precisions,
        brevity_penalty,
        hyp_len,
        ref_len,
    })
}

/// Whitespace tokenization of one line per sentence.
pub fn tokenize_lines(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect()
}
