//! Autoregressive sentence generation. Only the encoder and the sentence
//! decoder are used.

use mvae_nn::{ParamStore, Real, Tensor};

use crate::error::Result;
use crate::layers::{Dropout, Session};
use crate::model::Model;
use crate::vocab::{BOS, EOS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    Greedy,
    Beam(usize),
}

/// Generated tokens, without boundary symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generated {
    pub tokens: Vec<usize>,
    /// No end symbol was produced within the length limit.
    pub truncated: bool,
}

/// Top-layer encoder states with dropout off.
pub fn encode_memory<F: Real>(
    model: &Model,
    store: &ParamStore<F>,
    nodes: &[usize],
    features: &[usize],
) -> Result<Tensor<F>> {
    let mut s = Session::new(store);
    let h = model.encode(&mut s, nodes, features, &mut Dropout::off(), None)?;
    Ok(s.value(h).clone())
}

/// Log-probabilities of the token after `prefix` (which starts with the
/// begin symbol). The begin symbol itself is never proposed.
pub fn next_log_probs<F: Real>(
    model: &Model,
    store: &ParamStore<F>,
    memory: &Tensor<F>,
    prefix: &[usize],
) -> Result<Vec<f64>> {
    let mut s = Session::new(store);
    let m = s.tape.constant(memory.clone())?;
    let out = model.decode_sentence(&mut s, m, prefix, &mut Dropout::off())?;
    let logits = s.value(out.logits);
    let row: Vec<f64> = logits.row(logits.rows() - 1).iter().map(|x| x.to_f64_lossy()).collect();
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    let mut lp: Vec<f64> = row.iter().map(|x| x - lse).collect();
    lp[BOS] = f64::NEG_INFINITY;
    Ok(lp)
}

pub fn generate<F: Real>(
    model: &Model,
    store: &ParamStore<F>,
    memory: &Tensor<F>,
    mode: SearchMode,
    max_len: usize,
) -> Result<Generated> {
    match mode {
        SearchMode::Greedy => greedy(model, store, memory, max_len),
        SearchMode::Beam(width) => beam(model, store, memory, width.max(1), max_len),
    }
}

fn greedy<F: Real>(model: &Model, store: &ParamStore<F>, memory: &Tensor<F>, max_len: usize) -> Result<Generated> {
    let mut prefix = vec![BOS];
    while prefix.len() <= max_len {
        let lp = next_log_probs(model, store, memory, &prefix)?;
        let mut best = 0;
        for (i, &v) in lp.iter().enumerate() {
            if v > lp[best] {
                best = i;
            }
        }
        if best == EOS {
            prefix.remove(0);
            return Ok(Generated {
                tokens: prefix,
                truncated: false,
            });
        }
        prefix.push(best);
    }
    prefix.remove(0);
    Ok(Generated {
        tokens: prefix,
        truncated: true,
    })
}

/// Hypotheses are ranked by mean token log-probability, the end symbol
/// counted as a token. Ties keep hypothesis, then token, order.
fn beam<F: Real>(
    model: &Model,
    store: &ParamStore<F>,
    memory: &Tensor<F>,
    width: usize,
    max_len: usize,
) -> Result<Generated> {
    let mut live: Vec<(Vec<usize>, f64)> = vec![(vec![BOS], 0.0)];
    let mut finished: Vec<(Vec<usize>, f64)> = Vec::new();
    for step in 0..max_len {
        let keep = width - finished.len();
        if keep == 0 || live.is_empty() {
            break;
        }
        let mut cands = Vec::new();
        for (h, (prefix, sum)) in live.iter().enumerate() {
            let lp = next_log_probs(model, store, memory, prefix)?;
            for (t, &v) in lp.iter().enumerate() {
                if v.is_finite() {
                    let total = sum + v;
                    cands.push((h, t, total, total / (step + 1) as f64));
                }
            }
        }
        cands.sort_by(|a, b| b.3.total_cmp(&a.3).then(b.2.total_cmp(&a.2)));
        let mut next = Vec::with_capacity(keep);
        for (h, t, total, score) in cands.into_iter().take(keep) {
            let mut tokens = live[h].0.clone();
            if t == EOS {
                tokens.remove(0);
                finished.push((tokens, score));
            } else {
                tokens.push(t);
                next.push((tokens, total));
            }
        }
        live = next;
    }
    let best = finished
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)));
    if let Some((_, (tokens, _))) = best {
        return Ok(Generated {
            tokens: tokens.clone(),
            truncated: false,
        });
    }
    let mut tokens = live.into_iter().next().map(|h| h.0).unwrap_or_default();
    if !tokens.is_empty() {
        tokens.remove(0);
    }
    Ok(Generated { tokens, truncated: true })
}
