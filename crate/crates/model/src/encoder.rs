//! Graph encoder with relation-aware self-attention.
//!
//! Every ordered node pair `(i, j)` carries a relation-path feature. Its
//! embedding `γ_ij` enters both the attention logits and the mixed values:
//!
//! ```text
//! e_ij = (h_i Wq)(h_j Wk + γ_ij Wr2)ᵀ / sqrt(d_head)
//! h_i' = Σ_j softmax(e_i)_j (h_j Wp + γ_ij Wr1)
//! ```
//!
//! followed by an output projection, residual, layer norm and a
//! feed-forward sublayer with its own residual and layer norm.

use mvae_nn::{NodeId, ParamId, Real, Tensor};

use crate::config::ModelConfig;
use crate::error::{ModelError, Result};
use crate::layers::{embed, Dropout, FeedForward, Init, LayerNorm, Linear, ParamSource, Session};

#[derive(Clone, Debug)]
struct EncoderLayer {
    q: Linear,
    k: Linear,
    p: Linear,
    r1: Linear,
    r2: Linear,
    o: Linear,
    norm1: LayerNorm,
    ff: FeedForward,
    norm2: LayerNorm,
}

/// Values recorded from one encoder layer.
#[derive(Clone, Debug)]
pub struct EncoderLayerTrace<F> {
    /// Attention logits per head, `[n, n]`.
    pub e: Vec<Tensor<F>>,
    /// Attention weights per head, before dropout.
    pub a: Vec<Tensor<F>>,
    /// Layer output, `[n, d]`.
    pub h: Tensor<F>,
    /// Relation vectors `γ`, one row per ordered pair, `[n*n, d]`.
    pub gamma: Tensor<F>,
}

#[derive(Clone, Debug)]
pub struct Encoder {
    nodes: ParamId,
    relations: ParamId,
    layers: Vec<EncoderLayer>,
    heads: usize,
    positions: bool,
}

impl Encoder {
    pub fn new<F: Real>(src: &mut impl ParamSource<F>, cfg: &ModelConfig) -> Result<Self> {
        let d = cfg.d_model;
        let nodes = src.get("enc.node_embed", &[cfg.node_vocab, d], Init::Embedding)?;
        let relations = src.get("enc.relation_embed", &[cfg.feature_vocab, d], Init::Embedding)?;
        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let n = format!("enc.{l}");
            layers.push(EncoderLayer {
                q: Linear::new(src, &format!("{n}.q"), d, d, false)?,
                k: Linear::new(src, &format!("{n}.k"), d, d, false)?,
                p: Linear::new(src, &format!("{n}.p"), d, d, false)?,
                r1: Linear::new(src, &format!("{n}.r1"), d, d, false)?,
                r2: Linear::new(src, &format!("{n}.r2"), d, d, false)?,
                o: Linear::new(src, &format!("{n}.o"), d, d, false)?,
                norm1: LayerNorm::new(src, &format!("{n}.norm1"), d)?,
                ff: FeedForward::new(src, &n, d, cfg.d_ff)?,
                norm2: LayerNorm::new(src, &format!("{n}.norm2"), d)?,
            });
        }
        Ok(Self {
            nodes,
            relations,
            layers,
            heads: cfg.heads,
            positions: cfg.encoder_positions,
        })
    }

    /// Encodes `tokens` given the row-major `features` matrix over all
    /// ordered pairs. Returns the top-layer states `[n, d]`.
    pub fn forward<F: Real>(
        &self,
        s: &mut Session<F>,
        tokens: &[usize],
        features: &[usize],
        drop: &mut Dropout,
        mut trace: Option<&mut Vec<EncoderLayerTrace<F>>>,
    ) -> Result<NodeId> {
        let n = tokens.len();
        if n == 0 || features.len() != n * n {
            return Err(ModelError::FeatureShape {
                nodes: n,
                expected: n * n,
                got: features.len(),
            });
        }
        let x = embed(s, self.nodes, tokens, self.positions)?;
        let mut h = drop.apply(s, x)?;
        let table = s.p(self.relations);
        let gamma = s.tape.embedding(table, features)?;
        for layer in &self.layers {
            let mut record = trace.as_ref().map(|_| (Vec::new(), Vec::new()));
            let q = layer.q.forward(s, h)?;
            let k = layer.k.forward(s, h)?;
            let p = layer.p.forward(s, h)?;
            let g1 = layer.r1.forward(s, gamma)?;
            let g2 = layer.r2.forward(s, gamma)?;
            let d = s.value(q).cols();
            let dh = d / self.heads;
            let scale = F::lit(1.0 / (dh as f64).sqrt());
            let mut outs = Vec::with_capacity(self.heads);
            for head in 0..self.heads {
                let (lo, hi) = (head * dh, (head + 1) * dh);
                let qh = s.tape.slice_cols(q, lo, hi)?;
                let kh = s.tape.slice_cols(k, lo, hi)?;
                let ph = s.tape.slice_cols(p, lo, hi)?;
                let g1h = s.tape.slice_cols(g1, lo, hi)?;
                let g2h = s.tape.slice_cols(g2, lo, hi)?;
                let rel = s.tape.pair_scores(qh, g2h)?;
                let rel = s.tape.scale(rel, scale)?;
                let plain = s.tape.scaled_dot(qh, kh, scale)?;
                let e = s.tape.add(plain, rel)?;
                let a = s.tape.softmax_rows(e)?;
                if let Some((es, as_)) = record.as_mut() {
                    es.push(s.value(e).clone());
                    as_.push(s.value(a).clone());
                }
                let a = drop.apply(s, a)?;
                let mixed_rel = s.tape.pair_mix(a, g1h)?;
                let mixed = s.tape.matmul(a, ph)?;
                outs.push(s.tape.add(mixed, mixed_rel)?);
            }
            let cat = if outs.len() == 1 { outs[0] } else { s.tape.concat_cols(&outs)? };
            let att = layer.o.forward(s, cat)?;
            let att = drop.apply(s, att)?;
            let r = s.tape.add(h, att)?;
            let r = layer.norm1.forward(s, r)?;
            let f = layer.ff.forward(s, r, drop)?;
            let f = drop.apply(s, f)?;
            let r2 = s.tape.add(r, f)?;
            h = layer.norm2.forward(s, r2)?;
            if let (Some(out), Some((e, a))) = (trace.as_deref_mut(), record) {
                out.push(EncoderLayerTrace {
                    e,
                    a,
                    h: s.value(h).clone(),
                    gamma: s.value(gamma).clone(),
                });
            }
        }
        Ok(h)
    }
}
