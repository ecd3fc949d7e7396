//! Standard Transformer decoder, used for both the sentence and the
//! linearized graph.

use mvae_nn::{NodeId, ParamId, Real};

use crate::error::{ModelError, Result};
use crate::layers::{embed, Attention, Dropout, FeedForward, Init, LayerNorm, Linear, ParamSource, Session};

#[derive(Clone, Debug)]
struct DecoderLayer {
    self_attn: Attention,
    norm1: LayerNorm,
    cross_attn: Attention,
    norm2: LayerNorm,
    ff: FeedForward,
    norm3: LayerNorm,
}

/// Shape of a decoder.
#[derive(Clone, Copy, Debug)]
pub struct DecoderShape {
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub vocab: usize,
    pub positions: bool,
}

#[derive(Clone, Debug)]
pub struct Decoder {
    embed: ParamId,
    layers: Vec<DecoderLayer>,
    out: Linear,
    positions: bool,
}

/// Top-layer states and next-token logits for one input sequence.
#[derive(Clone, Copy, Debug)]
pub struct DecoderOutput {
    pub states: NodeId,
    pub logits: NodeId,
}

impl Decoder {
    /// Parameters are named `{prefix}.*`.
    pub fn new<F: Real>(src: &mut impl ParamSource<F>, prefix: &str, shape: DecoderShape) -> Result<Self> {
        let d = shape.d_model;
        let embed = src.get(&format!("{prefix}.embed"), &[shape.vocab, d], Init::Embedding)?;
        let mut layers = Vec::with_capacity(shape.layers);
        for l in 0..shape.layers {
            let n = format!("{prefix}.{l}");
            layers.push(DecoderLayer {
                self_attn: Attention::new(src, &format!("{n}.self"), d, shape.heads)?,
                norm1: LayerNorm::new(src, &format!("{n}.norm1"), d)?,
                cross_attn: Attention::new(src, &format!("{n}.cross"), d, shape.heads)?,
                norm2: LayerNorm::new(src, &format!("{n}.norm2"), d)?,
                ff: FeedForward::new(src, &n, d, shape.d_ff)?,
                norm3: LayerNorm::new(src, &format!("{n}.norm3"), d)?,
            });
        }
        let out = Linear::new(src, &format!("{prefix}.out"), d, shape.vocab, true)?;
        Ok(Self {
            embed,
            layers,
            out,
            positions: shape.positions,
        })
    }

    /// Runs the decoder over `input` (teacher-forced, causally masked) while
    /// attending to `memory`.
    pub fn forward<F: Real>(
        &self,
        s: &mut Session<F>,
        memory: NodeId,
        input: &[usize],
        drop: &mut Dropout,
    ) -> Result<DecoderOutput> {
        if input.is_empty() {
            return Err(ModelError::EmptyTarget);
        }
        let x = embed(s, self.embed, input, self.positions)?;
        let mut h = drop.apply(s, x)?;
        for layer in &self.layers {
            let a = layer.self_attn.forward(s, h, h, true, drop)?;
            let a = drop.apply(s, a)?;
            let r = s.tape.add(h, a)?;
            let r = layer.norm1.forward(s, r)?;
            let c = layer.cross_attn.forward(s, r, memory, false, drop)?;
            let c = drop.apply(s, c)?;
            let r2 = s.tape.add(r, c)?;
            let r2 = layer.norm2.forward(s, r2)?;
            let f = layer.ff.forward(s, r2, drop)?;
            let f = drop.apply(s, f)?;
            let r3 = s.tape.add(r2, f)?;
            h = layer.norm3.forward(s, r3)?;
        }
        let logits = self.out.forward(s, h)?;
        Ok(DecoderOutput { states: h, logits })
    }
}
