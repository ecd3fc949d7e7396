//! The full model: encoder, sentence decoder and the two detachable
//! reconstruction heads, plus the loss assembly.

use mvae_nn::{NodeId, ParamStore, Real, Reduction, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::biaffine::{ArcTarget, Biaffine};
use crate::config::ModelConfig;
use crate::decoder::{Decoder, DecoderShape};
use crate::encoder::{Encoder, EncoderLayerTrace};
use crate::error::{ModelError, Result};
use crate::layers::{Binder, Dropout, Initializer, ParamSource, Session};
use crate::vocab::{BOS, EOS};

/// Parameter-name prefixes of the reconstruction heads.
pub const HEAD_PREFIXES: [&str; 2] = ["biaffine.", "graph_dec."];

/// Dropout stream of the sentence path.
pub const STREAM_SENTENCE: u64 = 0;
/// Dropout stream of the reconstruction heads.
pub const STREAM_HEADS: u64 = 1;

/// One training example in index form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Instance {
    /// Encoder node tokens.
    pub nodes: Vec<usize>,
    /// Row-major path-feature indices over all ordered node pairs.
    pub features: Vec<usize>,
    /// Sentence `y_1..y_N`, without boundary symbols.
    pub sentence: Vec<usize>,
    /// Grounded arcs over sentence positions.
    pub arcs: Vec<ArcTarget>,
    /// Linearized graph `x_1..x_M`.
    pub graph: Vec<usize>,
}

/// Which losses a forward pass builds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Sentence loss plus both reconstruction losses.
    #[default]
    Full,
    /// Sentence loss only; the heads are never evaluated.
    BaselineOnly,
}

/// Loss values of one step or example.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize)]
pub struct LossReport {
    pub l_base: f64,
    pub l_auto1: f64,
    pub l_auto2: f64,
    pub l_final: f64,
    /// Target tokens behind `l_base`, end symbols included.
    pub tokens: usize,
    pub arcs: usize,
    pub graph_tokens: usize,
}

/// `l_base + α·l_auto1 + β·l_auto2`, evaluated left to right exactly as the
/// training graph does.
pub fn loss_final<F: Real>(l_base: F, l_auto1: F, l_auto2: F, alpha: F, beta: F) -> F {
    (l_base + l_auto1 * alpha) + l_auto2 * beta
}

/// Scalar nodes of an assembled batch loss.
#[derive(Clone, Copy, Debug)]
pub struct LossNodes {
    pub l_base: NodeId,
    pub l_auto1: Option<NodeId>,
    pub l_auto2: Option<NodeId>,
    pub l_final: NodeId,
}

#[derive(Clone, Debug)]
struct Heads {
    biaffine: Biaffine,
    graph: Decoder,
}

/// Per-example summed losses before normalization.
#[derive(Clone, Copy, Debug)]
struct Terms {
    base: NodeId,
    tokens: usize,
    auto1: Option<NodeId>,
    arcs: usize,
    auto2: Option<NodeId>,
    graph_tokens: usize,
}

/// Teacher-forced argmax accuracies of the reconstruction heads.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HeadAccuracy {
    pub arcs: usize,
    pub arcs_correct: usize,
    pub graph_tokens: usize,
    pub graph_correct: usize,
    pub sentence_tokens: usize,
    pub sentence_correct: usize,
}

#[derive(Clone, Debug)]
pub struct Model {
    cfg: ModelConfig,
    encoder: Encoder,
    decoder: Decoder,
    heads: Option<Heads>,
}

fn shape(cfg: &ModelConfig, vocab: usize) -> DecoderShape {
    DecoderShape {
        layers: cfg.layers,
        heads: cfg.heads,
        d_model: cfg.d_model,
        d_ff: cfg.d_ff,
        vocab,
        positions: cfg.decoder_positions,
    }
}

fn argmax<F: Real>(row: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

impl Model {
    /// Fresh parameters drawn from `seed`. All parameters, heads included,
    /// are always created in the same order so the draw sequence does not
    /// depend on the objective.
    pub fn init<F: Real>(cfg: &ModelConfig, seed: u64) -> Result<(Self, ParamStore<F>)> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let mut src = Initializer {
            store: &mut store,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let model = Self::build(cfg, &mut src, true)?;
        Ok((model, store))
    }

    /// Binds to existing parameters. The heads are optional but must be
    /// complete if present.
    pub fn bind<F: Real>(cfg: &ModelConfig, store: &ParamStore<F>) -> Result<Self> {
        cfg.validate()?;
        let has_heads = store
            .params()
            .iter()
            .any(|p| HEAD_PREFIXES.iter().any(|h| p.name.starts_with(h)));
        let mut src = Binder { store };
        let mut model = Self::build(cfg, &mut src, false)?;
        if has_heads {
            model.heads = Some(Self::build_heads(cfg, &mut src).map_err(|e| match e {
                ModelError::MissingParameter(name) => ModelError::PartialHeads(name),
                other => other,
            })?);
        }
        Ok(model)
    }

    fn build<F: Real>(cfg: &ModelConfig, src: &mut impl ParamSource<F>, heads: bool) -> Result<Self> {
        let encoder = Encoder::new(src, cfg)?;
        let decoder = Decoder::new(src, "dec", shape(cfg, cfg.sentence_vocab))?;
        let heads = if heads { Some(Self::build_heads(cfg, src)?) } else { None };
        Ok(Self {
            cfg: cfg.clone(),
            encoder,
            decoder,
            heads,
        })
    }

    fn build_heads<F: Real>(cfg: &ModelConfig, src: &mut impl ParamSource<F>) -> Result<Heads> {
        Ok(Heads {
            biaffine: Biaffine::new(src, cfg.d_model, cfg.arc_mlp, cfg.label_mlp, cfg.arc_labels)?,
            graph: Decoder::new(src, "graph_dec", shape(cfg, cfg.graph_vocab))?,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn has_heads(&self) -> bool {
        self.heads.is_some()
    }

    pub fn biaffine(&self) -> Result<&Biaffine> {
        self.heads.as_ref().map(|h| &h.biaffine).ok_or(ModelError::NoHeads)
    }

    pub fn encode<F: Real>(
        &self,
        s: &mut Session<F>,
        nodes: &[usize],
        features: &[usize],
        drop: &mut Dropout,
        trace: Option<&mut Vec<EncoderLayerTrace<F>>>,
    ) -> Result<NodeId> {
        self.encoder.forward(s, nodes, features, drop, trace)
    }

    /// Sentence decoder over `input`, attending to `memory`.
    pub fn decode_sentence<F: Real>(
        &self,
        s: &mut Session<F>,
        memory: NodeId,
        input: &[usize],
        drop: &mut Dropout,
    ) -> Result<crate::decoder::DecoderOutput> {
        self.decoder.forward(s, memory, input, drop)
    }

    /// Graph decoder over `input`, attending to sentence states.
    pub fn decode_graph<F: Real>(
        &self,
        s: &mut Session<F>,
        states: NodeId,
        input: &[usize],
        drop: &mut Dropout,
    ) -> Result<crate::decoder::DecoderOutput> {
        let heads = self.heads.as_ref().ok_or(ModelError::NoHeads)?;
        heads.graph.forward(s, states, input, drop)
    }

    /// States `s_1..s_N` of the sentence decoder: the rows that predict
    /// `y_1..y_N` given the gold prefix.
    pub fn sentence_states<F: Real>(
        &self,
        s: &mut Session<F>,
        inst: &Instance,
        drop: &mut Dropout,
    ) -> Result<NodeId> {
        let h = self.encode(s, &inst.nodes, &inst.features, drop, None)?;
        let input = sentence_input(&inst.sentence)?;
        let out = self.decode_sentence(s, h, &input, drop)?;
        Ok(s.tape.slice_rows(out.states, 0, inst.sentence.len())?)
    }

    fn terms<F: Real>(
        &self,
        s: &mut Session<F>,
        inst: &Instance,
        objective: Objective,
        sent_drop: &mut Dropout,
        head_drop: &mut Dropout,
    ) -> Result<Terms> {
        let n = inst.sentence.len();
        let input = sentence_input(&inst.sentence)?;
        let mut targets = inst.sentence.clone();
        targets.push(EOS);
        let h = self.encode(s, &inst.nodes, &inst.features, sent_drop, None)?;
        let out = self.decode_sentence(s, h, &input, sent_drop)?;
        let base = s.tape.cross_entropy(out.logits, &targets, Reduction::Sum)?;
        let mut terms = Terms {
            base,
            tokens: targets.len(),
            auto1: None,
            arcs: 0,
            auto2: None,
            graph_tokens: 0,
        };
        if objective == Objective::BaselineOnly {
            return Ok(terms);
        }
        let heads = self.heads.as_ref().ok_or(ModelError::NoHeads)?;
        let states = s.tape.slice_rows(out.states, 0, n)?;
        terms.auto1 = heads
            .biaffine
            .loss_sum(s, states, &inst.arcs, self.cfg.edge_labels, head_drop)?;
        terms.arcs = inst.arcs.len();
        if inst.graph.is_empty() {
            return Err(ModelError::EmptyTarget);
        }
        let ginput = graph_input(&inst.graph);
        let gout = heads.graph.forward(s, states, &ginput, head_drop)?;
        terms.auto2 = Some(s.tape.cross_entropy(gout.logits, &inst.graph, Reduction::Sum)?);
        terms.graph_tokens = inst.graph.len();
        Ok(terms)
    }

    /// Builds the batch loss on `s`. Each loss is its summed negative
    /// log-likelihood divided by its token or arc count over the batch; a
    /// loss with nothing to count is zero. `drops` supplies the sentence and
    /// head dropout of each example.
    pub fn batch_loss<F: Real>(
        &self,
        s: &mut Session<F>,
        batch: &[&Instance],
        objective: Objective,
        mut drops: impl FnMut(usize) -> (Dropout, Dropout),
    ) -> Result<(LossNodes, LossReport)> {
        let mut all = Vec::with_capacity(batch.len());
        for (k, inst) in batch.iter().enumerate() {
            let (mut sd, mut hd) = drops(k);
            all.push(self.terms(s, inst, objective, &mut sd, &mut hd)?);
        }
        let tokens: usize = all.iter().map(|t| t.tokens).sum();
        let arcs: usize = all.iter().map(|t| t.arcs).sum();
        let graph_tokens: usize = all.iter().map(|t| t.graph_tokens).sum();
        let l_base = mean(s, all.iter().map(|t| Some(t.base)), tokens)?.ok_or(ModelError::EmptyTarget)?;
        let mut report = LossReport {
            tokens,
            arcs,
            graph_tokens,
            ..LossReport::default()
        };
        report.l_base = s.value(l_base).data()[0].to_f64_lossy();
        if objective == Objective::BaselineOnly {
            report.l_final = report.l_base;
            let nodes = LossNodes {
                l_base,
                l_auto1: None,
                l_auto2: None,
                l_final: l_base,
            };
            return Ok((nodes, report));
        }
        let auto1 = match mean(s, all.iter().map(|t| t.auto1), arcs)? {
            Some(n) => n,
            None => s.tape.constant(Tensor::scalar(F::zero()))?,
        };
        let auto2 = match mean(s, all.iter().map(|t| t.auto2), graph_tokens)? {
            Some(n) => n,
            None => s.tape.constant(Tensor::scalar(F::zero()))?,
        };
        let a = s.tape.scale(auto1, F::lit(self.cfg.alpha))?;
        let b = s.tape.scale(auto2, F::lit(self.cfg.beta))?;
        let l = s.tape.add(l_base, a)?;
        let l_final = s.tape.add(l, b)?;
        report.l_auto1 = s.tape.scalar(auto1).to_f64_lossy();
        report.l_auto2 = s.tape.scalar(auto2).to_f64_lossy();
        report.l_final = s.tape.scalar(l_final).to_f64_lossy();
        let nodes = LossNodes {
            l_base,
            l_auto1: Some(auto1),
            l_auto2: Some(auto2),
            l_final,
        };
        Ok((nodes, report))
    }

    /// Teacher-forced argmax accuracies with dropout off. An arc counts as
    /// correct when both its head and its label are the argmax.
    pub fn head_accuracy<F: Real>(&self, store: &ParamStore<F>, inst: &Instance) -> Result<HeadAccuracy> {
        let heads = self.heads.as_ref().ok_or(ModelError::NoHeads)?;
        let mut s = Session::new(store);
        let mut off = Dropout::off();
        let h = self.encode(&mut s, &inst.nodes, &inst.features, &mut off, None)?;
        let input = sentence_input(&inst.sentence)?;
        let out = self.decode_sentence(&mut s, h, &input, &mut off)?;
        let n = inst.sentence.len();
        let mut acc = HeadAccuracy::default();
        let logits = s.value(out.logits).clone();
        for (i, &t) in inst.sentence.iter().chain(std::iter::once(&EOS)).enumerate() {
            acc.sentence_tokens += 1;
            acc.sentence_correct += usize::from(argmax(logits.row(i)) == t);
        }
        let states = s.tape.slice_rows(out.states, 0, n)?;
        if !inst.arcs.is_empty() {
            let reps = heads.biaffine.reps(&mut s, states, &mut off)?;
            let arc = s.value(reps.arc).clone();
            let hs: Vec<usize> = inst.arcs.iter().map(|a| a.head).collect();
            let ms: Vec<usize> = inst.arcs.iter().map(|a| a.modifier).collect();
            let labels = heads.biaffine.label_logits(&mut s, &reps, &hs, &ms)?;
            let labels = s.value(labels).clone();
            for (k, a) in inst.arcs.iter().enumerate() {
                acc.arcs += 1;
                let head_ok = argmax(arc.row(a.modifier)) == a.head;
                let label_ok = !self.cfg.edge_labels || argmax(labels.row(k)) == a.label;
                acc.arcs_correct += usize::from(head_ok && label_ok);
            }
        }
        let gout = heads.graph.forward(&mut s, states, &graph_input(&inst.graph), &mut off)?;
        let glogits = s.value(gout.logits);
        for (i, &t) in inst.graph.iter().enumerate() {
            acc.graph_tokens += 1;
            acc.graph_correct += usize::from(argmax(glogits.row(i)) == t);
        }
        Ok(acc)
    }
}

/// Sum of the present nodes scaled by `1 / count`.
fn mean<F: Real>(
    s: &mut Session<F>,
    parts: impl Iterator<Item = Option<NodeId>>,
    count: usize,
) -> Result<Option<NodeId>> {
    let mut total: Option<NodeId> = None;
    for p in parts.flatten() {
        total = Some(match total {
            None => p,
            Some(t) => s.tape.add(t, p)?,
        });
    }
    match total {
        Some(t) if count > 0 => Ok(Some(s.tape.scale(t, F::one() / F::lit(count as f64))?)),
        _ => Ok(None),
    }
}

/// `[BOS, y_1..y_N]`.
pub fn sentence_input(sentence: &[usize]) -> Result<Vec<usize>> {
    if sentence.is_empty() {
        return Err(ModelError::EmptyTarget);
    }
    Ok(std::iter::once(BOS).chain(sentence.iter().copied()).collect())
}

/// `[BOS, x_1..x_{M-1}]`.
pub fn graph_input(graph: &[usize]) -> Vec<usize> {
    std::iter::once(BOS)
        .chain(graph.iter().take(graph.len().saturating_sub(1)).copied())
        .collect()
}

/// A copy of `store` without the reconstruction-head parameters.
pub fn strip_heads<F: Real>(store: &ParamStore<F>) -> ParamStore<F> {
    store.retain(|name| !HEAD_PREFIXES.iter().any(|h| name.starts_with(h)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_final_examples() {
        assert_eq!(loss_final(2.0, 4.0, 2.0, 0.05, 0.15), 2.5);
        let base = 1.234_567_f64;
        assert_eq!(loss_final(base, 9.1, 3.3, 0.0, 0.0).to_bits(), base.to_bits());
    }

    #[test]
    fn graph_input_shifts_right() {
        assert_eq!(graph_input(&[5, 6, 7]), [BOS, 5, 6]);
        assert_eq!(graph_input(&[5]), [BOS]);
    }
}
