//! Batching and the training loop.

use std::io::Write;
use std::ops::ControlFlow;

use mvae_core::views::ChildOrder;
use mvae_nn::{adam_step, AdamConfig, NnError, OptimizerState, ParamStore, Real};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::data::{linearize_view, AlignedExample, ViewOptions, Vocabularies};
use crate::error::{ModelError, Result};
use crate::layers::{Dropout, Session};
use crate::model::{Instance, LossReport, Model, Objective, STREAM_HEADS, STREAM_SENTENCE};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Schedule {
    /// Linear warmup to `lr`, then decay with the inverse square root of the
    /// step.
    InverseSqrt { warmup: usize },
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    /// Upper bound on summed target lengths per batch.
    pub token_budget: usize,
    /// Peak learning rate.
    pub lr: f64,
    pub schedule: Schedule,
    pub seed: u64,
    /// Re-linearize graph targets with fresh child orders every epoch.
    pub random_linearization: bool,
    pub objective: Objective,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 300_000,
            token_budget: 4096,
            lr: 5e-4,
            schedule: Schedule::InverseSqrt { warmup: 4000 },
            seed: 1,
            random_linearization: false,
            objective: Objective::Full,
            adam_beta1: 0.9,
            adam_beta2: 0.98,
            adam_eps: 1e-9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        if self.token_budget == 0 {
            return bad("token_budget must be positive".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if let Schedule::InverseSqrt { warmup: 0 } = self.schedule {
            return bad("warmup must be positive".into());
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return bad(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        Ok(())
    }

    /// Learning rate at 1-based `step`.
    pub fn lr_at(&self, step: usize) -> f64 {
        match self.schedule {
            Schedule::Constant => self.lr,
            Schedule::InverseSqrt { warmup } => {
                let (s, w) = (step.max(1) as f64, warmup as f64);
                self.lr * (s / w).min((w / s).sqrt())
            }
        }
    }
}

/// Seed derived from a list of integers.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut key = [0u8; 32];
    for (i, p) in parts.iter().take(4).enumerate() {
        key[i * 8..(i + 1) * 8].copy_from_slice(&p.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    for p in parts.iter().skip(4) {
        rng = ChaCha8Rng::seed_from_u64(rng.next_u64() ^ p);
    }
    rng.next_u64()
}

/// Shuffles example indices with `seed`, then fills batches in that order
/// until adding the next example would push the summed length past
/// `budget`. An example longer than the budget gets a batch of its own.
pub fn make_batches(lengths: &[usize], budget: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut batches = Vec::new();
    let mut current = Vec::new();
    let mut used = 0usize;
    for i in order {
        if !current.is_empty() && used + lengths[i] > budget {
            batches.push(std::mem::take(&mut current));
            used = 0;
        }
        current.push(i);
        used += lengths[i];
    }
    if !current.is_empty() {
        batches.push(current);
    }
    batches
}

/// Preprocessed examples with their vocabularies and index forms.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub examples: Vec<AlignedExample>,
    pub instances: Vec<Instance>,
    pub vocabs: Vocabularies,
    pub views: ViewOptions,
}

impl Corpus {
    pub fn new(examples: Vec<AlignedExample>, vocabs: Vocabularies, views: ViewOptions) -> Result<Self> {
        let instances = examples.iter().map(|e| vocabs.instance(e)).collect::<Result<_>>()?;
        Ok(Self {
            examples,
            instances,
            vocabs,
            views,
        })
    }

    /// A model configuration sized to the vocabularies.
    pub fn size(&self, cfg: &ModelConfig) -> ModelConfig {
        ModelConfig {
            node_vocab: self.vocabs.nodes.len(),
            feature_vocab: self.vocabs.features.len(),
            sentence_vocab: self.vocabs.sentence.len(),
            graph_vocab: self.vocabs.graph.len(),
            arc_labels: self.vocabs.labels.len(),
            edge_labels: self.views.edge_labels,
            ..cfg.clone()
        }
    }

    fn relinearize(&mut self, seed: u64) -> Result<()> {
        for (k, (ex, inst)) in self.examples.iter().zip(&mut self.instances).enumerate() {
            let order = ChildOrder::Random(derive_seed(&[seed, k as u64]));
            let lin = linearize_view(self.views.task, &ex.graph, order, self.views.edge_labels)?;
            inst.graph = self.vocabs.graph_tokens(&lin);
        }
        Ok(())
    }
}

/// One logged step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepLog {
    pub step: usize,
    pub lr: f64,
    pub loss: LossReport,
}

/// Everything a training callback may inspect.
pub struct Progress<'a, F> {
    pub log: &'a StepLog,
    pub model: &'a Model,
    pub store: &'a ParamStore<F>,
}

pub struct Trained<F> {
    pub model: Model,
    pub store: ParamStore<F>,
    pub log: Vec<StepLog>,
}

/// Trains from freshly initialized parameters (drawn from `cfg.seed`).
/// `on_step` runs after every update and may stop training early.
pub fn train<F: Real>(
    corpus: &Corpus,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    mut on_step: impl FnMut(Progress<'_, F>) -> ControlFlow<()>,
) -> Result<Trained<F>> {
    cfg.validate()?;
    let model_cfg = corpus.size(model_cfg);
    let (model, mut store) = Model::init::<F>(&model_cfg, cfg.seed)?;
    let adam = AdamConfig {
        beta1: cfg.adam_beta1,
        beta2: cfg.adam_beta2,
        eps: cfg.adam_eps,
    };
    let mut opt = OptimizerState::for_store(adam, &store);
    let mut corpus = corpus.clone();
    let lengths: Vec<usize> = corpus.instances.iter().map(|i| i.sentence.len()).collect();
    let mut log = Vec::with_capacity(cfg.steps.min(1 << 16));
    let mut step = 0usize;
    let mut epoch = 0u64;
    'outer: loop {
        if cfg.random_linearization {
            corpus.relinearize(derive_seed(&[cfg.seed, epoch, step as u64, 1]))?;
        }
        let batches = make_batches(&lengths, cfg.token_budget, derive_seed(&[cfg.seed, epoch]));
        for batch in batches {
            step += 1;
            let loss = train_step(&model, &mut store, &mut opt, &corpus, &batch, cfg, step)?;
            let entry = StepLog {
                step,
                lr: cfg.lr_at(step),
                loss,
            };
            log.push(entry);
            let flow = on_step(Progress {
                log: &entry,
                model: &model,
                store: &store,
            });
            if flow.is_break() || step >= cfg.steps {
                break 'outer;
            }
        }
        epoch += 1;
    }
    Ok(Trained { model, store, log })
}

fn keyed_drops(rate: f64, seed: u64, step: usize, example: usize) -> (Dropout, Dropout) {
    let (s, e) = (step as u64, example as u64);
    (
        Dropout::keyed(rate, seed, s, e, STREAM_SENTENCE),
        Dropout::keyed(rate, seed, s, e, STREAM_HEADS),
    )
}

fn train_step<F: Real>(
    model: &Model,
    store: &mut ParamStore<F>,
    opt: &mut OptimizerState<F>,
    corpus: &Corpus,
    batch: &[usize],
    cfg: &TrainConfig,
    step: usize,
) -> Result<LossReport> {
    let rate = model.config().dropout;
    let insts: Vec<&Instance> = batch.iter().map(|&i| &corpus.instances[i]).collect();
    let mut s = Session::new(store);
    let built = model.batch_loss(&mut s, &insts, cfg.objective, |k| {
        keyed_drops(rate, cfg.seed, step, batch[k])
    });
    let (nodes, report) = match built {
        Ok(v) => v,
        Err(ModelError::Nn(e @ NnError::NonFinite { .. })) => {
            drop(s);
            return Err(blame(model, store, corpus, batch, cfg, step, e));
        }
        Err(e) => return Err(e),
    };
    let tape = s.tape;
    store.zero_grads();
    tape.backward_into(nodes.l_final, store)?;
    adam_step(store, opt, cfg.lr_at(step))?;
    Ok(report)
}

/// Finds the first example of a batch whose own loss is non-finite.
fn blame<F: Real>(
    model: &Model,
    store: &ParamStore<F>,
    corpus: &Corpus,
    batch: &[usize],
    cfg: &TrainConfig,
    step: usize,
    fallback: NnError,
) -> ModelError {
    let rate = model.config().dropout;
    for &i in batch {
        let mut s = Session::new(store);
        let r = model.batch_loss(&mut s, &[&corpus.instances[i]], cfg.objective, |_| {
            keyed_drops(rate, cfg.seed, step, i)
        });
        if let Err(ModelError::Nn(source @ NnError::NonFinite { .. })) = r {
            return ModelError::NonFiniteLoss {
                id: corpus.examples[i].id.clone(),
                source,
            };
        }
    }
    ModelError::NonFiniteLoss {
        id: corpus.examples[batch[0]].id.clone(),
        source: fallback,
    }
}

/// CSV with columns `step,l_base,l_auto1,l_auto2,l_final`; values are
/// written in shortest round-trip form.
pub fn write_loss_log(log: &[StepLog], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "step,l_base,l_auto1,l_auto2,l_final")?;
    for e in log {
        let l = &e.loss;
        writeln!(w, "{},{},{},{},{}", e.step, l.l_base, l.l_auto1, l.l_auto2, l.l_final)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_examples() {
        let lengths = [3, 5, 4, 4];
        assert_eq!(make_batches(&lengths, 100, 7).len(), 1);
        let singles = make_batches(&lengths, 5, 7);
        assert_eq!(singles.len(), 4);
        assert_eq!(make_batches(&lengths, 9, 3), make_batches(&lengths, 9, 3));
        let mut all: Vec<usize> = make_batches(&lengths, 9, 3).concat();
        all.sort();
        assert_eq!(all, [0, 1, 2, 3]);
    }

    #[test]
    fn schedule_peaks_at_warmup() {
        let cfg = TrainConfig {
            lr: 1.0,
            schedule: Schedule::InverseSqrt { warmup: 100 },
            ..TrainConfig::default()
        };
        assert_eq!(cfg.lr_at(100), 1.0);
        assert_eq!(cfg.lr_at(50), 0.5);
        assert_eq!(cfg.lr_at(400), 0.5);
    }

    #[test]
    fn config_checks() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { steps: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { token_budget: 0, ..TrainConfig::default() }.validate().is_err());
        let c: TrainConfig = serde_json::from_str(r#"{"schedule":{"kind":"constant"},"adam_beta1":0.1}"#).unwrap();
        assert_eq!(c.schedule, Schedule::Constant);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"stepz":3}"#).is_err());
    }

    #[test]
    fn loss_log_format() {
        let log = [StepLog {
            step: 1,
            lr: 0.1,
            loss: LossReport {
                l_base: 2.0,
                l_auto1: 4.0,
                l_auto2: 2.0,
                l_final: 2.5,
                ..LossReport::default()
            },
        }];
        let mut out = Vec::new();
        write_loss_log(&log, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "step,l_base,l_auto1,l_auto2,l_final\n1,2,4,2,2.5\n");
    }
}
