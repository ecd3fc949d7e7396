//! Deep biaffine scoring of head/modifier pairs over decoder states.
//!
//! For states `S`, four MLPs produce `r^{arc-h}, r^{arc-m}, r^{label-h},
//! r^{label-m}`. Arc score of head `j` for modifier `i`:
//! `r_j^{arc-h} U_aᵀ r_i^{arc-m} + r_j^{arc-h} v_a`. Label scores:
//! `r_j^{label-h} U_l r_i^{label-m} + (r_j^{label-h} ⊕ r_i^{label-m}) V_l + b_l`.
//! `p(j, l | i) = softmax(label_ij)[l] · softmax(arc_i)[j]`.

use mvae_nn::{NodeId, ParamId, Real, Reduction, Tensor};

use crate::error::{ModelError, Result};
use crate::layers::{Dropout, Init, Mlp, ParamSource, Session};

#[derive(Clone, Debug)]
pub struct Biaffine {
    arc_head: Mlp,
    arc_mod: Mlp,
    label_head: Mlp,
    label_mod: Mlp,
    u_arc: ParamId,
    v_arc: ParamId,
    /// `U_l` flattened to `[dl, labels * dl]`: block `l` is the bilinear
    /// form of label `l`.
    u_label: ParamId,
    v_label: ParamId,
    b_label: ParamId,
    labels: usize,
}

/// The four MLP outputs and the arc score matrix (rows: modifiers,
/// columns: heads).
#[derive(Clone, Copy, Debug)]
pub struct BiaffineReps {
    pub arc_head: NodeId,
    pub arc_mod: NodeId,
    pub label_head: NodeId,
    pub label_mod: NodeId,
    pub arc: NodeId,
}

/// A grounded arc in index form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArcTarget {
    pub head: usize,
    pub label: usize,
    pub modifier: usize,
}

/// Full score tables for inspection.
#[derive(Clone, Debug)]
pub struct BiaffineScores<F> {
    /// `[n, n]`, row `i` scores every head of modifier `i`.
    pub arc: Tensor<F>,
    /// `[n * n, labels]`, row `i * n + j` scores labels of arc `j → i`.
    pub label: Tensor<F>,
}

impl<F: Real> BiaffineScores<F> {
    /// `p(j, l | i)` in f64.
    pub fn joint(&self, i: usize, j: usize, l: usize) -> f64 {
        let n = self.arc.cols();
        let arc = softmax(self.arc.row(i));
        let label = softmax(self.label.row(i * n + j));
        label[l] * arc[j]
    }
}

fn softmax<F: Real>(row: &[F]) -> Vec<f64> {
    let max = row.iter().map(|x| x.to_f64_lossy()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|x| (x.to_f64_lossy() - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

impl Biaffine {
    pub fn new<F: Real>(
        src: &mut impl ParamSource<F>,
        d: usize,
        arc_dim: usize,
        label_dim: usize,
        labels: usize,
    ) -> Result<Self> {
        Ok(Self {
            arc_head: Mlp::new(src, "biaffine.arc_head", d, arc_dim)?,
            arc_mod: Mlp::new(src, "biaffine.arc_mod", d, arc_dim)?,
            label_head: Mlp::new(src, "biaffine.label_head", d, label_dim)?,
            label_mod: Mlp::new(src, "biaffine.label_mod", d, label_dim)?,
            u_arc: src.get("biaffine.u_arc", &[arc_dim, arc_dim], Init::Glorot)?,
            v_arc: src.get("biaffine.v_arc", &[arc_dim, 1], Init::Zeros)?,
            u_label: src.get("biaffine.u_label", &[label_dim, labels * label_dim], Init::Glorot)?,
            v_label: src.get("biaffine.v_label", &[2 * label_dim, labels], Init::Glorot)?,
            b_label: src.get("biaffine.b_label", &[labels], Init::Zeros)?,
            labels,
        })
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn reps<F: Real>(&self, s: &mut Session<F>, states: NodeId, drop: &mut Dropout) -> Result<BiaffineReps> {
        let n = s.value(states).rows();
        if n < 2 {
            return Err(ModelError::TooShort(n));
        }
        let arc_head = self.arc_head.forward(s, states, drop)?;
        let arc_mod = self.arc_mod.forward(s, states, drop)?;
        let label_head = self.label_head.forward(s, states, drop)?;
        let label_mod = self.label_mod.forward(s, states, drop)?;
        let u = s.p(self.u_arc);
        let v = s.p(self.v_arc);
        let mu = s.tape.matmul(arc_mod, u)?;
        let ht = s.tape.transpose(arc_head)?;
        let bilinear = s.tape.matmul(mu, ht)?;
        let lin = s.tape.matmul(arc_head, v)?;
        let lin = s.tape.transpose(lin)?;
        let arc = s.tape.add(bilinear, lin)?;
        Ok(BiaffineReps {
            arc_head,
            arc_mod,
            label_head,
            label_mod,
            arc,
        })
    }

    /// Label logits `[A, labels]` for the arcs `heads[a] → mods[a]`.
    pub fn label_logits<F: Real>(
        &self,
        s: &mut Session<F>,
        reps: &BiaffineReps,
        heads: &[usize],
        mods: &[usize],
    ) -> Result<NodeId> {
        let h = s.tape.gather_rows(reps.label_head, heads)?;
        let m = s.tape.gather_rows(reps.label_mod, mods)?;
        let u = s.p(self.u_label);
        let t = s.tape.matmul(h, u)?;
        let bilinear = s.tape.grouped_row_dot(t, m)?;
        let hm = s.tape.concat_cols(&[h, m])?;
        let v = s.p(self.v_label);
        let lin = s.tape.matmul(hm, v)?;
        let b = s.p(self.b_label);
        let lin = s.tape.add(lin, b)?;
        Ok(s.tape.add(bilinear, lin)?)
    }

    /// Every arc and label score for `states`.
    pub fn scores<F: Real>(&self, s: &mut Session<F>, states: NodeId) -> Result<BiaffineScores<F>> {
        let n = s.value(states).rows();
        let reps = self.reps(s, states, &mut Dropout::off())?;
        let mods: Vec<usize> = (0..n * n).map(|k| k / n).collect();
        let heads: Vec<usize> = (0..n * n).map(|k| k % n).collect();
        let label = self.label_logits(s, &reps, &heads, &mods)?;
        Ok(BiaffineScores {
            arc: s.value(reps.arc).clone(),
            label: s.value(label).clone(),
        })
    }

    /// Summed negative log-likelihood of `arcs`; without `edge_labels` only
    /// the arc factor is used. Returns `None` for an empty arc set.
    pub fn loss_sum<F: Real>(
        &self,
        s: &mut Session<F>,
        states: NodeId,
        arcs: &[ArcTarget],
        edge_labels: bool,
        drop: &mut Dropout,
    ) -> Result<Option<NodeId>> {
        if arcs.is_empty() {
            return Ok(None);
        }
        let n = s.value(states).rows();
        for a in arcs {
            for index in [a.head, a.modifier] {
                if index >= n {
                    return Err(ModelError::ArcOutOfRange { index, length: n });
                }
            }
        }
        let reps = self.reps(s, states, drop)?;
        let heads: Vec<usize> = arcs.iter().map(|a| a.head).collect();
        let mods: Vec<usize> = arcs.iter().map(|a| a.modifier).collect();
        let rows = s.tape.gather_rows(reps.arc, &mods)?;
        let arc_nll = s.tape.cross_entropy(rows, &heads, Reduction::Sum)?;
        if !edge_labels {
            return Ok(Some(arc_nll));
        }
        let logits = self.label_logits(s, &reps, &heads, &mods)?;
        let labels: Vec<usize> = arcs.iter().map(|a| a.label).collect();
        let label_nll = s.tape.cross_entropy(logits, &labels, Reduction::Sum)?;
        Ok(Some(s.tape.add(arc_nll, label_nll)?))
    }
}
