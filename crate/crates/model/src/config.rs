use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Architecture, vocabulary sizes and loss weights.
///
/// Defaults follow the published setup (6 layers, 8 heads, 512 hidden,
/// α = 0.05, β = 0.15); vocabulary sizes are filled in from the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    /// Output width of the two arc MLPs.
    pub arc_mlp: usize,
    /// Output width of the two label MLPs.
    pub label_mlp: usize,
    pub node_vocab: usize,
    pub feature_vocab: usize,
    pub sentence_vocab: usize,
    pub graph_vocab: usize,
    pub arc_labels: usize,
    pub dropout: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Off: the triple-relation loss keeps only the unlabeled arc factor.
    pub edge_labels: bool,
    pub encoder_positions: bool,
    pub decoder_positions: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers: 6,
            heads: 8,
            d_model: 512,
            d_ff: 2048,
            arc_mlp: 512,
            label_mlp: 512,
            node_vocab: 0,
            feature_vocab: 0,
            sentence_vocab: 0,
            graph_vocab: 0,
            arc_labels: 0,
            dropout: 0.1,
            alpha: 0.05,
            beta: 0.15,
            edge_labels: true,
            encoder_positions: false,
            decoder_positions: true,
        }
    }
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Config(msg.into())
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("layers", self.layers),
            ("heads", self.heads),
            ("d_model", self.d_model),
            ("d_ff", self.d_ff),
            ("arc_mlp", self.arc_mlp),
            ("label_mlp", self.label_mlp),
            ("node_vocab", self.node_vocab),
            ("feature_vocab", self.feature_vocab),
            ("sentence_vocab", self.sentence_vocab),
            ("graph_vocab", self.graph_vocab),
            ("arc_labels", self.arc_labels),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(bad(format!("{name} must be positive")));
            }
        }
        if self.d_model % self.heads != 0 {
            return Err(bad(format!(
                "d_model {} is not divisible by heads {}",
                self.d_model, self.heads
            )));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(bad(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sized() -> ModelConfig {
        ModelConfig {
            node_vocab: 5,
            feature_vocab: 5,
            sentence_vocab: 5,
            graph_vocab: 5,
            arc_labels: 2,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn validation() {
        assert!(sized().validate().is_ok());
        assert!(ModelConfig::default().validate().is_err());
        assert!(ModelConfig { alpha: -0.1, ..sized() }.validate().is_err());
        assert!(ModelConfig { beta: f64::NAN, ..sized() }.validate().is_err());
        assert!(ModelConfig { heads: 3, ..sized() }.validate().is_err());
        assert!(ModelConfig { dropout: 1.0, ..sized() }.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<ModelConfig>(r#"{"layers": 2, "colour": 1}"#).is_err());
        let c: ModelConfig = serde_json::from_str(r#"{"layers": 2}"#).unwrap();
        assert_eq!(c.layers, 2);
        assert_eq!(c.alpha, 0.05);
    }
}
