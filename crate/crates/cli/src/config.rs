//! Flat run configuration: model and training keys side by side in one
//! JSON object, plus the data and output paths.

use std::collections::BTreeSet;
use std::path::PathBuf;

use mvae_model::{ModelConfig, TrainConfig};
use serde_json::{Map, Value};

use crate::UsageError;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

const PATH_KEYS: [&str; 2] = ["data", "out"];

fn keys_of(v: Value) -> BTreeSet<String> {
    match v {
        Value::Object(m) => m.into_iter().map(|(k, _)| k).collect(),
        _ => BTreeSet::new(),
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

impl RunConfig {
    /// Splits a flat object between the model and training sections.
    /// Unknown keys are rejected.
    pub fn from_flat(text: &str) -> anyhow::Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| usage(format!("config is not valid JSON: {e}")))?;
        let Value::Object(flat) = value else {
            return Err(usage("config must be a JSON object"));
        };
        let model_keys = keys_of(serde_json::to_value(ModelConfig::default())?);
        let train_keys = keys_of(serde_json::to_value(TrainConfig::default())?);
        let (mut model, mut train) = (Map::new(), Map::new());
        let (mut data, mut out) = (None, None);
        for (k, v) in flat {
            if model_keys.contains(&k) {
                model.insert(k, v);
            } else if train_keys.contains(&k) {
                train.insert(k, v);
            } else if PATH_KEYS.contains(&k.as_str()) {
                let path = v
                    .as_str()
                    .map(PathBuf::from)
                    .ok_or_else(|| usage(format!("config key `{k}` must be a string")))?;
                if k == "data" {
                    data = Some(path);
                } else {
                    out = Some(path);
                }
            } else {
                return Err(usage(format!("unknown config key `{k}`")));
            }
        }
        let model: ModelConfig =
            serde_json::from_value(Value::Object(model)).map_err(|e| usage(format!("model settings: {e}")))?;
        let train: TrainConfig =
            serde_json::from_value(Value::Object(train)).map_err(|e| usage(format!("training settings: {e}")))?;
        Ok(Self { model, train, data, out })
    }

    pub fn to_flat(&self) -> Map<String, Value> {
        let mut flat = Map::new();
        for part in [serde_json::to_value(&self.model), serde_json::to_value(&self.train)] {
            if let Ok(Value::Object(m)) = part {
                flat.extend(m);
            }
        }
        for (k, p) in [("data", &self.data), ("out", &self.out)] {
            if let Some(p) = p {
                flat.insert(k.into(), Value::String(p.display().to_string()));
            }
        }
        flat
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.train.validate().map_err(|e| usage(e.to_string()))?;
        // Vocabulary sizes are filled in later, so only the shape settings
        // are checked here.
        let sized = ModelConfig {
            node_vocab: self.model.node_vocab.max(1),
            feature_vocab: self.model.feature_vocab.max(3),
            sentence_vocab: self.model.sentence_vocab.max(3),
            graph_vocab: self.model.graph_vocab.max(2),
            arc_labels: self.model.arc_labels.max(1),
            ..self.model.clone()
        };
        sized.validate().map_err(|e| usage(e.to_string()))
    }
}
