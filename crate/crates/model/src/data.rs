//! Dataset records, preprocessing into aligned examples, and vocabularies.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use mvae_core::views::{
    ground_triples, linearize, linearize_covering, ChildOrder, FeatureVocabulary, GroundedArcSet, LinearizedGraph,
    COMPOUND_LABEL, PLACEHOLDER_LABEL,
};
use mvae_core::{
    expand_reentrancies, match_kg_nodes, parse_penman, parse_triples, simplify, Alignment, LabeledGraph,
};
use mvae_core::graph::view_label;
use serde::{Deserialize, Serialize};

use crate::biaffine::ArcTarget;
use crate::error::{ModelError, Result};
use crate::model::Instance;
use crate::vocab::Vocab;

/// One line of a JSON Lines dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triples: Option<Vec<String>>,
    /// May be absent in generation input.
    #[serde(default)]
    pub sentence: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignments: Option<BTreeMap<String, Vec<usize>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Amr,
    Kg,
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "amr" => Ok(Task::Amr),
            "kg" => Ok(Task::Kg),
            other => Err(format!("unknown task `{other}` (expected amr or kg)")),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Amr => "amr",
            Task::Kg => "kg",
        })
    }
}

/// A graph-sentence pair with its alignment and cached views.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedExample {
    pub id: String,
    /// Graph the views are read from.
    pub graph: LabeledGraph,
    /// Graph the encoder sees; for AMR, re-entrant nodes are copied out.
    pub encoder_graph: LabeledGraph,
    pub sentence: Vec<String>,
    pub alignment: Alignment,
    pub arcs: GroundedArcSet,
    pub linearized: LinearizedGraph,
    /// Matched share of nodes when the alignment came from the matcher.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
}

/// Settings that shape the cached views.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewOptions {
    pub task: Task,
    pub edge_labels: bool,
}

fn data_err(id: &str, message: impl Into<String>) -> ModelError {
    ModelError::Data {
        id: id.to_string(),
        message: message.into(),
    }
}

/// Reads JSON Lines; blank lines are skipped.
pub fn parse_records(text: &str) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: Record = serde_json::from_str(line).map_err(|e| ModelError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

/// Linearization used for the graph-decoder target.
pub fn linearize_view(task: Task, graph: &LabeledGraph, order: ChildOrder, edge_labels: bool) -> Result<LinearizedGraph> {
    Ok(match task {
        Task::Amr => linearize(graph, order, edge_labels)?,
        Task::Kg => linearize_covering(graph, order, edge_labels),
    })
}

/// The graph of a record, simplified for AMR.
pub fn record_graph(r: &Record, task: Task) -> Result<LabeledGraph> {
    Ok(match (task, &r.graph, &r.triples) {
        (Task::Amr, Some(g), None) => simplify(&parse_penman(g)?, false),
        (Task::Kg, None, Some(t)) => parse_triples(&t.join("\n"))?,
        (Task::Amr, _, _) => return Err(data_err(&r.id, "AMR records need `graph` and no `triples`")),
        (Task::Kg, _, _) => return Err(data_err(&r.id, "KG records need `triples` and no `graph`")),
    })
}

/// The graph the encoder reads: AMR re-entrant nodes are copied out.
pub fn encoder_graph(task: Task, graph: &LabeledGraph) -> LabeledGraph {
    match task {
        Task::Amr => expand_reentrancies(graph),
        Task::Kg => graph.clone(),
    }
}

impl AlignedExample {
    pub fn from_record(r: &Record, opts: ViewOptions) -> Result<Self> {
        if r.sentence.is_empty() {
            return Err(data_err(&r.id, "empty sentence"));
        }
        if let Some(t) = r.sentence.iter().find(|t| t.is_empty() || t.contains(char::is_whitespace)) {
            return Err(data_err(&r.id, format!("bad sentence token {t:?}")));
        }
        let graph = record_graph(r, opts.task)?;
        let (alignment, coverage) = match &r.alignments {
            Some(map) => {
                let mut a = Alignment::new();
                for (node, toks) in map {
                    if graph.index_of(node).is_none() {
                        return Err(data_err(&r.id, format!("alignment for unknown node `{node}`")));
                    }
                    a.insert(node.clone(), toks.clone())
                        .map_err(|e| data_err(&r.id, e.to_string()))?;
                }
                (a, None)
            }
            None if opts.task == Task::Kg => {
                let (a, c) = match_kg_nodes(&graph, &r.sentence);
                (a, Some(c))
            }
            None => (Alignment::new(), None),
        };
        let arcs = ground_triples(&graph, &alignment, r.sentence.len(), opts.edge_labels)
            .map_err(|e| data_err(&r.id, e.to_string()))?;
        let linearized = linearize_view(opts.task, &graph, ChildOrder::Input, opts.edge_labels)
            .map_err(|e| data_err(&r.id, e.to_string()))?;
        let encoder_graph = encoder_graph(opts.task, &graph);
        Ok(Self {
            id: r.id.clone(),
            graph,
            encoder_graph,
            sentence: r.sentence.clone(),
            alignment,
            arcs,
            linearized,
            coverage,
        })
    }

    /// Encoder node tokens in stored node order.
    pub fn node_tokens(&self) -> Vec<&str> {
        self.encoder_graph.nodes().iter().map(view_label).collect()
    }

    /// Re-draws the cached linearization with a random child order.
    pub fn relinearize(&mut self, task: Task, seed: u64, edge_labels: bool) -> Result<()> {
        self.linearized = linearize_view(task, &self.graph, ChildOrder::Random(seed), edge_labels)?;
        Ok(())
    }
}

/// All vocabularies a model is sized from.
#[derive(Clone, Debug)]
pub struct Vocabularies {
    pub nodes: Vocab,
    pub features: FeatureVocabulary,
    pub sentence: Vocab,
    pub graph: Vocab,
    pub labels: Vocab,
}

const FILES: [&str; 5] = ["nodes", "features", "sentence", "graph", "labels"];

impl Vocabularies {
    /// Builds from training examples. Tokens below `min_count` map to
    /// `<unk>`; arc labels are kept whatever their count.
    pub fn build(examples: &[AlignedExample], feature_capacity: usize, min_count: usize, edge_labels: bool) -> Self {
        let nodes = Vocab::nodes(examples.iter().flat_map(|e| e.node_tokens()), min_count);
        let features = FeatureVocabulary::build(examples.iter().map(|e| &e.encoder_graph), feature_capacity);
        let sentence = Vocab::sentence(
            examples.iter().flat_map(|e| e.sentence.iter().map(String::as_str)),
            min_count,
        );
        let graph = Vocab::graph(
            examples
                .iter()
                .flat_map(|e| e.linearized.tokens.iter().map(|t| t.text.as_str())),
            min_count,
        );
        let fixed = if edge_labels { COMPOUND_LABEL } else { PLACEHOLDER_LABEL };
        let labels = Vocab::labels(
            std::iter::once(fixed).chain(examples.iter().flat_map(|e| e.arcs.arcs.iter().map(|a| a.label.as_str()))),
        );
        Self {
            nodes,
            features,
            sentence,
            graph,
            labels,
        }
    }

    /// Encoder inputs: node tokens and the pair-feature matrix.
    pub fn encoder_inputs(&self, ex: &AlignedExample) -> (Vec<usize>, Vec<usize>) {
        self.graph_inputs(&ex.encoder_graph)
    }

    /// Encoder inputs for an already expanded encoder graph.
    pub fn graph_inputs(&self, encoder_graph: &LabeledGraph) -> (Vec<usize>, Vec<usize>) {
        let nodes = encoder_graph.nodes().iter().map(|n| self.nodes.encode(view_label(n))).collect();
        (nodes, self.features.pair_indices(encoder_graph))
    }

    pub fn graph_tokens(&self, lin: &LinearizedGraph) -> Vec<usize> {
        lin.tokens.iter().map(|t| self.graph.encode(&t.text)).collect()
    }

    pub fn instance(&self, ex: &AlignedExample) -> Result<Instance> {
        let (nodes, features) = self.encoder_inputs(ex);
        let arcs = ex
            .arcs
            .arcs
            .iter()
            .map(|a| {
                Ok(ArcTarget {
                    head: a.head,
                    label: self.labels.require(&a.label)?,
                    modifier: a.modifier,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Instance {
            nodes,
            features,
            sentence: ex.sentence.iter().map(|t| self.sentence.encode(t)).collect(),
            arcs,
            graph: self.graph_tokens(&ex.linearized),
        })
    }

    /// Writes `{nodes,features,sentence,graph,labels}.vocab` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut features = String::new();
        for e in self.features.entries() {
            features.push_str(e);
            features.push('\n');
        }
        let texts = [
            self.nodes.to_text(),
            features,
            self.sentence.to_text(),
            self.graph.to_text(),
            self.labels.to_text(),
        ];
        for (name, text) in FILES.iter().zip(texts) {
            fs::write(dir.join(format!("{name}.vocab")), text)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| fs::read_to_string(dir.join(format!("{name}.vocab")));
        let entries: Vec<String> = read("features")?.lines().map(String::from).collect();
        let features = FeatureVocabulary::from_entries(entries).ok_or_else(|| ModelError::Parse {
            line: 1,
            message: "feature vocabulary lacks its reserved entries".into(),
        })?;
        Ok(Self {
            nodes: Vocab::from_text(&read("nodes")?, 1)?,
            features,
            sentence: Vocab::from_text(&read("sentence")?, 3)?,
            graph: Vocab::from_text(&read("graph")?, 2)?,
            labels: Vocab::from_text(&read("labels")?, 0)?,
        })
    }
}
