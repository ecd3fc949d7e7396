//! evaluate, views and gradcheck.

use std::fs;
use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context};
use mvae_core::views::{all_pair_paths, ChildOrder};
use mvae_core::LabeledGraph;
use mvae_model::bleu::tokenize_lines;
use mvae_model::data::{encoder_graph, linearize_view, parse_records, record_graph};
use mvae_model::layers::{Dropout, Session};
use mvae_model::{
    corpus_bleu, relation_recall, AlignedExample, Corpus, Model, ModelConfig, ModelError, Objective, Record, Task,
    ViewOptions, Vocabularies,
};
use mvae_nn::{grad_check, NnError};
use serde::Serialize;

use crate::{echo, EvaluateArgs, GradcheckArgs, GraphInput, UsageError, ViewsCommand};

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn evaluate(a: &EvaluateArgs) -> anyhow::Result<()> {
    echo("evaluate", a);
    let refs = tokenize_lines(&read(&a.refs)?);
    let hyps = tokenize_lines(&read(&a.hyps)?);
    let score = corpus_bleu(&refs, &hyps)?;
    println!("{score}");
    if let Some(path) = &a.relation_recall {
        let records = parse_records(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
        let graphs = records
            .iter()
            .map(|r| record_graph(r, Task::Amr).with_context(|| format!("record {}", r.id)))
            .collect::<anyhow::Result<Vec<LabeledGraph>>>()?;
        let refs: Vec<&LabeledGraph> = graphs.iter().collect();
        let report = relation_recall(&refs, &hyps)?;
        match report.recall() {
            Some(r) => println!(
                "Relation recall = {:.2} ({}/{} interactions, {} graphs without any)",
                100.0 * r,
                report.preserved,
                report.interactions,
                report.skipped
            ),
            None => println!("Relation recall = n/a (no interactions in {} graphs)", report.skipped),
        }
    }
    Ok(())
}

fn graph_text(input: &GraphInput) -> anyhow::Result<String> {
    match &input.graph {
        Some(t) if t != "-" => Ok(t.clone()),
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).context("reading standard input")?;
            Ok(s)
        }
    }
}

/// Parses a graph argument through the same path as a dataset record.
fn input_graph(input: &GraphInput) -> anyhow::Result<(Task, LabeledGraph)> {
    let text = graph_text(input)?;
    let task: Task = input.task.into();
    let record = match task {
        Task::Amr => Record {
            id: "input".into(),
            graph: Some(text),
            triples: None,
            sentence: Vec::new(),
            alignments: None,
        },
        Task::Kg => Record {
            id: "input".into(),
            graph: None,
            triples: Some(text.lines().filter(|l| !l.trim().is_empty()).map(String::from).collect()),
            sentence: Vec::new(),
            alignments: None,
        },
    };
    Ok((task, record_graph(&record, task)?))
}

pub fn views(v: &ViewsCommand) -> anyhow::Result<()> {
    match v {
        ViewsCommand::Linearize {
            input,
            no_edge_labels,
            order_seed,
        } => {
            #[derive(Serialize)]
            struct Echo<'a> {
                task: crate::TaskArg,
                edge_labels: bool,
                order_seed: &'a Option<u64>,
            }
            echo(
                "views linearize",
                &Echo {
                    task: input.task,
                    edge_labels: !no_edge_labels,
                    order_seed,
                },
            );
            let (task, g) = input_graph(input)?;
            let order = order_seed.map_or(ChildOrder::Input, ChildOrder::Random);
            println!("{}", linearize_view(task, &g, order, !no_edge_labels)?.to_text());
        }
        ViewsCommand::Ground {
            input,
            task,
            no_edge_labels,
        } => {
            echo(
                "views ground",
                &serde_json::json!({"input": input, "task": task, "edge_labels": !no_edge_labels}),
            );
            let opts = ViewOptions {
                task: (*task).into(),
                edge_labels: !no_edge_labels,
            };
            let records = parse_records(&read(input)?).with_context(|| format!("parsing {}", input.display()))?;
            for r in &records {
                let ex = AlignedExample::from_record(r, opts)?;
                println!("# {}", ex.id);
                print!("{}", ex.arcs.to_tsv());
                if let Some(c) = ex.coverage {
                    println!("# matched {:.1}% of nodes", 100.0 * c);
                }
            }
        }
        ViewsCommand::Paths { input } => {
            echo("views paths", &serde_json::json!({ "task": input.task }));
            let (task, g) = input_graph(input)?;
            let g = encoder_graph(task, &g);
            let paths = all_pair_paths(&g);
            for (i, row) in paths.iter().enumerate() {
                for (j, p) in row.iter().enumerate() {
                    let (a, b) = (g.node(i), g.node(j));
                    println!("{}/{}\t{}/{}\t{p}", a.id, a.label, b.id, b.label);
                }
            }
        }
    }
    Ok(())
}

/// Three-node graph and four-token sentence with every loss term active.
fn toy_corpus() -> anyhow::Result<Corpus> {
    let record: Record = serde_json::from_str(
        r#"{"id":"toy","graph":"(w / want-01 :ARG0 (b / boy) :ARG1 (g / girl))",
            "sentence":["boy","wants","girl","."],
            "alignments":{"w":[1],"b":[0],"g":[2]}}"#,
    )?;
    let views = ViewOptions {
        task: Task::Amr,
        edge_labels: true,
    };
    let ex = AlignedExample::from_record(&record, views)?;
    let vocabs = Vocabularies::build(std::slice::from_ref(&ex), 100, 1, true);
    Ok(Corpus::new(vec![ex], vocabs, views)?)
}

pub fn gradcheck(a: &GradcheckArgs) -> anyhow::Result<()> {
    echo("gradcheck", a);
    if a.dims == 0 {
        return Err(UsageError("--dims must be positive".into()).into());
    }
    let corpus = toy_corpus()?;
    let cfg = corpus.size(&ModelConfig {
        layers: 1,
        heads: if a.dims % 2 == 0 { 2 } else { 1 },
        d_model: a.dims,
        d_ff: a.dims,
        arc_mlp: 4,
        label_mlp: 4,
        dropout: 0.0,
        ..ModelConfig::default()
    });
    let (model, mut store) = Model::init::<f64>(&cfg, a.seed)?;
    let inst = &corpus.instances[0];
    let mut failure = None;
    let report = grad_check(&mut store, a.eps, |tape, store| {
        let mut s = Session::new(store);
        match model.batch_loss(&mut s, &[inst], Objective::Full, |_| (Dropout::off(), Dropout::off())) {
            Ok((nodes, _)) => {
                std::mem::swap(tape, &mut s.tape);
                Ok(nodes.l_final)
            }
            Err(ModelError::Nn(e)) => Err(e),
            Err(e) => {
                let msg = e.to_string();
                failure = Some(e);
                Err(NnError::Checkpoint(msg))
            }
        }
    });
    if let Some(e) = failure {
        return Err(e.into());
    }
    let report = report?;
    println!(
        "max relative error {:.3e} at {}[{}] over {} coordinates",
        report.max_rel_error, report.worst_param, report.worst_index, report.coordinates
    );
    if report.max_rel_error > a.tolerance {
        bail!("gradient check failed: {:.3e} exceeds {:.1e}", report.max_rel_error, a.tolerance);
    }
    Ok(())
}
