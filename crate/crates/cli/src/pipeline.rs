//! preprocess, train and generate.

use std::fs;
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use mvae_model::data::{encoder_graph, parse_records, record_graph};
use mvae_model::generate::{encode_memory, generate as search, SearchMode};
use mvae_model::train::{derive_seed, write_loss_log};
use mvae_model::{
    AlignedExample, Corpus, Model, ModelConfig, Task, ViewOptions, Vocabularies,
};
use mvae_nn::{read_checkpoint, write_checkpoint, ParamStore};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::{echo, GenerateArgs, PreprocessArgs, TrainArgs, UsageError};

pub const EXAMPLES_FILE: &str = "examples.jsonl";
pub const SETTINGS_FILE: &str = "preprocess.json";
pub const CHECKPOINT_FILE: &str = "model.bin";
pub const LOSS_FILE: &str = "losses.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const VIEWS_FILE: &str = "views.json";

/// Written next to the preprocessed examples.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSettings {
    pub input: PathBuf,
    pub task: Task,
    pub edge_labels: bool,
    pub features_cap: usize,
    pub min_count: usize,
    pub random_linearization: bool,
    pub seed: u64,
    pub examples: usize,
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn preprocess(a: &PreprocessArgs) -> anyhow::Result<()> {
    let task: Task = a.task.into();
    echo("preprocess", a);
    let opts = ViewOptions {
        task,
        edge_labels: !a.no_edge_labels,
    };
    let records = parse_records(&read(&a.input)?).with_context(|| format!("parsing {}", a.input.display()))?;
    if records.is_empty() {
        bail!("{} holds no records", a.input.display());
    }
    let mut examples = Vec::with_capacity(records.len());
    for r in &records {
        let mut ex = AlignedExample::from_record(r, opts)?;
        if a.random_linearization {
            ex.relinearize(task, derive_seed(&[a.seed, examples.len() as u64]), opts.edge_labels)?;
        }
        examples.push(ex);
    }
    let vocabs = Vocabularies::build(&examples, a.features_cap, a.min_count, opts.edge_labels);
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    vocabs.save(&a.out)?;
    let path = a.out.join(EXAMPLES_FILE);
    let mut w = BufWriter::new(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    for ex in &examples {
        serde_json::to_writer(&mut w, ex)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    let settings = DataSettings {
        input: a.input.clone(),
        task,
        edge_labels: opts.edge_labels,
        features_cap: a.features_cap,
        min_count: a.min_count,
        random_linearization: a.random_linearization,
        seed: a.seed,
        examples: examples.len(),
    };
    write_json(&a.out.join(SETTINGS_FILE), &settings)?;
    let arcs: usize = examples.iter().map(|e| e.arcs.len()).sum();
    let dropped: usize = examples
        .iter()
        .map(|e| e.arcs.skipped_unaligned + e.arcs.skipped_collisions)
        .sum();
    eprintln!(
        "{} examples; vocabularies: {} nodes, {} paths, {} words, {} graph tokens, {} labels; {arcs} arcs ({dropped} dropped)",
        examples.len(),
        vocabs.nodes.len(),
        vocabs.features.len(),
        vocabs.sentence.len(),
        vocabs.graph.len(),
        vocabs.labels.len(),
    );
    Ok(())
}

fn load_corpus(dir: &Path) -> anyhow::Result<(Corpus, DataSettings)> {
    let settings: DataSettings = serde_json::from_str(&read(&dir.join(SETTINGS_FILE))?)
        .with_context(|| format!("parsing {}", dir.join(SETTINGS_FILE).display()))?;
    let vocabs = Vocabularies::load(dir).with_context(|| format!("loading vocabularies from {}", dir.display()))?;
    let path = dir.join(EXAMPLES_FILE);
    let mut examples = Vec::new();
    for (i, line) in read(&path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ex: AlignedExample =
            serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        examples.push(ex);
    }
    let views = ViewOptions {
        task: settings.task,
        edge_labels: settings.edge_labels,
    };
    Ok((Corpus::new(examples, vocabs, views)?, settings))
}

pub fn train(a: &TrainArgs) -> anyhow::Result<()> {
    let mut run = RunConfig::from_flat(&read(&a.config)?).with_context(|| format!("in {}", a.config.display()))?;
    if let Some(v) = a.alpha {
        run.model.alpha = v;
    }
    if let Some(v) = a.beta {
        run.model.beta = v;
    }
    if let Some(v) = a.steps {
        run.train.steps = v;
    }
    if let Some(v) = a.seed {
        run.train.seed = v;
    }
    if a.data.is_some() {
        run.data = a.data.clone();
    }
    if a.out.is_some() {
        run.out = a.out.clone();
    }
    run.validate()?;
    let (Some(data), Some(out)) = (run.data.clone(), run.out.clone()) else {
        return Err(UsageError("both a data and an output directory are required".into()).into());
    };
    let (corpus, settings) = load_corpus(&data)?;
    run.train.random_linearization |= settings.random_linearization;
    run.model = corpus.size(&run.model);
    let mut header = run.to_flat();
    header.insert("task".into(), Value::String(settings.task.to_string()));
    echo("train", &header);

    let log_every = a.log_every;
    let trained = mvae_model::train::<f32>(&corpus, &run.model, &run.train, |p| {
        let l = &p.log.loss;
        if log_every > 0 && (p.log.step % log_every == 0 || p.log.step == 1) {
            eprintln!(
                "step {} lr {:.3e} l_base {:.4} l_auto1 {:.4} l_auto2 {:.4} l_final {:.4}",
                p.log.step, p.log.lr, l.l_base, l.l_auto1, l.l_auto2, l.l_final
            );
        }
        ControlFlow::Continue(())
    })?;

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let ckpt = out.join(CHECKPOINT_FILE);
    write_checkpoint(&trained.store, BufWriter::new(fs::File::create(&ckpt)?))
        .with_context(|| format!("writing {}", ckpt.display()))?;
    write_loss_log(&trained.log, BufWriter::new(fs::File::create(out.join(LOSS_FILE))?))?;
    write_json(&out.join(CONFIG_FILE), &header)?;
    write_json(&out.join(VIEWS_FILE), &corpus.views)?;
    corpus.vocabs.save(&out)?;
    if let Some(last) = trained.log.last() {
        eprintln!("finished after {} steps; last l_final {:.4}", last.step, last.loss.l_final);
    }
    Ok(())
}

/// A trained model with everything needed to run it.
pub struct Loaded {
    pub model: Model,
    pub store: ParamStore<f32>,
    pub vocabs: Vocabularies,
    pub views: ViewOptions,
}

pub fn load_model(ckpt: &Path) -> anyhow::Result<Loaded> {
    let dir = ckpt.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let path = dir.join(CONFIG_FILE);
    let mut flat: serde_json::Map<String, Value> =
        serde_json::from_str(&read(&path)?).with_context(|| format!("parsing {}", path.display()))?;
    // The saved header carries `task`, which is not a run setting.
    flat.remove("task");
    let cfg: ModelConfig = RunConfig::from_flat(&Value::Object(flat).to_string())?.model;
    let views: ViewOptions = serde_json::from_str(&read(&dir.join(VIEWS_FILE))?)?;
    let vocabs = Vocabularies::load(dir)?;
    let file = fs::File::open(ckpt).with_context(|| format!("opening {}", ckpt.display()))?;
    let store = read_checkpoint::<f32, _>(std::io::BufReader::new(file))
        .with_context(|| format!("reading {}", ckpt.display()))?;
    let model = Model::bind(&cfg, &store)?;
    Ok(Loaded {
        model,
        store,
        vocabs,
        views,
    })
}

pub fn generate(a: &GenerateArgs) -> anyhow::Result<()> {
    echo("generate", a);
    let m = load_model(&a.model)?;
    let mode = match a.beam {
        Some(w) => SearchMode::Beam(w as usize),
        None => SearchMode::Greedy,
    };
    let records = parse_records(&read(&a.input)?).with_context(|| format!("parsing {}", a.input.display()))?;
    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for r in &records {
        let g = record_graph(r, m.views.task).with_context(|| format!("record {}", r.id))?;
        let (nodes, features) = m.vocabs.graph_inputs(&encoder_graph(m.views.task, &g));
        let memory = encode_memory(&m.model, &m.store, &nodes, &features)?;
        let hyp = search(&m.model, &m.store, &memory, mode, a.max_len)?;
        if hyp.truncated {
            eprintln!("warning: {} reached the length limit of {} tokens", r.id, a.max_len);
        }
        let words: Vec<&str> = hyp.tokens.iter().map(|&t| m.vocabs.sentence.token(t)).collect();
        writeln!(out, "{}", words.join(" "))?;
    }
    out.flush()?;
    Ok(())
}
