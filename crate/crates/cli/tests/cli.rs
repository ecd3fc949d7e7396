use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mvae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvae")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn preprocess(dir: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.join("data");
    let input = data("amr.jsonl");
    let mut args = vec!["preprocess", "--input", &input, "--task", "amr", "--out", path(&out)];
    args.extend_from_slice(extra);
    let o = mvae(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn train(dir: &Path, data: &Path, name: &str, extra: &[&str]) -> (Output, PathBuf) {
    let out = dir.join(name);
    let config = self::data("tiny.json");
    let mut args = vec!["train", "--config", &config, "--data", path(data), "--out", path(&out)];
    args.extend_from_slice(extra);
    (mvae(&args), out)
}

#[test]
fn linearize_single_node() {
    let o = mvae(&["views", "linearize", "(b / boy)"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "( boy )\n");
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("mvae views linearize: {"));
}

#[test]
fn views_without_labels_and_paths() {
    let g = "(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02 :ARG0 b))";
    let o = mvae(&["views", "linearize", g, "--no-edge-labels"]);
    assert_eq!(stdout(&o), "( want ( boy ) ( go boy ) )\n");
    let o = mvae(&["views", "paths", "(w / want-01 :ARG0 (b / boy) :ARG1 (g / girl))"]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 9);
    assert!(text.contains("b/boy\tg/girl\t:ARG0↑ :ARG1↓\n"));
    let o = mvae(&["views", "ground", "--input", &data("kg.jsonl"), "--task", "kg"]);
    assert!(stdout(&o).starts_with("# k1\n0\tfollowedBy\t6\n0\tcompound\t1\n"));
}

#[test]
fn evaluate_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("x.txt");
    fs::write(&f, "the boy wants to go .\nthe girl sees the cat .\n").unwrap();
    let o = mvae(&["evaluate", "--refs", path(&f), "--hyps", path(&f)]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("BLEU = 100.00,"));
}

#[test]
fn evaluate_with_relation_recall() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("refs.txt");
    let hyps = dir.path().join("hyps.txt");
    fs::write(&refs, "the boy wants to go .\nthe girl sees the cat .\nthe boy likes the black cat .\nthe girl asks the boy to read .\n").unwrap();
    // Matching is on exact words, so the hypotheses use the concept forms.
    fs::write(&hyps, "the boy want to go .\nthe cat see the girl .\nthe boy like the black cat .\nthe girl ask the boy to read .\n").unwrap();
    let o = mvae(&["evaluate", "--refs", path(&refs), "--hyps", path(&hyps), "--relation-recall", &data("amr.jsonl")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // Interactions: (boy, want, go), (girl, see, cat), (boy, like, cat),
    // (girl, ask, read); the second sentence swaps its pair.
    assert!(stdout(&o).contains("Relation recall = 75.00 (3/4 interactions, 0 graphs without any)"));
    fs::write(&hyps, "one line\n").unwrap();
    let o = mvae(&["evaluate", "--refs", path(&refs), "--hyps", path(&hyps)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn zero_weights_leave_the_base_loss() {
    let dir = tempfile::tempdir().unwrap();
    let d = preprocess(dir.path(), &[]);
    let (o, out) = train(dir.path(), &d, "m", &["--alpha", "0", "--beta", "0", "--steps", "6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = fs::read_to_string(out.join("losses.csv")).unwrap();
    let mut rows = 0;
    for line in log.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1], f[4], "{line}");
        assert!(f[2].parse::<f64>().unwrap() > 0.0 && f[3].parse::<f64>().unwrap() > 0.0);
        rows += 1;
    }
    assert_eq!(rows, 6);
    let header = String::from_utf8_lossy(&o.stderr);
    assert!(header.contains("\"alpha\":0.0") && header.contains("\"beta\":0.0"));
}

#[test]
fn train_is_reproducible_and_generates() {
    let dir = tempfile::tempdir().unwrap();
    let d = preprocess(dir.path(), &[]);
    let (a, out_a) = train(dir.path(), &d, "a", &[]);
    let (b, out_b) = train(dir.path(), &d, "b", &[]);
    assert!(a.status.success() && b.status.success());
    for f in ["model.bin", "losses.csv", "labels.vocab"] {
        assert_eq!(fs::read(out_a.join(f)).unwrap(), fs::read(out_b.join(f)).unwrap(), "{f}");
    }
    let ckpt = out_a.join("model.bin");
    for extra in [&[][..], &["--beam", "2"][..]] {
        let mut args = vec!["generate", "--model", path(&ckpt)];
        let input = data("amr.jsonl");
        args.extend_from_slice(&["--input", &input]);
        args.extend_from_slice(extra);
        let o = mvae(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stdout(&o).lines().count(), 4);
    }
}

#[test]
fn kg_preprocessing_without_labels() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kg");
    let o = mvae(&[
        "preprocess", "--input", &data("kg.jsonl"), "--task", "kg", "--out", path(&out),
        "--no-edge-labels", "--random-linearization", "--seed", "4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out.join("labels.vocab")).unwrap(), "<arc>\n");
    let settings = fs::read_to_string(out.join("preprocess.json")).unwrap();
    assert!(settings.contains("\"random_linearization\": true"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"layers": 1, "warmup_steps": 5}"#).unwrap();
    let d = dir.path().to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["train", "--config", path(&cfg), "--data", d, "--out", d],
        vec!["nonsense"],
        vec!["views", "linearize", "(b / boy)", "--task", "xml"],
        vec!["generate", "--model", "m.bin", "--input", "x", "--beam", "0"],
        vec!["gradcheck", "--dims", "0"],
    ];
    for args in cases {
        let o = mvae(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(o.stdout.is_empty());
        assert!(!o.stderr.is_empty());
    }
    let tiny = data("tiny.json");
    let o = mvae(&["train", "--config", &tiny, "--data", d, "--out", d, "--alpha", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = mvae(&["train", "--config", &tiny]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    let o = mvae(&["evaluate", "--refs", path(&missing), "--hyps", path(&missing)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error: reading"));
    let o = mvae(&["views", "linearize", "(b / boy"]);
    assert_eq!(o.status.code(), Some(1));
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"id\":\"x\",\"graph\":\"(a / b)\",\"sentence\":[\"a\"],\"extra\":1}\n").unwrap();
    let o = mvae(&["preprocess", "--input", path(&bad), "--task", "amr", "--out", path(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn gradcheck_passes() {
    let o = mvae(&["gradcheck", "--dims", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("max relative error"));
}
