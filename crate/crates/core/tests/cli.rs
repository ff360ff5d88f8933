use std::path::{Path, PathBuf};

use charrnn::cli;
use charrnn::trainer::read_history;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn charrnn(args: &[&str]) -> Output {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(std::iter::once("charrnn").chain(args.iter().copied()), &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small, fast training invocation on the 1 KB fixture.
fn train_args<'a>(ckpt: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![
        "train", "--model", "lstm", "--preset", "uni", "--scale", "0.03125", "--seq-len", "50",
        "--batch-size", "4", "--embed-dim", "8", "--out", ckpt,
    ];
    if !extra.contains(&"--seed") {
        args.extend(["--seed", "5"]);
    }
    args.extend_from_slice(extra);
    args
}

#[test]
fn vocab_table_matches_golden_file() {
    let out = charrnn(&["vocab", "--corpus", p(&data("controls.txt"))]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(out.stdout, golden("controls_vocab.txt"));
    assert!(out.stderr.is_empty());
}

#[test]
fn vocab_is_stable_and_counts_distinct_characters() {
    let dir = tempfile::tempdir().unwrap();
    let abc = dir.path().join("abc.txt");
    std::fs::write(&abc, "cabbac").unwrap();
    let out = charrnn(&["vocab", "--corpus", p(&abc)]);
    assert!(out.stdout.starts_with("V=3\n"));

    let tiny = fixture("tiny.txt");
    let first = charrnn(&["vocab", "--corpus", p(&tiny)]).stdout;
    assert_eq!(first, charrnn(&["vocab", "--corpus", p(&tiny)]).stdout);
}

#[test]
fn vocab_reports_missing_and_invalid_corpora() {
    let out = charrnn(&["vocab", "--corpus", "/nonexistent/corpus.txt"]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("/nonexistent/corpus.txt"));
    assert!(out.stdout.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, b"ok\xff").unwrap();
    let out = charrnn(&["vocab", "--corpus", p(&bad)]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("offset 2"), "{}", out.stderr);
}

#[test]
fn missing_preset_lists_the_valid_ones() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("m.crnf");
    let out = charrnn(&["train", "--corpus", p(&fixture("tiny.txt")), "--model", "lstm", "--out", p(&ckpt)]);
    assert_eq!(out.code, 2);
    for name in ["uni", "bi", "quad"] {
        assert!(out.stderr.contains(name), "{}", out.stderr);
    }
    assert!(!ckpt.exists());
}

#[test]
fn unknown_flags_are_usage_errors() {
    let out = charrnn(&["vocab", "--corpus", "x", "--bogus"]);
    assert_eq!(out.code, 2);
    let out = charrnn(&["train", "--corpus", "x", "--model", "rnn", "--preset", "uni", "--out", "y"]);
    assert_eq!(out.code, 2);
}

#[test]
fn one_epoch_writes_one_history_row() {
    let dir = tempfile::tempdir().unwrap();
    let (ckpt, hist) = (dir.path().join("m.crnf"), dir.path().join("h.csv"));
    let corpus = fixture("tiny.txt");
    let mut args = train_args(p(&ckpt), &["--epochs", "1", "--history", p(&hist)]);
    args.extend(["--corpus", p(&corpus)]);
    let out = charrnn(&args);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(std::fs::read_to_string(&hist).unwrap().lines().count(), 2);
    assert_eq!(read_history(&hist).unwrap().rows.len(), 1);
    assert!(out.stdout.starts_with("epoch 1  loss "), "{}", out.stdout);
    assert!(out.stdout.contains("  ms/step "));
    assert!(ckpt.exists());
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture("tiny.txt");
    let mut bytes = Vec::new();
    for name in ["a.crnf", "b.crnf"] {
        let ckpt = dir.path().join(name);
        let mut args = train_args(p(&ckpt), &["--epochs", "2"]);
        args.extend(["--corpus", p(&corpus)]);
        assert_eq!(charrnn(&args).code, 0);
        bytes.push(std::fs::read(&ckpt).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);

    let other = dir.path().join("c.crnf");
    let mut args = train_args(p(&other), &["--epochs", "2", "--seed", "6"]);
    args.extend(["--corpus", p(&corpus)]);
    assert_eq!(charrnn(&args).code, 0);
    assert_ne!(std::fs::read(&other).unwrap(), bytes[0]);
}

#[test]
fn failed_training_leaves_no_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("m.crnf");
    // 1 KB cannot fill a batch of 64 windows of 100 characters.
    let out = charrnn(&[
        "train", "--corpus", p(&fixture("tiny.txt")), "--model", "gru", "--preset", "uni", "--scale", "0.01",
        "--epochs", "1", "--out", p(&ckpt),
    ]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("batch"), "{}", out.stderr);
    assert!(!ckpt.exists());
}

fn trained_checkpoint(dir: &Path) -> PathBuf {
    let ckpt = dir.join("m.crnf");
    let corpus = fixture("tiny.txt");
    let mut args = train_args(p(&ckpt), &["--epochs", "2"]);
    args.extend(["--corpus", p(&corpus)]);
    assert_eq!(charrnn(&args).code, 0);
    ckpt
}

#[test]
fn generate_with_zero_length_prints_the_prime() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = trained_checkpoint(dir.path());
    let out = charrnn(&["generate", "--checkpoint", p(&ckpt), "--prime", "ARYA: ", "--length", "0"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(out.stdout, "ARYA: ");
}

#[test]
fn argmax_generation_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = trained_checkpoint(dir.path());
    let args = ["generate", "--checkpoint", p(&ckpt), "--prime", "JON", "--length", "80", "--mode", "argmax"];
    let first = charrnn(&args);
    assert_eq!(first.code, 0, "{}", first.stderr);
    assert_eq!(first.stdout.chars().count(), 83);
    assert_eq!(first.stdout, charrnn(&args).stdout);

    let to_file = dir.path().join("out.txt");
    let mut with_out = args.to_vec();
    with_out.extend(["--out", p(&to_file)]);
    let out = charrnn(&with_out);
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&to_file).unwrap(), first.stdout);
}

#[test]
fn seeded_sampling_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = trained_checkpoint(dir.path());
    let run = |seed: &str| charrnn(&["generate", "--checkpoint", p(&ckpt), "--prime", "A", "--length", "60", "--seed", seed]).stdout;
    assert_eq!(run("3"), run("3"));
}

#[test]
fn non_positive_temperature_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = trained_checkpoint(dir.path());
    for t in ["0", "-1"] {
        let out = charrnn(&["generate", "--checkpoint", p(&ckpt), "--prime", "A", "--temperature", t]);
        assert_eq!(out.code, 2, "temperature {t}");
        assert!(out.stderr.contains("temperature"), "{}", out.stderr);
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn prime_outside_the_vocabulary_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = trained_checkpoint(dir.path());
    let out = charrnn(&["generate", "--checkpoint", p(&ckpt), "--prime", "zebra#"]);
    assert_eq!(out.code, 1);
    assert!(out.stdout.is_empty());
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = trained_checkpoint(dir.path());
    let mut bytes = std::fs::read(&ckpt).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    std::fs::write(&ckpt, &bytes).unwrap();
    let out = charrnn(&["generate", "--checkpoint", p(&ckpt), "--prime", "A"]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("checksum"), "{}", out.stderr);
}

#[test]
fn report_tags_a_single_run() {
    let out = charrnn(&["report", "--history", p(&data("gru.csv"))]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let lines: Vec<&str> = out.stdout.lines().collect();
    assert_eq!(lines[0], "run,epoch,mean_loss,ms_per_step");
    assert_eq!(lines.len(), 4);
    let input = std::fs::read_to_string(data("gru.csv")).unwrap();
    for (merged, original) in lines[1..].iter().zip(input.lines().skip(1)) {
        assert_eq!(*merged, format!("gru,{original}"));
    }
}

#[test]
fn report_merges_three_runs_into_golden_table() {
    let out = charrnn(&[
        "report", "--history", p(&data("lstm.csv")), p(&data("gru.csv")), p(&data("birnn.csv")),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(out.stdout, golden("report.csv"));
    assert_eq!(out.stdout.lines().count(), 1 + 3 + 3 + 3);

    let dir = tempfile::tempdir().unwrap();
    let merged = dir.path().join("merged.csv");
    let out = charrnn(&["report", "--history", p(&data("lstm.csv")), p(&data("gru.csv")), p(&data("birnn.csv")), "--out", p(&merged)]);
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(merged).unwrap(), golden("report.csv"));
}

#[test]
fn malformed_history_reports_the_line() {
    let out = charrnn(&["report", "--history", p(&data("lstm.csv")), p(&data("malformed.csv"))]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("line 3"), "{}", out.stderr);
    assert!(out.stdout.is_empty());
}

#[test]
fn report_requires_a_history_file() {
    assert_eq!(charrnn(&["report"]).code, 2);
}
