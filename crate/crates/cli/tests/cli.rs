use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use smic::embedding_store::{read_embeddings, write_embeddings};
use smic::EmbeddingCollection;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_smic"))
}

fn smic(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn smic")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = smic(dir, args);
    assert!(
        out.status.success(),
        "smic {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Items mixing two of six fixed trigonometric directions.
fn collection(n: usize, dim: usize) -> EmbeddingCollection {
    let gen = |j: usize, d: usize| ((j + 1) as f64 * (d as f64 + 0.5) * 0.37).sin();
    let mut flat = Vec::with_capacity(n * dim);
    for i in 0..n {
        let (a, b) = (i % 6, (i * 7 + 1) % 6);
        let v: Vec<f64> = (0..dim)
            .map(|d| gen(a, d) * (1.0 + (i % 3) as f64) - 0.6 * gen(b, d) + 0.01 * ((i * d) as f64).cos())
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        flat.extend(v.iter().map(|x| (20.0 * x / norm) as f32));
    }
    EmbeddingCollection::from_flat(dim, flat).unwrap()
}

fn setup(n: usize) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("in.smeb");
    write_embeddings(&collection(n, 24), std::fs::File::create(&path).unwrap()).unwrap();
    (dir, path)
}

#[test]
fn preset_prints_parameters() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ok(dir.path(), &["preset", "medium"]).trim(), "n_a=128 lambda=0.2 b_dict=4 b_coef=4");
    assert_eq!(ok(dir.path(), &["preset", "low"]).trim(), "n_a=2 lambda=1.6 b_dict=2 b_coef=2");
    let bad = smic(dir.path(), &["preset", "turbo"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown preset"));
}

#[test]
fn preset_rate_matches_reference_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["rate", "--preset", "medium", "--sizes", "inf", "--csv", "rate.csv"]);
    assert!(text.contains("n* (model) = 562"), "{text}");
    let mut r = csv::Reader::from_path(dir.path().join("rate.csv")).unwrap();
    let row = r.records().next().unwrap().unwrap();
    assert_eq!(&row[0], "inf");
    let ratio: f64 = row[3].parse().unwrap();
    assert!((ratio - 90.9).abs() / 90.9 < 0.02, "ratio {ratio}");
    assert_eq!(&row[4], "-");
}

#[test]
fn learn_encode_decode_round_trip() {
    let (dir, _) = setup(60);
    let d = dir.path();
    let learned = ok(d, &["learn-dict", "in.smeb", "--atoms", "8", "--lambda", "0.1", "--seed", "5", "--bits-dict", "8", "--out", "d.smdc"]);
    assert!(learned.contains("seed=5"));
    ok(d, &["encode", "in.smeb", "--dict", "d.smdc", "--bits-coef", "8", "--out", "c.smcd"]);
    ok(d, &["decode", "c.smcd", "--dict", "d.smdc", "--norm", "20", "--out", "out.smeb"]);
    let original = read_embeddings(std::fs::File::open(d.join("in.smeb")).unwrap()).unwrap();
    let decoded = read_embeddings(std::fs::File::open(d.join("out.smeb")).unwrap()).unwrap();
    assert_eq!(decoded.len(), original.len());
    let mean_cos: f64 = original
        .items()
        .zip(decoded.items())
        .map(|(a, b)| smic::semantic_ops::cosine(&a, &b).unwrap())
        .sum::<f64>()
        / original.len() as f64;
    assert!(mean_cos > 0.9, "mean cosine {mean_cos}");

    let report = ok(d, &["rate", "--dict", "d.smdc", "--codes", "c.smcd", "--sizes", "60,inf"]);
    assert!(report.contains("measured: dictionary"), "{report}");
    assert!(report.contains("n_a=8 lambda=0.1 b_dict=8 b_coef=8"), "{report}");
}

#[test]
fn outputs_are_reproducible() {
    let (dir, _) = setup(40);
    let d = dir.path();
    for tag in ["a", "b"] {
        ok(d, &["learn-dict", "in.smeb", "--atoms", "6", "--lambda", "0.2", "--out", &format!("{tag}.smdc")]);
        ok(d, &["encode", "in.smeb", "--dict", &format!("{tag}.smdc"), "--bits-coef", "4", "--out", &format!("{tag}.smcd")]);
    }
    let read = |f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read("a.smdc"), read("b.smdc"));
    assert_eq!(read("a.smcd"), read("b.smcd"));
}

#[test]
fn decode_rejects_foreign_dictionary() {
    let (dir, _) = setup(30);
    let d = dir.path();
    ok(d, &["learn-dict", "in.smeb", "--atoms", "4", "--lambda", "0.1", "--seed", "1", "--out", "one.smdc"]);
    ok(d, &["learn-dict", "in.smeb", "--atoms", "4", "--lambda", "0.1", "--seed", "2", "--bits-dict", "4", "--out", "two.smdc"]);
    ok(d, &["encode", "in.smeb", "--dict", "one.smdc", "--bits-coef", "8", "--out", "c.smcd"]);
    let out = smic(d, &["decode", "c.smcd", "--dict", "two.smdc", "--out", "x.smeb"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dictionary mismatch"));
    assert!(!d.join("x.smeb").exists());
}

#[test]
fn training_subset_is_respected() {
    let (dir, _) = setup(50);
    let text = ok(dir.path(), &["learn-dict", "in.smeb", "--atoms", "4", "--lambda", "0.1", "--train-first", "10", "--out", "d.smdc"]);
    assert!(text.contains("trained on 10 items"), "{text}");
}

#[test]
fn sweep_then_hull() {
    let (dir, _) = setup(40);
    let d = dir.path();
    let text = ok(
        d,
        &[
            "sweep", "in.smeb", "--grid-na", "2,6", "--grid-lambda", "0.1,1", "--grid-bdict", "4,8", "--grid-bcoef", "2,8",
            "--sizes", "40,inf", "--seed", "3", "--out", "sweep.csv",
        ],
    );
    assert!(text.contains("seed=3"));
    let mut r = csv::Reader::from_path(d.join("sweep.csv")).unwrap();
    let headers = r.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), smic::rd_optimizer::CSV_HEADER.to_vec());
    assert_eq!(r.records().count(), 32);

    let hull = ok(d, &["hull", "sweep.csv", "--n", "inf", "--dim", "24"]);
    let mut lines = hull.lines();
    assert_eq!(lines.next().unwrap(), smic::rd_optimizer::CSV_HEADER.join(","));
    let rates: Vec<f64> = lines.map(|l| l.split(',').nth(6).unwrap().parse().unwrap()).collect();
    assert!(!rates.is_empty());
    assert!(rates.windows(2).all(|w| w[0] < w[1]));

    let model = ok(d, &["hull", "sweep.csv", "--n", "40", "--rate", "model", "--dim", "24", "--out", "h.csv"]);
    assert!(model.contains("hull points for n=40"));
}

#[test]
fn ops_and_projection() {
    let (dir, _) = setup(20);
    let d = dir.path();
    ok(d, &["ops", "add", "in.smeb#0", "in.smeb#3", "--alpha", "0.5", "--out", "sum.smeb"]);
    let sum = read_embeddings(std::fs::File::open(d.join("sum.smeb")).unwrap()).unwrap();
    assert_eq!(sum.len(), 1);
    assert!((sum.item(0).unwrap().norm() - 20.0).abs() < 1e-4);
    let bad = smic(d, &["ops", "sub", "in.smeb#0", "in.smeb#99", "--out", "x.smeb"]);
    assert!(!bad.status.success());

    ok(d, &["learn-dict", "in.smeb", "--atoms", "2", "--lambda", "0.5", "--out", "d.smdc"]);
    ok(d, &["project", "in.smeb", "--dict", "d.smdc", "--out-proj", "p.smeb", "--out-resid", "r.smeb"]);
    let p = read_embeddings(std::fs::File::open(d.join("p.smeb")).unwrap()).unwrap();
    let r = read_embeddings(std::fs::File::open(d.join("r.smeb")).unwrap()).unwrap();
    assert_eq!((p.len(), r.len()), (20, 20));
}

#[test]
fn usage_and_environment_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!smic(dir.path(), &["frobnicate"]).status.success());
    assert!(!smic(dir.path(), &["encode", "missing.smeb", "--dict", "x", "--bits-coef", "4", "--out", "y"]).status.success());
    let bad_threads = bin().current_dir(dir.path()).env("SMIC_THREADS", "many").args(["preset", "low"]).output().unwrap();
    assert!(!bad_threads.status.success());
    let one = bin().current_dir(dir.path()).env("SMIC_THREADS", "1").args(["preset", "low"]).output().unwrap();
    assert!(one.status.success());
}

#[test]
fn in_process_run_reports_to_writer() {
    let mut out = Vec::new();
    smic_cli::run(["smic", "preset", "high"], &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().trim(), "n_a=128 lambda=0.1 b_dict=16 b_coef=16");
    assert!(smic_cli::run(["smic", "rate"], &mut Vec::new()).is_err());
}
