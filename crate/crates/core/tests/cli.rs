use std::fs;
use std::path::Path;
use std::process::Command;

use gefa::cli::{self, RunConfig};
use gefa::protein::EmbeddingMode;
use gefa::synth::{write_toy_dataset, ToySpec};
use gefa::traineval::{make_split, metrics, predict_pairs, MetricSet, Part};

const EMBED: usize = 4;

fn toy(root: &Path, drugs: usize, targets: usize) {
    write_toy_dataset(
        root,
        &ToySpec {
            drugs,
            targets,
            embedding_dim: EMBED,
            seed: 4,
            ..ToySpec::default()
        },
    )
    .unwrap();
}

fn small_args(data: &Path, out: &Path) -> Vec<String> {
    [
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--epochs",
        "3",
        "--batch-size",
        "4",
        "--set",
        "hidden=8",
        "--set",
        "attention_dim=4",
        "--set",
        "predictor_hidden1=8",
        "--set",
        "predictor_hidden2=4",
        "--set",
        "residual_repeat=1",
        "--set",
        &format!("embedding_dim={EMBED}"),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn run(args: &[String]) -> (i32, String) {
    let mut out = Vec::new();
    let mut full = vec!["gefa".to_string()];
    full.extend_from_slice(args);
    let code = cli::run(full, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gefa"))
        .args(args)
        .output()
        .unwrap()
}

fn with(mut base: Vec<String>, extra: &[&str]) -> Vec<String> {
    base.extend(extra.iter().map(|s| s.to_string()));
    base
}

#[test]
fn prepare_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    toy(&data, 4, 3);
    let (code, out) = run(&with(small_args(&data, dir.path()), &["prepare"]));
    assert_eq!(code, 0, "{out}");
    let manifest = fs::read_to_string(data.join(cli::MANIFEST_FILE)).unwrap();
    assert_eq!(manifest, out);
    assert!(manifest.contains("usable_pairs\t12\n"), "{manifest}");
    assert!(manifest.contains("drugs\t4\n") && manifest.contains("targets\t3\n"));
}

#[test]
fn prepare_reports_every_bad_record() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    toy(&data, 4, 3);
    let drugs = fs::read_to_string(data.join("drugs.tsv")).unwrap();
    let bad = drugs.replacen(
        &drugs
            .lines()
            .nth(1)
            .unwrap()
            .split('\t')
            .nth(1)
            .unwrap()
            .to_string(),
        "CC(C",
        1,
    );
    fs::write(data.join("drugs.tsv"), bad).unwrap();
    fs::remove_file(data.join("targets/T002/contact.tsv")).unwrap();

    let out = bin(&[
        "prepare",
        "--data",
        data.to_str().unwrap(),
        "--set",
        "embedding_dim=4",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("drug D001") && err.contains("byte"), "{err}");
    assert!(err.contains("T002"), "{err}");
    assert!(!data.join(cli::MANIFEST_FILE).exists());
}

#[test]
fn train_eval_predict_inspect_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out_dir = dir.path().join("run");
    toy(&data, 5, 4);
    let base = small_args(&data, &out_dir);

    let (code, out) = run(&with(base.clone(), &["train"]));
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("best_epoch"));
    let history = fs::read_to_string(out_dir.join("history.tsv")).unwrap();
    assert!(history.starts_with("epoch\ttrain_mse\tval_mse\tlr\n"));
    assert_eq!(history.lines().count(), 4);

    // Eval output equals library metrics on the same predictions.
    let (code, out) = run(&with(base.clone(), &["eval", "--split", "val"]));
    assert_eq!(code, 0, "{out}");
    let mut cfg = RunConfig::default();
    for kv in [
        "hidden=8",
        "attention_dim=4",
        "predictor_hidden1=8",
        "predictor_hidden2=4",
        "residual_repeat=1",
    ] {
        let (k, v) = kv.split_once('=').unwrap();
        cfg.set(k, v).unwrap();
    }
    cfg.data = data.clone();
    cfg.out = out_dir.clone();
    cfg.embedding_dim = EMBED;
    let model = cli::load_model(&cfg, &cfg.checkpoint_path()).unwrap();
    let ds = gefa::traineval::AffinityDataset::load(&data).unwrap();
    let prepared = gefa::traineval::prepare(&ds, cfg.embedding_spec(), cfg.execution).unwrap();
    let split = make_split(&ds, &cfg.split_spec()).unwrap();
    let pred = predict_pairs(&model, &prepared, split.part(Part::Val), cfg.execution).unwrap();
    let expected = MetricSet::compute(&pred, &prepared.truths(&split.val)).unwrap();
    assert_eq!(
        out,
        format!("{}\n{}\n", MetricSet::TSV_HEADER, expected.tsv_row())
    );
    assert_eq!(
        expected.mse,
        metrics::mse(&pred, &prepared.truths(&split.val)).unwrap()
    );

    let (code, out) = run(&with(base.clone(), &["predict"]));
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 1 + 20);

    let (code, out) = run(&with(
        base.clone(),
        &["inspect-attention", "--drug", "D000", "--target", "T001"],
    ));
    assert_eq!(code, 0, "{out}");
    let rows: Vec<(usize, f64)> = out
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), ds.targets["T001"].sequence.len());
    assert!(rows.iter().enumerate().all(|(i, r)| r.0 == i));
    let total: f64 = rows.iter().map(|r| r.1).sum();
    assert!((total - 1.0).abs() < 1e-9);
    // Top residue agrees with the library call.
    let gefa::fusion::Model::Gefa(g) = &model else {
        panic!()
    };
    let target =
        gefa::protein::load_target(&data.join("targets/T001"), EmbeddingMode::File, EMBED).unwrap();
    let drug = prepared.drugs[0].clone();
    let lib = g.attention_weights(&drug, &target).unwrap();
    let argmax = |v: &[f64]| {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0
    };
    assert_eq!(
        argmax(&rows.iter().map(|r| r.1).collect::<Vec<_>>()),
        argmax(&lib)
    );

    let (code, _) = run(&with(
        base.clone(),
        &["inspect-attention", "--drug", "D999", "--target", "T001"],
    ));
    assert_eq!(code, 2);
}

#[test]
fn glfa_via_model_flag() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out_dir = dir.path().join("run");
    toy(&data, 5, 4);
    let base = with(small_args(&data, &out_dir), &["--model", "glfa"]);
    assert_eq!(run(&with(base.clone(), &["train"])).0, 0);
    let (code, out) = run(&with(base.clone(), &["eval"]));
    assert_eq!(code, 0, "{out}");
    // Attention does not exist in the late-fusion model.
    assert_eq!(
        run(&with(
            base,
            &["inspect-attention", "--drug", "D000", "--target", "T000"]
        ))
        .0,
        1
    );
}

#[test]
fn checkpoint_dimension_mismatch_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out_dir = dir.path().join("run");
    toy(&data, 5, 4);
    let base = small_args(&data, &out_dir);
    assert_eq!(run(&with(base.clone(), &["train"])).0, 0);
    let (code, _) = run(&with(base, &["--set", "hidden=6", "eval"]));
    assert_eq!(code, 2);
}

#[test]
fn exit_codes() {
    assert_eq!(bin(&["parse-smiles", "c1ccccc1"]).status.code(), Some(0));
    let ok = bin(&["parse-smiles", "CC(=O)O"]);
    assert_eq!(String::from_utf8_lossy(&ok.stdout), "atoms\t4\nbonds\t3\n");
    let bad = bin(&["parse-smiles", "C1CC"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("byte"));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bin(&["--regime", "tepid", "train"]).status.code(), Some(1));
    assert_eq!(bin(&["--set", "bogus=1", "train"]).status.code(), Some(1));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "epochs = 2\nmystery = 1\n").unwrap();
    let out = bin(&["--config", conf.to_str().unwrap(), "train"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mystery"));

    // Missing dataset is a data error.
    let out = bin(&[
        "--data",
        dir.path().join("nothing").to_str().unwrap(),
        "train",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_cold_split_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    toy(&data, 2, 4);
    let (code, _) = run(&with(
        small_args(&data, dir.path()),
        &["--regime", "cold-drug", "train"],
    ));
    assert_eq!(code, 2);
}
