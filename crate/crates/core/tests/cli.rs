use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const MANIFEST: &str = "mixkit_manifest_version = 1
clip_samples = 800
eval_examples = 4
mom_examples = 2
min_sources = 1
max_sources = 2
kinds = tone,chirp
";

fn mixkit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixkit")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = mixkit(args, cwd);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn corpus(dir: &Path) {
    fs::write(dir.join("m.cfg"), MANIFEST).unwrap();
    ok(&["gen-data", "--manifest", "m.cfg", "--out", "d", "--seed", "7"], dir);
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = rows[0].iter().position(|h| h == name).unwrap();
    rows[1..].iter().map(|r| r[i].clone()).collect()
}

#[test]
fn gen_data_prints_a_stable_hash() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("m.cfg"), MANIFEST).unwrap();
    let a = ok(&["gen-data", "--manifest", "m.cfg", "--out", "a", "--seed", "7"], tmp.path());
    let b = ok(&["gen-data", "--manifest", "m.cfg", "--out", "b", "--seed", "7"], tmp.path());
    assert_eq!(a, b);
    assert_eq!(a.trim().len(), 64);
    let c = ok(&["gen-data", "--manifest", "m.cfg", "--out", "c", "--seed", "8"], tmp.path());
    assert_ne!(a, c);
    assert_eq!(
        fs::read(tmp.path().join("a/eval/00000/mixture.wav")).unwrap(),
        fs::read(tmp.path().join("b/eval/00000/mixture.wav")).unwrap()
    );
}

#[test]
fn missing_manifest_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mixkit(&["gen-data", "--manifest", "absent.cfg", "--out", "d"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.cfg"));
}

#[test]
fn eval_with_references_hits_the_caps() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path());
    ok(&["eval", "--data", "d", "--out", "e"], tmp.path());
    let rows = csv_rows(&tmp.path().join("e/eval_examples.csv"));
    assert_eq!(rows.len(), 7);
    for name in ["msi_db", "one_s_db", "momi_db"] {
        let vals: Vec<String> = column(&rows, name).into_iter().filter(|v| !v.is_empty()).collect();
        assert!(!vals.is_empty());
        assert!(vals.iter().all(|v| v == "100.000000"), "{name}: {vals:?}");
    }
}

#[test]
fn eval_with_mixture_copies_scores_zero_improvement() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path());
    ok(&["eval", "--data", "d", "--estimates", "mixture", "--out", "e", "--format", "json"], tmp.path());
    let text = fs::read_to_string(tmp.path().join("e/eval_examples.json")).unwrap();
    let rows: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    let msi: Vec<f64> = rows.iter().filter_map(|r| r["msi_db"].as_f64()).collect();
    assert!(!msi.is_empty());
    assert!(msi.iter().all(|v| v.abs() <= 0.1), "{msi:?}");
}

#[test]
fn sweep_rows_best_flag_and_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    corpus(dir);
    let args = ["sweep", "--data", "d", "--lambdas", "0,1,10", "--m", "4", "--steps", "20"];
    ok(&[&args[..], &["--out", "s1"]].concat(), dir);
    ok(&[&args[..], &["--out", "s2"]].concat(), dir);
    let rows = csv_rows(&dir.join("s1/sweep.csv"));
    assert_eq!(rows.len(), 4);
    assert_eq!(column(&rows, "best").iter().filter(|b| *b == "true").count(), 1);
    let first = fs::read(dir.join("s1/sweep.csv")).unwrap();
    assert_eq!(first, fs::read(dir.join("s2/sweep.csv")).unwrap());
    assert!(dir.join("s1/best-config.txt").exists());

    fs::remove_file(dir.join("s1/sweep.csv")).unwrap();
    ok(&["rerun", "s1/resolved-config.txt"], dir);
    assert_eq!(first, fs::read(dir.join("s1/sweep.csv")).unwrap());
}

#[test]
fn empty_sweep_grid_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path());
    assert!(!mixkit(&["sweep", "--data", "d", "--out", "s"], tmp.path()).status.success());
    assert!(!mixkit(&["sweep", "--data", "d", "--lambdas=", "--out", "s"], tmp.path()).status.success());
    assert!(!tmp.path().join("s/sweep.csv").exists());
}

#[test]
fn optimize_writes_trace_and_estimates() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path());
    ok(&["optimize", "--data", "d", "--example", "mom/00000", "--m", "3", "--steps", "30", "--out", "o"], tmp.path());
    assert_eq!(csv_rows(&tmp.path().join("o/trace.csv")).len(), 31);
    for k in 0..3 {
        assert!(tmp.path().join(format!("o/estimate_{k}.wav")).exists());
    }
    let summary = csv_rows(&tmp.path().join("o/optimize_summary.csv"));
    assert_eq!(column(&summary, "steps"), vec!["30"]);
}

#[test]
fn semantic_losses_need_tonal_sources() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("m.cfg"), MANIFEST.replace("tone,chirp", "am_noise")).unwrap();
    ok(&["gen-data", "--manifest", "m.cfg", "--out", "d"], tmp.path());
    let out = mixkit(&["optimize", "--data", "d", "--weight-ce", "1", "--steps", "5", "--out", "o"], tmp.path());
    assert!(!out.status.success());
}

#[test]
fn bench_marks_large_m_infeasible() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["bench-mixit", "--m", "4,16", "--trials", "2", "--len", "100", "--out", "b"], tmp.path());
    let rows = csv_rows(&tmp.path().join("b/bench.csv"));
    assert_eq!(column(&rows, "exhaustive_feasible"), vec!["true", "false"]);
    assert_eq!(column(&rows, "exhaustive_mean_s")[1], "");
    assert!(!column(&rows, "efficient_mean_s")[1].is_empty());
}
