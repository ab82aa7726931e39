use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SPEC: &str = r#"{
  "constructs": [
    {"name": "X", "mode": "reflective", "indicators": ["x1", "x2", "x3"]},
    {"name": "M", "mode": "reflective", "indicators": ["m1", "m2", "m3"]},
    {"name": "Y", "mode": "reflective", "indicators": ["y1", "y2", "y3"]}
  ],
  "paths": [{"from": "X", "to": "M"}, {"from": "M", "to": "Y"}, {"from": "X", "to": "Y"}]
}"#;

const PARAMS: &str = r#"{
  "n": 250,
  "constructs": [
    {"name": "X", "indicators": [{"name": "x1", "loading": 0.9}, {"name": "x2", "loading": 0.8}, {"name": "x3", "loading": 0.8}]},
    {"name": "M", "indicators": [{"name": "m1", "loading": 0.9}, {"name": "m2", "loading": 0.8}, {"name": "m3", "loading": 0.8}]},
    {"name": "Y", "indicators": [{"name": "y1", "loading": 0.9}, {"name": "y2", "loading": 0.8}, {"name": "y3", "loading": 0.8}]}
  ],
  "paths": [{"from": "X", "to": "M", "coef": 0.5}, {"from": "M", "to": "Y", "coef": 0.4}, {"from": "X", "to": "Y", "coef": 0.2}]
}"#;

fn frpsa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frpsa")).args(args).output().expect("spawn frpsa")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
    spec: PathBuf,
    data: PathBuf,
}

fn fixture() -> Fixture {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("spec.json");
    let params = dir.path().join("params.json");
    let data = dir.path().join("data.csv");
    fs::write(&spec, SPEC).unwrap();
    fs::write(&params, PARAMS).unwrap();
    let out = frpsa(&["gen", "--params", s(&params), "--seed", "11", "--out", s(&data), "--spec", s(&spec)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    Fixture { dir, spec, data }
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn full_run_writes_all_tables() {
    let f = fixture();
    let out = f.dir.path().join("report");
    let o = frpsa(&["run", "--spec", s(&f.spec), "--data", s(&f.data), "--out", s(&out), "--reps", "100", "--folds", "4", "--epochs", "300"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let names: Vec<String> = read_dir_sorted(&out).into_iter().map(|(n, _)| n).collect();
    assert_eq!(
        names,
        [
            "meta.json",
            "table1_reliability.csv",
            "table2_cross_loadings.csv",
            "table3_outer_weights.csv",
            "table4_structural.csv",
            "table5_indirect.csv",
            "table6_ann_folds.csv",
            "table7_sensitivity.csv"
        ]
    );
    let t4 = fs::read_to_string(out.join("table4_structural.csv")).unwrap();
    assert!(t4.lines().any(|l| l.starts_with("structural,X,M,")), "{t4}");
    let t6 = fs::read_to_string(out.join("table6_ann_folds.csv")).unwrap();
    assert_eq!(t6.lines().count(), 1 + 4 + 2);
}

#[test]
fn same_seed_same_bytes() {
    let f = fixture();
    let args = |out: &Path, threads: &'static str| {
        frpsa(&[
            "run", "--spec", s(&f.spec), "--data", s(&f.data), "--out", s(out), "--reps", "60", "--folds", "3", "--epochs", "200",
            "--seed", "5", "--threads", threads,
        ])
    };
    let a = f.dir.path().join("a");
    let b = f.dir.path().join("b");
    assert!(args(&a, "1").status.success());
    assert!(args(&b, "3").status.success());
    assert_eq!(read_dir_sorted(&a), read_dir_sorted(&b));
}

#[test]
fn missing_column_exits_2_and_writes_nothing() {
    let f = fixture();
    let text = fs::read_to_string(&f.data).unwrap();
    let broken = f.dir.path().join("broken.csv");
    fs::write(&broken, text.replacen("y3", "zz", 1)).unwrap();
    let out = f.dir.path().join("report");
    fs::create_dir(&out).unwrap();
    let o = frpsa(&["run", "--spec", s(&f.spec), "--data", s(&broken), "--out", s(&out), "--reps", "20"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("y3"));
    assert_eq!(fs::read_dir(&out).unwrap().count(), 0);
    assert_eq!(fs::read_dir(f.dir.path()).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().contains("partial")).count(), 0);
}

#[test]
fn malformed_spec_exits_2() {
    let f = fixture();
    let bad = f.dir.path().join("bad.json");
    fs::write(&bad, r#"{"constructs": [], "paths": []}"#).unwrap();
    let o = frpsa(&["validate", "--spec", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unreadable_data_exits_4() {
    let f = fixture();
    let out = f.dir.path().join("report");
    let o = frpsa(&["run", "--spec", s(&f.spec), "--data", s(&f.dir.path().join("nope.csv")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn non_empty_out_dir_is_rejected() {
    let f = fixture();
    let out = f.dir.path().join("report");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("keep.txt"), "x").unwrap();
    let o = frpsa(&["pls", "--spec", s(&f.spec), "--data", s(&f.data), "--out", s(&out), "--skip-bootstrap"]);
    assert_ne!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(out.join("keep.txt")).unwrap(), "x");
}

#[test]
fn validate_reports_ok() {
    let f = fixture();
    let o = frpsa(&["validate", "--spec", s(&f.spec), "--data", s(&f.data)]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("ok"), "{stdout}");
    assert!(stdout.contains("X -> M -> Y"), "{stdout}");
}

#[test]
fn gen_is_reproducible() {
    let f = fixture();
    let params = f.dir.path().join("params.json");
    let again = f.dir.path().join("again.csv");
    assert!(frpsa(&["gen", "--params", s(&params), "--seed", "11", "--out", s(&again)]).status.success());
    assert_eq!(fs::read(&f.data).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn ann_stage_reads_pls_scores() {
    let f = fixture();
    let pls = f.dir.path().join("pls");
    let o = frpsa(&["pls", "--spec", s(&f.spec), "--data", s(&f.data), "--out", s(&pls), "--reps", "50"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let scores = pls.join("scores.csv");
    assert!(scores.exists());
    let ann = f.dir.path().join("ann");
    let o = frpsa(&["ann", "--spec", s(&f.spec), "--data", s(&scores), "--out", s(&ann), "--folds", "3", "--epochs", "200", "--format", "text"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(ann.join("table6_ann_folds.txt").exists());
    assert!(ann.join("table7_sensitivity.txt").exists());
    assert!(!ann.join("table1_reliability.txt").exists());
}

#[test]
fn bad_format_is_input_error() {
    let f = fixture();
    let out = f.dir.path().join("report");
    let o = frpsa(&["pls", "--spec", s(&f.spec), "--data", s(&f.data), "--out", s(&out), "--format", "xml"]);
    assert_eq!(o.status.code(), Some(2));
}
