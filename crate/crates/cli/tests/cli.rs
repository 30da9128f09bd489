use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lpd_temporal::report::load_report;

const MODEL: &str = r#"
seed = 5
[design]
subjects = 40
grid = { start = 0.0, step = 1.0, points = 12 }
keep_probability = 0.8
dropout_hazard = 0.05

[variables.hr]
kind = "continuous"
mean = { kind = "constant", value = 80.0 }
nugget_var = 4.0
serial_var = 9.0
serial_range = 3.0
intercept_var = 16.0

[variables.stage]
kind = "discrete"
classes = ["low", "high"]
transition = [[0.9, 0.1], [0.2, 0.8]]
initial = [0.6, 0.4]
"#;

fn lpdt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpdt"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Writes the model, simulates an original (seed 1) and a synthetic
/// (seed 2) table and a spec file.
fn fixture() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("model.toml"), MODEL).unwrap();
    let o = lpdt(
        dir.path(),
        &[
            "simulate",
            "--model",
            "model.toml",
            "--out",
            "orig.csv",
            "--seed",
            "1",
            "--spec-out",
            "spec.toml",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = lpdt(
        dir.path(),
        &["simulate", "--model", "model.toml", "--out", "synth.csv", "--seed", "2"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    dir
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

const QUICK: [&str; 4] = ["--iterations", "3", "--subsample", "30"];

#[test]
fn simulate_is_seeded() {
    let dir = fixture();
    let o = lpdt(
        dir.path(),
        &["simulate", "--model", "model.toml", "--out", "again.csv", "--seed", "1"],
    );
    assert_eq!(code(&o), 0);
    let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
    assert_eq!(read("orig.csv"), read("again.csv"));
    assert_ne!(read("orig.csv"), read("synth.csv"));
    let spec = std::fs::read_to_string(dir.path().join("spec.toml")).unwrap();
    assert!(spec.contains("[variables.stage]") && spec.contains("discrete"));
}

#[test]
fn simulate_rejects_empty_roster() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("model.toml"),
        MODEL.replace("subjects = 40", "subjects = 0"),
    )
    .unwrap();
    let o = lpdt(dir.path(), &["simulate", "--model", "model.toml", "--out", "x.csv"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("subjects"), "{}", stderr(&o));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn self_comparison_scores_perfectly() {
    let dir = fixture();
    let mut args = vec![
        "evaluate",
        "--original",
        "orig.csv",
        "--synthetic",
        "orig.csv",
        "--spec",
        "spec.toml",
    ];
    args.extend(["--out", "self", "--iterations", "3", "--subsample", "1000"]);
    let o = lpdt(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("hr: similarity 1.00"), "{out}");
    assert!(out.contains("stage: similarity 1.00"), "{out}");

    let report = load_report(&dir.path().join("self/report.json")).unwrap();
    assert!(report.failures.is_empty());
    for v in &report.variables {
        let m = v.measurement.as_ref().unwrap();
        assert_eq!(m.comparison.similarity.mean, 1.0);
        assert_eq!(m.comparison.dropout_divergence.mean, 0.0);
        assert_eq!(m.density_original, m.density_synthetic);
    }
    assert!(dir.path().join("self/hr/mean.h6.svg").exists());
    assert!(dir.path().join("self/stage/class.h6.json").exists());
}

#[test]
fn evaluate_is_byte_reproducible() {
    let dir = fixture();
    let mut args = vec![
        "evaluate",
        "--original",
        "orig.csv",
        "--synthetic",
        "synth.csv",
        "--spec",
        "spec.toml",
    ];
    args.extend(["--out", "run", "--bandwidth", "2,6", "--seed", "9"]);
    args.extend(QUICK);
    let o = lpdt(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let first = files(&dir.path().join("run"));
    std::fs::remove_dir_all(dir.path().join("run")).unwrap();
    let o2 = lpdt(dir.path(), &args);
    assert_eq!(code(&o2), 0);
    assert_eq!(first, files(&dir.path().join("run")));
    assert_eq!(stdout(&o), stdout(&o2));
    assert!(first.contains_key(Path::new("hr/variogram.h2.json")));
    assert!(first.contains_key(Path::new("hr/variogram.h6.json")));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = fixture();
    let config = "original = \"orig.csv\"\nsynthetic = \"synth.csv\"\nspec = \"spec.toml\"\nout = \"cfg\"\niterations = 2\nsubsample = 30\nseed = 4\n";
    std::fs::write(dir.path().join("run.toml"), config).unwrap();
    let o = lpdt(
        dir.path(),
        &[
            "evaluate",
            "--config",
            "run.toml",
            "--seed",
            "8",
            "--vars",
            "hr",
            "--no-charts",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = load_report(&dir.path().join("cfg/report.json")).unwrap();
    assert_eq!(report.metadata.config.iterations, 2);
    assert_eq!(report.metadata.config.seed, 8);
    assert_eq!(report.metadata.variables, vec!["hr".to_string()]);
    assert!(!files(&dir.path().join("cfg"))
        .keys()
        .any(|p| p.extension().is_some_and(|e| e == "svg")));
}

#[test]
fn render_redraws_charts_from_report() {
    let dir = fixture();
    let mut args = vec![
        "evaluate",
        "--original",
        "orig.csv",
        "--synthetic",
        "synth.csv",
        "--spec",
        "spec.toml",
    ];
    args.extend(["--out", "r", "--no-charts"]);
    args.extend(QUICK);
    assert_eq!(code(&lpdt(dir.path(), &args)), 0);
    assert!(!dir.path().join("r/hr/mean.h6.svg").exists());
    let o = lpdt(dir.path(), &["render", "--out", "r", "--overlay"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let svg = std::fs::read_to_string(dir.path().join("r/hr/mean.h6.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.contains("stroke-dasharray"));
}

#[test]
fn reference_with_single_iteration_has_no_spread() {
    let dir = fixture();
    let o = lpdt(
        dir.path(),
        &[
            "reference",
            "--original",
            "orig.csv",
            "--spec",
            "spec.toml",
            "--iterations",
            "1",
            "--out",
            "ref",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("hr: reference similarity"), "{out}");
    assert!(out.contains("[sd n/a]"), "{out}");
    assert!(dir.path().join("ref").is_dir());
}

#[test]
fn missing_spec_is_a_config_error() {
    let dir = fixture();
    let mut args = vec!["evaluate", "--original", "orig.csv", "--synthetic", "synth.csv"];
    args.extend(["--spec", "nowhere.toml", "--out", "x"]);
    let o = lpdt(dir.path(), &args);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nowhere.toml"), "{}", stderr(&o));
    assert!(!dir.path().join("x").exists());
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = fixture();
    let o = lpdt(dir.path(), &["evaluate", "--original", "orig.csv", "--out", "x"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--synthetic"), "{}", stderr(&o));
    assert_eq!(code(&lpdt(dir.path(), &["frobnicate"])), 1);
    let o = lpdt(
        dir.path(),
        &[
            "evaluate",
            "--original",
            "orig.csv",
            "--synthetic",
            "synth.csv",
            "--out",
            "x",
            "--vars",
            "nope",
        ],
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nope"));
    let o = lpdt(
        dir.path(),
        &[
            "evaluate",
            "--original",
            "orig.csv",
            "--synthetic",
            "synth.csv",
            "--out",
            "x",
            "--subsample",
            "0",
        ],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn malformed_rows_are_data_errors() {
    let dir = fixture();
    let mut text = std::fs::read_to_string(dir.path().join("orig.csv")).unwrap();
    text.push_str("s00001,hr,99.0,abc\n");
    std::fs::write(dir.path().join("bad.csv"), &text).unwrap();
    let line = text.lines().count();
    let mut args = vec![
        "evaluate",
        "--original",
        "bad.csv",
        "--synthetic",
        "synth.csv",
        "--spec",
        "spec.toml",
    ];
    args.extend(["--out", "x"]);
    let o = lpdt(dir.path(), &args);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains(&format!("line {line}")), "{}", stderr(&o));
}
