use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lotpipe::corpus::{make_synthetic, Split, SyntheticSpec};
use lotpipe::pipeline::{PipelineConfig, CACHE_DIR_ENV};

fn lotpipe(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lotpipe"))
        .args(args)
        .arg("--config")
        .arg(config)
        .env_remove(CACHE_DIR_ENV)
        .env("RUST_LOG", "info")
        .output()
        .expect("spawn lotpipe")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn standard_config(dir: &Path) -> std::path::PathBuf {
    let config = PipelineConfig::synthetic(4, 150, 7, dir.join("out"));
    let path = dir.join("config.toml");
    fs::write(&path, config.to_toml()).unwrap();
    path
}

#[test]
fn missing_label_file_fails_before_any_compute() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("train.csv"), "0,some text\n1,other text\n").unwrap();
    let config = dir.path().join("config.toml");
    fs::write(
        &config,
        r#"
seed = 1
output_dir = "out"
label_names = "missing_labels.txt"

[dataset]
kind = "files"
name = "custom"
format = "csv-label-text"
train = "train.csv"

[backend]
kind = "tiny"

[stages]
evaluate = false
"#,
    )
    .unwrap();
    let out = lotpipe(&["run"], &config);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("missing_labels.txt"), "{}", stderr(&out));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn stage_failure_leaves_a_marker_and_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("train.csv"), "0,the match went on\n1,markets were calm\n").unwrap();
    fs::write(dir.path().join("labels.txt"), "sports: football\nbusiness: markets\n").unwrap();
    let config = dir.path().join("config.toml");
    fs::write(
        &config,
        r#"
seed = 1
output_dir = "out"
label_names = "labels.txt"

[dataset]
kind = "files"
name = "custom"
format = "csv-label-text"
train = "train.csv"

[backend]
kind = "tiny"

[pretraining]
epochs = 1

[stages]
evaluate = false
"#,
    )
    .unwrap();
    let out = lotpipe(&["run"], &config);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("\"sports\""), "{}", stderr(&out));
    let marker = fs::read_to_string(dir.path().join("out/STAGE_FAILED")).unwrap();
    assert!(marker.starts_with("vocab"));
    assert!(dir.path().join("out/config.toml").exists());
    assert!(dir.path().join("out/checkpoints/base/manifest.json").exists());
}

#[test]
fn missing_prior_artifacts_name_their_producer() {
    let dir = tempfile::tempdir().unwrap();
    let config = standard_config(dir.path());
    for (stage, producer) in [
        ("detect", "lotpipe vocab"),
        ("mcp", "lotpipe vocab"),
        ("selftrain", "lotpipe mcp"),
        ("eval", "lotpipe mcp` or `lotpipe selftrain"),
        ("predict", "lotpipe mcp` or `lotpipe selftrain"),
    ] {
        let out = lotpipe(&[stage], &config);
        assert!(!out.status.success(), "{stage} succeeded");
        assert!(stderr(&out).contains(producer), "{stage}: {}", stderr(&out));
    }
}

#[test]
fn rerun_resumes_and_predict_uses_the_trained_model() {
    let dir = tempfile::tempdir().unwrap();
    let config = standard_config(dir.path());
    let first = lotpipe(&["run"], &config);
    assert!(first.status.success(), "{}", stderr(&first));

    let second = lotpipe(&["run"], &config);
    assert!(second.status.success());
    let log = stderr(&second);
    for stage in ["vocab", "detect", "mcp", "selftrain"] {
        assert!(log.contains(&format!("{stage}: cached")), "{stage} re-ran:\n{log}");
    }
    assert!(!log.contains("pretraining"));

    // A handwritten class-0 line, then unseen class-0 documents from the generator.
    let mut lines = vec!["the team won the game as fans cheered the coach".to_string()];
    let fresh = make_synthetic(&SyntheticSpec::topics(4, 10, 99), Split::Test).unwrap().corpus;
    lines.extend(
        fresh
            .documents()
            .iter()
            .filter(|d| d.gold_label == Some(0))
            .map(|d| d.text.clone()),
    );
    let input = dir.path().join("lines.txt");
    fs::write(&input, lines.join("\n")).unwrap();
    let out = lotpipe(&["predict", input.to_str().unwrap()], &config);
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = stdout.lines().collect();
    assert_eq!(rows.len(), lines.len());
    for row in rows {
        let fields: Vec<&str> = row.split('\t').collect();
        assert_eq!(fields[0], "0", "{row}");
        assert_eq!(fields[1], "sports");
        let dist: Vec<f64> = fields[2].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(dist.len(), 4);
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-5);
    }
}

#[test]
fn plot_renders_a_trace_file() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.tsv");
    let rows: String = (0..120).map(|i| format!("{i}\t{}\n", 1.0 / (i as f64 + 1.0))).collect();
    fs::write(&trace, rows).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lotpipe"))
        .arg("plot")
        .arg(&trace)
        .output()
        .unwrap();
    assert!(out.status.success());
    let svg = fs::read_to_string(dir.path().join("trace.svg")).unwrap();
    assert_eq!(svg.matches("stroke-dasharray").count(), 2);
}
