//! Binary-level checks: exit codes, output shapes, and the bundled
//! sample pipelines, run against the compiled `hypo` executable.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hypo"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let out = bin().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("Usage"), "stderr: {}", stderr_of(&out));
}

#[test]
fn unknown_flag_exits_2() {
    let out = bin()
        .args(["wer", "--corpus"])
        .arg(data("sample20.jsonl"))
        .arg("--definitely-not-a-flag")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_mode_value_exits_2() {
    let out = bin()
        .args(["correct", "--corpus"])
        .arg(data("sample20.jsonl"))
        .args(["--out", "/tmp/never-written.jsonl", "--mode", "sideways"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("passthrough"), "error should list valid modes");
}

#[test]
fn missing_corpus_file_exits_1() {
    let out = bin()
        .args(["wer", "--corpus", "/no/such/file.jsonl"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).starts_with("error:"));
}

#[test]
fn truncate_processes_flag_text_and_stdin_lines() {
    let out = bin()
        .args(["truncate", "--text", "a b a b a b c"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(stdout_of(&out), "a b\n");

    let mut child = bin()
        .arg("truncate")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"go go go home\nno repeats here\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert_eq!(stdout_of(&out), "go\nno repeats here\n");
}

#[test]
fn build_dataset_reports_split_counts() {
    let dir = tempfile::tempdir().unwrap();
    let built = dir.path().join("built.jsonl");
    let out = bin()
        .args(["build-dataset", "--input"])
        .arg(data("sample_nbest.jsonl"))
        .arg("--out")
        .arg(&built)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert!(
        stdout_of(&out).contains("train 2 / dev 1 / test 3"),
        "stdout: {}",
        stdout_of(&out)
    );
    let lines = std::fs::read_to_string(&built).unwrap();
    assert_eq!(lines.lines().count(), 6);
}

#[test]
fn correct_evaluate_report_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results.jsonl");
    let scores = dir.path().join("scores.json");

    let out = bin()
        .args(["correct", "--corpus"])
        .arg(data("sample20.jsonl"))
        .arg("--out")
        .arg(&results)
        .args(["--mode", "jea", "--provider", "echo"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("corrected 20 utterances"));

    let out = bin()
        .args(["evaluate", "--corpus"])
        .arg(data("sample20.jsonl"))
        .arg("--results")
        .arg(&results)
        .arg("--out")
        .arg(&scores)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("aggregation audit: ok"));

    let out = bin()
        .args(["report", "--scores"])
        .arg(&scores)
        .args(["--shape", "multimetric", "--format", "markdown"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let table = stdout_of(&out);
    assert!(table.contains("| system |"), "table: {table}");
    assert!(table.contains("| jea |"), "table: {table}");
}

#[test]
fn wer_split_filter_narrows_the_corpus() {
    let out = bin()
        .args(["wer", "--corpus"])
        .arg(data("sample20.jsonl"))
        .args(["--split", "dev"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("records     3"), "stdout: {}", stdout_of(&out));
}

/// With an echo provider every mode degenerates to the top-1 baseline,
/// so all four ablation rows must carry identical metric cells.
#[test]
fn ablate_echo_rows_match_baseline() {
    let out = bin()
        .args(["ablate", "--corpus"])
        .arg(data("sample20.jsonl"))
        .args(["--provider", "echo"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let table = stdout_of(&out);
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 4, "table: {table}");
    let metric_cells = |row: &str| -> Vec<String> {
        let cells: Vec<&str> = row.split_whitespace().collect();
        cells[3..].iter().map(|c| c.to_string()).collect()
    };
    let baseline = metric_cells(rows[0]);
    assert!(rows[0].starts_with("passthrough"));
    assert_eq!(baseline.len(), 6);
    for row in &rows[1..] {
        assert_eq!(metric_cells(row), baseline, "row `{row}` deviates from baseline");
    }
}
