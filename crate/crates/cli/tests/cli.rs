//! End-to-end checks of the binary: exit codes, stream separation, and
//! pipeline smoke tests over temp files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_citenorm"))
}

fn fixture_scheme() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/ca_sections.scheme")
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path
}

const TINY_SCHEME: &str = "ORG|Organic|heading|\n25|Benzene|section|ORG\n27|Heterocycles|section|ORG\n";

const THREE_PUBS: &str = r#"{"id":"a","year":2010,"code":"25","citations":0}
{"id":"b","year":2010,"code":"25","citations":5}
{"id":"c","year":2010,"code":"25","citations":10}
"#;

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn scheme_check_reports_shape() {
    let output = bin().arg("scheme-check").arg(fixture_scheme()).output().unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let out = stdout(&output);
    assert!(out.contains("5 headings, 80 sections"), "{out}");
    let organic = out
        .lines()
        .find(|l| l.contains("ORGANIC"))
        .expect("organic heading line");
    assert!(organic.contains("14 children"), "{organic}");
}

#[test]
fn scheme_check_rejects_bad_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.scheme", "25|Benzene|section|GHOST\n");
    let output = bin().arg("scheme-check").arg(&bad).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("GHOST"));
}

#[test]
fn score_three_pub_fixture_has_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = write(dir.path(), "tiny.scheme", TINY_SCHEME);
    let pubs = write(dir.path(), "pubs.jsonl", THREE_PUBS);
    let output = bin()
        .args(["score", "--min-size", "2"])
        .arg("--scheme")
        .arg(&scheme)
        .arg("--pubs")
        .arg(&pubs)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let out = stdout(&output);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "pub_id,set_code,set_year,resolved_level,fallback,n_set,citations,percentile,rank_class,rcr,rcr_defined,fractional"
    );
    assert_eq!(lines.count(), 3);
}

#[test]
fn descending_thresholds_are_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = write(dir.path(), "tiny.scheme", TINY_SCHEME);
    let pubs = write(dir.path(), "pubs.jsonl", THREE_PUBS);
    let output = bin()
        .args(["score", "--min-size", "2", "--thresholds", "90,50"])
        .arg("--scheme")
        .arg(&scheme)
        .arg("--pubs")
        .arg(&pubs)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("thresholds must be strictly increasing"));
}

#[test]
fn min_size_one_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = write(dir.path(), "tiny.scheme", TINY_SCHEME);
    let pubs = write(dir.path(), "pubs.jsonl", THREE_PUBS);
    let output = bin()
        .args(["score", "--min-size", "1"])
        .arg("--scheme")
        .arg(&scheme)
        .arg("--pubs")
        .arg(&pubs)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("min_size"));
}

#[test]
fn missing_input_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = write(dir.path(), "tiny.scheme", TINY_SCHEME);
    let output = bin()
        .args(["score"])
        .arg("--scheme")
        .arg(&scheme)
        .arg("--pubs")
        .arg(dir.path().join("nope.jsonl"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn malformed_pub_line_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = write(dir.path(), "tiny.scheme", TINY_SCHEME);
    let pubs = write(dir.path(), "pubs.jsonl", "{\"id\":\"a\",\"year\":2010}\nnot json\n");
    let output = bin()
        .args(["ingest"])
        .arg("--scheme")
        .arg(&scheme)
        .arg("--pubs")
        .arg(&pubs)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("line 2"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let output = bin().arg("frobnicate").output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn score_outdir_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = write(dir.path(), "tiny.scheme", TINY_SCHEME);
    let pubs = write(dir.path(), "pubs.jsonl", THREE_PUBS);
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    for out in [&out1, &out2] {
        let output = bin()
            .args(["score", "--min-size", "2"])
            .arg("--scheme")
            .arg(&scheme)
            .arg("--pubs")
            .arg(&pubs)
            .arg("--outdir")
            .arg(out)
            .output()
            .unwrap();
        assert!(output.status.success(), "{}", stderr(&output));
    }
    for name in ["indicators.csv", "diagnostics.json"] {
        assert_eq!(
            fs::read(out1.join(name)).unwrap(),
            fs::read(out2.join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
    // Inputs are untouched.
    assert_eq!(fs::read_to_string(&pubs).unwrap(), THREE_PUBS);
}

#[test]
fn refsets_summary_on_stdout_exclusions_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = write(dir.path(), "tiny.scheme", TINY_SCHEME);
    let pubs = write(
        dir.path(),
        "pubs.jsonl",
        "{\"id\":\"a\",\"year\":2010,\"code\":\"25\"}\n{\"id\":\"b\",\"year\":2010,\"code\":\"25\"}\n{\"id\":\"x\",\"year\":2010}\n",
    );
    let output = bin()
        .args(["refsets", "--min-size", "2"])
        .arg("--scheme")
        .arg(&scheme)
        .arg("--pubs")
        .arg(&pubs)
        .output()
        .unwrap();
    assert!(output.status.success());
    let out = stdout(&output);
    assert!(out.starts_with("set_code,set_year,resolved_level,size,fallback"));
    assert!(out.contains("25,2010,section,2,none"));
    assert!(stderr(&output).contains("no_code"));
}

#[test]
fn synth_score_report_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = write(dir.path(), "tiny.scheme", TINY_SCHEME);
    let spec = write(
        dir.path(),
        "spec.toml",
        r#"
seed = 5
[[fields]]
code = "25"
year = 2010
n_pubs = 60
dist = { family = "lognormal", mu = 1.0, sigma = 0.8 }
[[fields]]
code = "25"
year = 2011
label = "later"
n_pubs = 60
dist = { family = "lognormal", mu = 1.0, sigma = 0.8 }
"#,
    );
    let pubs = dir.path().join("synth.jsonl");
    let output = bin()
        .arg("synth")
        .arg("--spec")
        .arg(&spec)
        .arg("--out-pubs")
        .arg(&pubs)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    assert_eq!(fs::read_to_string(&pubs).unwrap().lines().count(), 120);

    // A unit drawing from both years gets a report and a trend document.
    let units = write(dir.path(), "units.txt", "lab 25-2010-0 25-2010-1 later-0 later-1\n");
    let outdir = dir.path().join("out");
    let output = bin()
        .args(["report", "--min-size", "2"])
        .arg("--scheme")
        .arg(&scheme)
        .arg("--pubs")
        .arg(&pubs)
        .arg("--units")
        .arg(&units)
        .arg("--outdir")
        .arg(&outdir)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let units_doc = fs::read_to_string(outdir.join("units.jsonl")).unwrap();
    assert_eq!(units_doc.lines().count(), 1);
    assert!(units_doc.contains("\"unit_id\":\"lab\""));
    assert!(units_doc.contains("\"n_scored\":4"));
    let trends_doc = fs::read_to_string(outdir.join("trends.jsonl")).unwrap();
    assert!(trends_doc.contains("variance_mean_percentile"));
    assert!(outdir.join("indicators.csv").exists());
    assert!(outdir.join("diagnostics.json").exists());
}

#[test]
fn report_rejects_unknown_unit_member() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = write(dir.path(), "tiny.scheme", TINY_SCHEME);
    let pubs = write(dir.path(), "pubs.jsonl", THREE_PUBS);
    let units = write(dir.path(), "units.txt", "lab a ghost\n");
    let output = bin()
        .args(["report", "--min-size", "2"])
        .arg("--scheme")
        .arg(&scheme)
        .arg("--pubs")
        .arg(&pubs)
        .arg("--units")
        .arg(&units)
        .arg("--outdir")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("ghost"));
}

#[test]
fn journal_grouping_flag_switches_mode() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = write(dir.path(), "tiny.scheme", TINY_SCHEME);
    let pubs = write(
        dir.path(),
        "pubs.jsonl",
        r#"{"id":"a","year":2010,"journal":"J1","citations":1}
{"id":"b","year":2010,"journal":"J1","citations":3}
{"id":"c","year":2010,"journal":"J2","citations":2}
{"id":"d","year":2010,"journal":"J2","citations":4}
"#,
    );
    let output = bin()
        .args(["score", "--grouping", "journal", "--min-size", "2"])
        .arg("--scheme")
        .arg(&scheme)
        .arg("--pubs")
        .arg(&pubs)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let out = stdout(&output);
    assert!(out.contains("a,J1,2010,journal"));
    assert!(out.contains("c,J2,2010,journal"));
}
