use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use polylab::output::{read_csv_rows, read_json_rows, ResultRow, CSV_HEADER};

fn polylab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polylab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn rows_of(out: &Output) -> Vec<ResultRow> {
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    reader.deserialize().map(|r| r.expect("row")).collect()
}

fn metric<'a>(rows: &'a [ResultRow], name: &str) -> &'a str {
    &rows.iter().find(|r| r.metric == name).unwrap_or_else(|| panic!("no {name}")).value
}

#[test]
fn skeleton_of_the_square() {
    let dir = tempfile::tempdir().unwrap();
    let out = polylab(dir.path(), &["skeleton", "--d", "2", "--p", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = rows_of(&out);
    assert_eq!(metric(&rows, "edges"), "4");
    assert_eq!(metric(&rows, "edges_k1"), "4");
    assert_eq!(metric(&rows, "edges_k2"), "0");
    assert!(dir.path().join(metric(&rows, "cache_file")).exists());
}

#[test]
fn skeleton_caches_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["skeleton", "--d", "5", "--p", "1/2", "--seed", "1"];
    let first = polylab(a.path(), &args);
    assert_eq!(polylab(b.path(), &args).status.code(), Some(0));
    assert_eq!(first.status.code(), Some(0));
    let name = metric(&rows_of(&first), "cache_file").to_string();
    assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());

    // a cache hit reports the same rows, and verification agrees
    let hit = polylab(a.path(), &["skeleton", "--d", "5", "--p", "1/2", "--seed", "1", "--verify-cache"]);
    assert_eq!(hit.status.code(), Some(0));
    let rows = rows_of(&hit);
    assert!(rows_of(&first).iter().zip(&rows).all(|(x, y)| x.same_result(y)));
    assert_eq!(metric(&rows, "verify_mismatches"), "0");

    let binary = polylab(a.path(), &["skeleton", "--d", "5", "--p", "1/2", "--seed", "1", "--cache-format", "binary"]);
    assert_eq!(binary.status.code(), Some(0));
    assert!(metric(&rows_of(&binary), "cache_file").ends_with(".skelb"));
}

#[test]
fn cache_holding_another_sample_is_an_invariant_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = polylab(dir.path(), &["skeleton", "--d", "2", "--p", "1", "--seed", "0"]);
    let name = metric(&rows_of(&out), "cache_file").to_string();
    fs::copy(dir.path().join(&name), dir.path().join(name.replace("-s0-", "-s1-"))).unwrap();
    let out = polylab(dir.path(), &["skeleton", "--d", "2", "--p", "1", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cheeger_of_the_full_cube_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = polylab(dir.path(), &["cheeger", "--d", "3", "--p", "1", "--seed", "0", "--method", "exact"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = rows_of(&out);
    assert_eq!(metric(&rows, "exact_h"), "1/1");
    assert_eq!(metric(&rows, "exact_set_size"), "4");
    assert!(rows.iter().all(|r| !r.metric.starts_with("sweep")));

    let all = rows_of(&polylab(dir.path(), &["cheeger", "--d", "3", "--p", "1"]));
    assert_eq!(metric(&all, "sweep_upper"), "1/1");
    let lower: f64 = metric(&all, "spectral_lower").parse().unwrap();
    assert!((lower - 1.0).abs() < 1e-9);
}

#[test]
fn guard_violations_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["isoperimetry", "--d", "5"][..],
        &["renorm-check", "--d", "9", "--p", "1/2"],
        &["coupling", "--d", "20", "--k", "3", "--m", "2", "--p", "1/2"],
        &["cheeger", "--d", "6", "--p", "1", "--method", "exact"],
        &["cheeger", "--d", "3", "--p", "3/2"],
        &["diameter-path", "--d", "20", "--k", "3", "--m", "1"],
    ] {
        let out = polylab(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn failed_statistics_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // a significance this close to one rejects essentially any fit
    let out = polylab(
        dir.path(),
        &["coupling", "--d", "5", "--k", "2", "--m", "1", "--p", "1/2", "--trials", "2000", "--significance", "0.9999"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(metric(&rows_of(&out), "pass_fit"), "false");
}

#[test]
fn exhausted_budget_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let out = polylab(dir.path(), &["isoperimetry", "--d", "2,3", "--budget-seconds", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let rows = rows_of(&out);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.metric == "skipped_budget"));
}

#[test]
fn reruns_append_identical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["expansion-scan", "--d", "4", "--p", "1/2,1", "--seeds", "5", "--out", "scan.csv"];
    assert_eq!(polylab(dir.path(), &args).status.code(), Some(0));
    assert_eq!(polylab(dir.path(), &args).status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert_eq!(text.matches(&CSV_HEADER.join(",")).count(), 1);
    let rows = read_csv_rows(&dir.path().join("scan.csv")).unwrap();
    assert!(!rows.is_empty() && rows.len() % 2 == 0);
    let half = rows.len() / 2;
    assert!(rows[..half].iter().zip(&rows[half..]).all(|(a, b)| a.same_result(b)));

    // the p = 1 column is the cube itself
    for r in rows.iter().filter(|r| r.params == "d=4;p=1/1" && r.metric == "exact_h") {
        assert_eq!(r.value, "1/1");
    }

    // thread count does not change results
    let one = polylab(dir.path(), &["expansion-scan", "--d", "4", "--p", "1/2", "--seeds", "5", "--threads", "1"]);
    let many = polylab(dir.path(), &["expansion-scan", "--d", "4", "--p", "1/2", "--seeds", "5", "--threads", "4"]);
    let (one, many) = (rows_of(&one), rows_of(&many));
    assert_eq!(one.len(), many.len());
    assert!(one.iter().zip(&many).all(|(a, b)| a.same_result(b)));
}

#[test]
fn json_mirrors_csv() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["degree-stats", "--d", "6", "--p", "1/2", "--k", "2", "--alpha", "1/2", "--seed", "4"];
    let mut csv_args = base.to_vec();
    csv_args.extend(["--out", "r.csv"]);
    let mut json_args = base.to_vec();
    json_args.extend(["--out", "r.jsonl", "--format", "json"]);
    assert_eq!(polylab(dir.path(), &csv_args).status.code(), Some(0));
    assert_eq!(polylab(dir.path(), &json_args).status.code(), Some(0));
    let a = read_csv_rows(&dir.path().join("r.csv")).unwrap();
    let b = read_json_rows(&dir.path().join("r.jsonl")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a.len(), b.len());
    assert!(a.iter().zip(&b).all(|(x, y)| x.same_result(y)));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("grid.cfg"), "experiment=renorm-check\nd=6\nb=1\np=1/2\nseeds=3\n").unwrap();
    let out = polylab(dir.path(), &["renorm-check", "--config", "grid.cfg"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = rows_of(&out);
    let violations: Vec<_> = rows.iter().filter(|r| r.metric == "violations").collect();
    assert_eq!(violations.len(), 3);
    assert!(violations.iter().all(|r| r.value == "0"));

    // flags win over the file
    let out = polylab(dir.path(), &["renorm-check", "--config", "grid.cfg", "--seeds", "1", "--seed", "9"]);
    let rows = rows_of(&out);
    assert!(rows.iter().all(|r| r.seed == 9));
}

#[test]
fn sample_writes_manifest_and_payload() {
    let dir = tempfile::tempdir().unwrap();
    let out = polylab(dir.path(), &["sample", "--d", "6", "--p", "1/3", "--seed", "2", "--data-dir", "samples"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = rows_of(&out);
    let manifest = dir.path().join("samples").join(metric(&rows, "manifest"));
    let sample = polylab_core::persist::read_sample(&manifest).unwrap();
    assert_eq!(sample.len().to_string(), metric(&rows, "retained"));
    assert_eq!(metric(&rows, "expected_retained"), "64/3");
}

#[test]
fn diameter_paths_stay_within_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = polylab(
        dir.path(),
        &["diameter-path", "--d", "36", "--k", "3", "--m", "1", "--pairs", "100", "--data-dir", "paths"],
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = rows_of(&out);
    assert_eq!(metric(&rows, "valid"), "100");
    assert!(metric(&rows, "max_length").parse::<usize>().unwrap() <= 432);
    let dumped = fs::read_dir(dir.path().join("paths")).unwrap().count();
    assert_eq!(dumped, 100);
    let text = fs::read_to_string(dir.path().join("paths/path-d36-k3-m1-s0-0.txt")).unwrap();
    polylab_core::path::CubePath::from_text(&text).unwrap().validate().unwrap();
}

#[test]
fn isoperimetry_passes_in_dimension_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = polylab(dir.path(), &["isoperimetry", "--d", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(metric(&rows_of(&out), "passed"), "true");
}

#[test]
fn mixed_probe_reports_a_witness() {
    let dir = tempfile::tempdir().unwrap();
    let out = polylab(dir.path(), &["mixed-probe", "--d", "10", "--p", "1/2", "--q", "1/2", "--alpha", "1/2", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = rows_of(&out);
    assert!(metric(&rows, "admissible").parse::<usize>().unwrap() > 0);
    assert!(metric(&rows, "best_estimate").parse::<f64>().unwrap() > 0.0);
}
