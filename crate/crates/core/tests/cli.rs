//! Drives the installed binary the way a user would: config files on
//! disk, subcommands, exit codes, and emitted artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use covmapper::report::MapperReport;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_covmapper"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn demo_config(out: &Path, extra: &str) -> PathBuf {
    let config = format!(
        r#"{{
            "input": {:?},
            "metric": "euclidean",
            "filters": [{{"pcoa": {{"axis": 1}}}}],
            "mapper": {{"resolutions": [5], "gains": [1.5], "cover_mode": "equalized", "histogram_bins": 10}},
            "split": {{"mode": "odd_even"}},
            "null": {{"n_replicates": 10, "strategy": "ridge", "base_seed": 5}},
            "permutation": {{"n_permutations": 20}}{extra}
        }}"#,
        fixture("demo.csv")
    );
    let path = out.join("config.json");
    fs::write(&path, config).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn test_subcommand_writes_reports_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let config = demo_config(dir.path(), r#", "report": {"histogram_svg": true}"#);

    let run = |out: &Path| -> Output {
        bin()
            .args(["test", "--config"])
            .arg(&config)
            .arg("--out-dir")
            .arg(out)
            .output()
            .unwrap()
    };
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    let o = run(&out1);
    assert!(o.status.success(), "stderr: {}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("structured null (B = 10)"), "{text}");
    assert!(text.contains("permutation baseline"), "{text}");
    assert!(
        text.contains("report.json, summary.csv, communities.csv, null_histogram.svg"),
        "{text}"
    );

    for name in ["report.json", "summary.csv", "communities.csv", "null_histogram.svg"] {
        assert!(out1.join(name).exists(), "{name} missing");
    }
    let summary = fs::read_to_string(out1.join("summary.csv")).unwrap();
    assert!(summary.starts_with("k,d_obs,z_perm,z_str,p_hat\n"));
    let communities = fs::read_to_string(out1.join("communities.csv")).unwrap();
    assert_eq!(communities.lines().count(), 61);

    let o2 = run(&out2);
    assert!(o2.status.success());
    assert_eq!(
        fs::read(out1.join("report.json")).unwrap(),
        fs::read(out2.join("report.json")).unwrap()
    );
}

#[test]
fn external_filter_column_feeds_the_filter_not_the_features() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(
        r#"{{
            "input": {:?},
            "metric": "euclidean",
            "filters": [{{"external": {{"column": "marker"}}}}],
            "mapper": {{"resolutions": [4], "gains": [1.5], "cover_mode": "equalized", "histogram_bins": 10}},
            "split": {{"mode": "odd_even"}},
            "null": {{"n_replicates": 6, "strategy": "ridge", "base_seed": 2}}
        }}"#,
        fixture("demo.csv")
    );
    let config_path = dir.path().join("config.json");
    fs::write(&config_path, config).unwrap();

    let o = bin()
        .args(["test", "--config"])
        .arg(&config_path)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "stderr: {}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["provenance"]["p"].as_u64(), Some(5));
}

#[test]
fn config_and_input_problems_exit_2_with_stage_labels() {
    let dir = tempfile::tempdir().unwrap();

    // Unknown key.
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"surprise": true}"#).unwrap();
    let o = bin().args(["test", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error [config]"), "{}", stderr(&o));

    // Config is fine, input file does not exist.
    let gone = dir.path().join("gone.csv");
    let config = format!(
        r#"{{
            "input": {gone:?},
            "metric": "euclidean",
            "filters": [{{"pcoa": {{"axis": 1}}}}],
            "mapper": {{"resolutions": [4], "gains": [1.5], "cover_mode": "equalized", "histogram_bins": 10}},
            "split": {{"mode": "odd_even"}},
            "null": {{"n_replicates": 4, "strategy": "ridge", "base_seed": 2}}
        }}"#
    );
    let path = dir.path().join("missing_input.json");
    fs::write(&path, config).unwrap();
    let o = bin().args(["test", "--config"]).arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error [input]"), "{}", stderr(&o));

    // External filter referencing an absent column.
    let config = format!(
        r#"{{
            "input": {:?},
            "metric": "euclidean",
            "filters": [{{"external": {{"column": "nope"}}}}],
            "mapper": {{"resolutions": [4], "gains": [1.5], "cover_mode": "equalized", "histogram_bins": 10}},
            "split": {{"mode": "odd_even"}},
            "null": {{"n_replicates": 4, "strategy": "ridge", "base_seed": 2}}
        }}"#,
        fixture("demo.csv")
    );
    let path = dir.path().join("bad_column.json");
    fs::write(&path, config).unwrap();
    let o = bin().args(["test", "--config"]).arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error [config]"), "{}", stderr(&o));
}

#[test]
fn numeric_degeneracies_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // Identical feature rows: ingestion succeeds, the observed pipeline
    // runs on the external filter, and reduced-rank replicate sampling
    // fails on the zero covariance.
    let csv = dir.path().join("flat.csv");
    let mut text = String::from("id,f1,f2,marker\n");
    for i in 0..8 {
        text.push_str(&format!("r{i},1.0,2.0,{i}\n"));
    }
    fs::write(&csv, text).unwrap();
    let config = format!(
        r#"{{
            "input": {csv:?},
            "metric": "euclidean",
            "filters": [{{"external": {{"column": "marker"}}}}],
            "mapper": {{"resolutions": [2], "gains": [1.0], "cover_mode": "equalized", "histogram_bins": 10}},
            "split": {{"mode": "odd_even"}},
            "null": {{"n_replicates": 3, "strategy": "reduced_rank", "base_seed": 1}}
        }}"#
    );
    let path = dir.path().join("flat.json");
    fs::write(&path, config).unwrap();
    let o = bin()
        .args(["test", "--config"])
        .arg(&path)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "stderr: {}", stderr(&o));
    assert!(
        stderr(&o).contains("error [structured null test]"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn worker_and_seed_flags_behave() {
    let dir = tempfile::tempdir().unwrap();
    let config = demo_config(dir.path(), "");

    let o = bin()
        .args(["test", "--workers", "0", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("workers"), "{}", stderr(&o));

    // More workers change nothing about the result bytes.
    let out1 = dir.path().join("w1");
    let out2 = dir.path().join("w2");
    for (out, workers) in [(&out1, "1"), (&out2, "2")] {
        let o = bin()
            .args(["test", "--workers", workers, "--config"])
            .arg(&config)
            .arg("--out-dir")
            .arg(out)
            .output()
            .unwrap();
        assert!(o.status.success(), "stderr: {}", stderr(&o));
    }
    assert_eq!(
        fs::read(out1.join("report.json")).unwrap(),
        fs::read(out2.join("report.json")).unwrap()
    );

    // --seed overrides the config seed and lands in the provenance.
    let out3 = dir.path().join("seeded");
    let o = bin()
        .args(["test", "--seed", "99", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out3)
        .output()
        .unwrap();
    assert!(o.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out3.join("report.json")).unwrap()).unwrap();
    assert_eq!(
        report["provenance"]["config"]["base_seed"].as_u64(),
        Some(99)
    );
}

#[test]
fn mapper_subcommand_emits_a_parseable_graph() {
    let dir = tempfile::tempdir().unwrap();
    let config = demo_config(dir.path(), "");
    let o = bin()
        .args(["mapper", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "stderr: {}", stderr(&o));
    assert!(stdout(&o).contains("graph:"), "{}", stdout(&o));

    let report: MapperReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("mapper_graph.json")).unwrap())
            .unwrap();
    assert_eq!(report.n_points, 60);
    assert_eq!(report.vertices.len(), report.n_vertices);
    for &(u, v) in &report.edges {
        assert!(u < report.n_vertices && v < report.n_vertices);
    }
    for vertex in &report.vertices {
        assert!(vertex.community < report.n_communities.max(1));
    }
}

#[test]
fn simulate_subcommand_writes_the_scenario_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "base_seed": 12,
        "scenarios": [
            {"label": "smoke", "dgp": {"kind": "spherical", "n": 40, "p": 4}, "r": 2, "b": 4}
        ]
    }"#;
    let path = dir.path().join("scenarios.json");
    fs::write(&path, config).unwrap();

    let run = |out: &Path| -> Output {
        bin()
            .args(["simulate", "--config"])
            .arg(&path)
            .arg("--out-dir")
            .arg(out)
            .output()
            .unwrap()
    };
    let out1 = dir.path().join("s1");
    let o = run(&out1);
    assert!(o.status.success(), "stderr: {}", stderr(&o));
    assert!(stdout(&o).contains("smoke"), "{}", stdout(&o));

    let csv = fs::read_to_string(out1.join("scenario_results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("distribution,p,b,r,mean_z,rejection_rate")
    );
    assert_eq!(lines.count(), 1);

    let out2 = dir.path().join("s2");
    assert!(run(&out2).status.success());
    assert_eq!(
        fs::read(out1.join("scenario_results.csv")).unwrap(),
        fs::read(out2.join("scenario_results.csv")).unwrap()
    );
}

#[test]
fn oracle_subcommand_prints_the_check_tables() {
    let o = bin()
        .args(["oracle", "--samples", "200000", "--seed", "42"])
        .output()
        .unwrap();
    assert!(o.status.success(), "stderr: {}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("estimate >= bound - 3se: true"), "{text}");
    assert!(text.contains("log-log slope"), "{text}");
    assert!(text.contains("within 10%: true"), "{text}");
}
