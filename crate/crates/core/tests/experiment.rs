use serde_json::json;

use polarfield::experiment::{
    run_experiment, ExperimentConfig, ExperimentKind, RunManifest, MANIFEST_FILE, REPORT_FILE, RESULTS_FILE,
};
use polarfield::seed::{derive_seed, sha256_hex, FIELD_STREAM, NOISE_STREAM};

fn config(kind: ExperimentKind, seed: u64, params: serde_json::Value, dir: &std::path::Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(kind, seed);
    c.params = params;
    c.out = Some(dir.to_path_buf());
    c
}

#[test]
fn manifest_echo_reparses_and_reproduces() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(
        ExperimentKind::FieldSim,
        5,
        json!({ "n_samples": 300 }),
        &tmp.path().join("one"),
    );
    let m = run_experiment(&c).unwrap();
    let text = std::fs::read_to_string(m.out_dir.join(MANIFEST_FILE)).unwrap();
    let back: RunManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(back, m);
    // the echo is a complete config: running it again elsewhere gives the same data
    let echo = ExperimentConfig::from_value(serde_json::to_value(&back.config).unwrap()).unwrap();
    assert_eq!(echo, back.config);
    let mut again = echo.clone();
    again.out = Some(tmp.path().join("two"));
    let m2 = run_experiment(&again).unwrap();
    assert_eq!(m2.files, m.files);
    assert_eq!(m2.config_digest, m.config_digest);
    assert!(m.started_at <= m.finished_at);
}

#[test]
fn file_digests_match_contents() {
    let tmp = tempfile::tempdir().unwrap();
    let m = run_experiment(&config(ExperimentKind::ChainingCheck, 0, json!({}), tmp.path())).unwrap();
    for name in [RESULTS_FILE, REPORT_FILE] {
        let bytes = std::fs::read(tmp.path().join(name)).unwrap();
        let f = m.file(name).unwrap();
        assert_eq!(f.bytes, bytes.len() as u64);
        assert_eq!(f.sha256, sha256_hex(&bytes));
    }
    assert!(m.file(MANIFEST_FILE).is_none());
}

#[test]
fn rows_trace_to_digest_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(
        ExperimentKind::CalibSim,
        77,
        json!({ "n_replicates": 5, "n_v": 40, "n_phi": 30, "holder_grid": 6, "lambda_v": [2.0] }),
        tmp.path(),
    );
    let m = run_experiment(&c).unwrap();
    let mut rdr = csv::Reader::from_path(tmp.path().join(RESULTS_FILE)).unwrap();
    let header = rdr.headers().unwrap().clone();
    let col = |n: &str| header.iter().position(|h| h == n).unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        assert_eq!(&rec[col("config_digest")], m.config_digest);
        let rep: u64 = rec[col("replicate")].parse().unwrap();
        let seed: u64 = rec[col("noise_seed")].parse().unwrap();
        assert_eq!(seed, derive_seed(77, rep, NOISE_STREAM));
        rows += 1;
    }
    assert_eq!(rows, 15);
    let s = &m.seeds[0];
    assert_eq!((s.stream.as_str(), s.replicates), (NOISE_STREAM, 5));
    assert_eq!(
        s.first,
        (0..5).map(|r| derive_seed(77, r, NOISE_STREAM)).collect::<Vec<_>>()
    );
}

#[test]
fn hitting_scan_report_and_streams() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(
        ExperimentKind::HittingScan,
        3,
        json!({
            "n_mc": 400,
            "drift": { "kind": "random-field", "lipschitz": 0.5, "terms": 2, "offset_scale": 0.1 }
        }),
        tmp.path(),
    );
    let m = run_experiment(&c).unwrap();
    let streams: Vec<&str> = m.seeds.iter().map(|s| s.stream.as_str()).collect();
    assert_eq!(streams, ["field", "drift"]);
    assert_eq!(m.seeds[0].first[0], derive_seed(3, 0, FIELD_STREAM));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join(REPORT_FILE)).unwrap()).unwrap();
    assert_eq!(report["summary"]["hits_nested"], true);
    assert_eq!(report["summary"]["reference_exponent"], 2.0);
    assert_eq!(report["rows"], 4);
    assert_eq!(report["config_digest"], m.config_digest.as_str());
}

#[test]
fn metric_check_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(
        ExperimentKind::MetricCheck,
        0,
        json!({ "hurst": [1.0], "radii": [0.5, 0.25], "test_points": 1000 }),
        tmp.path(),
    );
    run_experiment(&c).unwrap();
    let text = std::fs::read_to_string(tmp.path().join(RESULTS_FILE)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    // r = 1/2 on [0, 1] with H = 1: two balls; the bound (2·0.5/0.5)+1 = 3
    assert!(
        lines[1].starts_with("5.0000000000000000e-1,2.0000000000000000e0,3.0000000000000000e0,"),
        "{}",
        lines[1]
    );
}

#[test]
fn module_errors_surface_verbatim() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(
        ExperimentKind::HittingScan,
        0,
        json!({ "grid_step": 0.05, "n_mc": 10 }),
        tmp.path(),
    );
    let e = run_experiment(&c).unwrap_err();
    assert_eq!(e.category(), "hitting");
    assert!(e.to_string().starts_with("grid under-resolves radius"), "{e}");
}
