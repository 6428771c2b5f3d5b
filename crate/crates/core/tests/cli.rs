use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use polarfield::experiment::{ExperimentConfig, RunManifest};

fn polarfield(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polarfield"))
        .args(args)
        .env("POLARFIELD_OUT", out_root)
        .output()
        .expect("binary runs")
}

fn error_json(out: &Output) -> Value {
    assert!(!out.status.success());
    assert!(
        out.stdout.is_empty(),
        "data on stdout: {:?}",
        String::from_utf8_lossy(&out.stdout)
    );
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn manifest(out: &Output) -> RunManifest {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = String::from_utf8(out.stdout.clone()).unwrap();
    serde_json::from_slice(&std::fs::read(path.trim()).unwrap()).unwrap()
}

#[test]
fn polarity_scan_refuses_q_not_below_d() {
    let tmp = tempfile::tempdir().unwrap();
    let out = polarfield(
        &["polarity-scan", "--set", "hurst=[0.5]", "--set", "n_mc=10"],
        tmp.path(),
    );
    let err = error_json(&out);
    assert_eq!(err["category"], "hitting");
    let msg = err["error"].as_str().unwrap();
    assert!(msg.contains("Q < d"), "{msg}");
    assert!(msg.contains("Q = 2") && msg.contains("d = 2"), "{msg}");
    // nothing was written
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn schema_violations_are_structured() {
    let tmp = tempfile::tempdir().unwrap();
    let err = error_json(&polarfield(&["hitting-scan", "--set", "n_mcc=5"], tmp.path()));
    assert_eq!(err["category"], "schema");
    assert!(err["error"].as_str().unwrap().contains("n_mcc"));

    let err = error_json(&polarfield(
        &["chaining-check", "--set", "verbose=true", "--set", "seed=1"],
        tmp.path(),
    ));
    assert_eq!(err["category"], "schema");

    let err = error_json(&polarfield(
        &["calib-sim", "--set", r#"noise={"family":"power-law","a":0.5,"p":1.5}"#],
        tmp.path(),
    ));
    assert_eq!(err["category"], "schema");
    assert!(err["error"].as_str().unwrap().contains("2a − p > 1"), "{err}");

    let err = error_json(&polarfield(&["field-sim", "--workers", "0"], tmp.path()));
    assert_eq!(err["category"], "schema");
}

#[test]
fn config_file_kind_must_match_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"kind": "field-sim", "seed": 3}"#).unwrap();
    let err = error_json(&polarfield(
        &["metric-check", "--config", cfg.to_str().unwrap()],
        tmp.path(),
    ));
    assert_eq!(err["category"], "schema");
    let err = error_json(&polarfield(
        &["metric-check", "--config", "/nonexistent/c.json"],
        tmp.path(),
    ));
    assert_eq!(err["category"], "usage");
}

#[test]
fn calib_noiseless_default_matches_arctan() {
    let tmp = tempfile::tempdir().unwrap();
    let m = manifest(&polarfield(&["calib-noiseless"], tmp.path()));
    assert!(m.out_dir.starts_with(tmp.path()));
    assert!(m
        .out_dir
        .file_name()
        .unwrap()
        .to_str()
        .unwrap()
        .starts_with("calib-noiseless-"));
    let mut rdr = csv::Reader::from_path(m.out_dir.join("results.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (v, re, im) = (col("v"), col("re_psi"), col("im_psi"));
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let x: f64 = rec[v].parse().unwrap();
        let re: f64 = rec[re].parse().unwrap();
        let im: f64 = rec[im].parse().unwrap();
        assert!(
            re.abs() <= 1e-10 && (im - 2.0 * x.atan()).abs() <= 1e-10,
            "v = {x}: {re} + {im}i"
        );
        if x == 0.0 {
            assert_eq!((re, im), (0.0, 0.0));
        }
        rows += 1;
    }
    assert!(rows > 1900);
}

#[test]
fn repeated_runs_have_identical_digests() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &str, workers: &str| {
        let out = tmp.path().join(dir);
        manifest(&polarfield(
            &[
                "hitting-scan",
                "--seed",
                "42",
                "--set",
                "n_mc=200",
                "--workers",
                workers,
                "--out",
                out.to_str().unwrap(),
            ],
            tmp.path(),
        ))
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "3");
    assert_eq!(a.files, b.files);
    assert_eq!(a.files, c.files);
    assert_eq!(a.config_digest, c.config_digest);
    assert_eq!(a.files.len(), 2);
}

#[test]
fn nested_set_and_print_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = polarfield(
        &[
            "polarity-scan",
            "--set",
            "drift.kind=random-field",
            "--set",
            "drift.lipschitz=1",
            "--set",
            "drift.terms=2",
            "--set",
            "drift.offset_scale=0.25",
            "--seed",
            "9",
            "--print-config",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = ExperimentConfig::from_json_str(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.params["drift"]["kind"], "random-field");
    assert_eq!(cfg.params["drift"]["terms"], 2);
    assert_eq!(cfg.params["n_mc"], 10_000);
    assert_eq!(cfg.resolved().unwrap(), cfg);
    // printing runs nothing
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 0);
}
