//! Configuration-driven experiment runs with reproducible artifacts.
//!
//! A run writes `results.csv`, `report.json` and `manifest.json` into its
//! output directory. The first two depend only on the resolved configuration
//! and the master seed; timestamps and the worker count live in the manifest.

mod kinds;
mod table;

pub use kinds::{
    BoxSpec, CalibNoiselessParams, CalibSimParams, ChainingCheckParams, FieldSimParams, HittingScanParams, KindParams,
    MetricCheckParams, ModulusScanParams, PolarityScanParams,
};
pub use table::{format_real, Cell, Table};

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::calibration::CalibrationError;
use crate::field::FieldError;
use crate::hitting::HittingError;
use crate::metric::MetricError;
use crate::seed::{derive_seed, sha256_hex};
use kinds::Ctx;

/// Environment variable naming the root under which default output directories are created.
pub const OUT_ROOT_ENV: &str = "POLARFIELD_OUT";

pub const RESULTS_FILE: &str = "results.csv";
pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Derived seeds listed per stream in the manifest.
const SEEDS_LISTED: usize = 16;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Schema(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Hitting(#[from] HittingError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("{}: {error}", path.display())]
    Io { path: PathBuf, error: std::io::Error },
    #[error("csv encoding failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json encoding failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl ExperimentError {
    /// Short machine-readable class of the error.
    pub fn category(&self) -> &'static str {
        match self {
            ExperimentError::Schema(_) => "schema",
            ExperimentError::Metric(_) => "metric",
            ExperimentError::Field(_) => "field",
            ExperimentError::Hitting(_) => "hitting",
            ExperimentError::Calibration(_) => "calibration",
            ExperimentError::Io { .. } => "io",
            ExperimentError::Csv(_) | ExperimentError::Json(_) => "encoding",
            ExperimentError::Pool(_) => "pool",
        }
    }

    fn io(path: &Path, error: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.to_path_buf(),
            error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MetricCheck,
    FieldSim,
    HittingScan,
    PolarityScan,
    ModulusScan,
    ChainingCheck,
    CalibNoiseless,
    CalibSim,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::MetricCheck,
        ExperimentKind::FieldSim,
        ExperimentKind::HittingScan,
        ExperimentKind::PolarityScan,
        ExperimentKind::ModulusScan,
        ExperimentKind::ChainingCheck,
        ExperimentKind::CalibNoiseless,
        ExperimentKind::CalibSim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MetricCheck => "metric-check",
            ExperimentKind::FieldSim => "field-sim",
            ExperimentKind::HittingScan => "hitting-scan",
            ExperimentKind::PolarityScan => "polarity-scan",
            ExperimentKind::ModulusScan => "modulus-scan",
            ExperimentKind::ChainingCheck => "chaining-check",
            ExperimentKind::CalibNoiseless => "calib-noiseless",
            ExperimentKind::CalibSim => "calib-sim",
        }
    }

    fn parse_params(self, params: &Value) -> Result<KindParams, ExperimentError> {
        fn parse<T: serde::de::DeserializeOwned>(kind: ExperimentKind, v: &Value) -> Result<T, ExperimentError> {
            let v = if v.is_null() { json!({}) } else { v.clone() };
            serde_json::from_value(v).map_err(|e| ExperimentError::Schema(format!("{kind} params: {e}")))
        }
        Ok(match self {
            ExperimentKind::MetricCheck => KindParams::MetricCheck(parse(self, params)?),
            ExperimentKind::FieldSim => KindParams::FieldSim(parse(self, params)?),
            ExperimentKind::HittingScan => KindParams::HittingScan(parse(self, params)?),
            ExperimentKind::PolarityScan => KindParams::PolarityScan(parse(self, params)?),
            ExperimentKind::ModulusScan => KindParams::ModulusScan(parse(self, params)?),
            ExperimentKind::ChainingCheck => KindParams::ChainingCheck(parse(self, params)?),
            ExperimentKind::CalibNoiseless => KindParams::CalibNoiseless(parse(self, params)?),
            ExperimentKind::CalibSim => KindParams::CalibSim(parse(self, params)?),
        })
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn empty_params() -> Value {
    json!({})
}

/// One experiment: kind, kind-specific parameters, master seed and run placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `$POLARFIELD_OUT/<kind>-<digest>` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Worker threads; the data outputs do not depend on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "empty_params")]
    pub params: Value,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            out: None,
            workers: None,
            params: empty_params(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(s).map_err(|e| ExperimentError::Schema(e.to_string()))
    }

    pub fn from_value(v: Value) -> Result<Self, ExperimentError> {
        serde_json::from_value(v).map_err(|e| ExperimentError::Schema(e.to_string()))
    }

    /// Checks the parameters against the kind's schema.
    pub fn validate(&self) -> Result<KindParams, ExperimentError> {
        if self.workers == Some(0) {
            return Err(ExperimentError::Schema("workers must be at least 1".into()));
        }
        self.kind.parse_params(&self.params)
    }

    /// Copy with every defaulted parameter written out.
    pub fn resolved(&self) -> Result<Self, ExperimentError> {
        let params = self.validate()?.to_value();
        Ok(Self { params, ..self.clone() })
    }

    /// SHA-256 of the canonical JSON of `(kind, seed, resolved params)`.
    pub fn digest(&self) -> Result<String, ExperimentError> {
        let r = self.resolved()?;
        let canon = json!({ "kind": r.kind, "seed": r.seed, "params": r.params });
        Ok(sha256_hex(&serde_json::to_vec(&canon)?))
    }

    /// Explicit `out`, or the default directory under [`OUT_ROOT_ENV`].
    pub fn out_dir(&self) -> Result<PathBuf, ExperimentError> {
        if let Some(p) = &self.out {
            return Ok(p.clone());
        }
        let root = std::env::var_os(OUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        Ok(root.join(format!("{}-{}", self.kind, &self.digest()?[..12])))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSeeds {
    pub stream: String,
    pub replicates: usize,
    /// `derive_seed(seed, r, stream)` for the first replicates.
    pub first: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Resolved configuration; parses back to an equal config.
    pub config: ExperimentConfig,
    pub config_digest: String,
    pub tool: String,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub out_dir: PathBuf,
    pub seed_scheme: String,
    pub seeds: Vec<StreamSeeds>,
    /// Data files; the manifest itself is not listed.
    pub files: Vec<FileDigest>,
}

impl RunManifest {
    pub fn file(&self, name: &str) -> Option<&FileDigest> {
        self.files.iter().find(|f| f.name == name)
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<FileDigest, ExperimentError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| ExperimentError::io(&path, e))?;
    Ok(FileDigest {
        name: name.to_string(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(bytes),
    })
}

fn pretty(v: &impl Serialize) -> Result<Vec<u8>, ExperimentError> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

/// Validates `config`, runs it and writes the artifacts.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest, ExperimentError> {
    let started_at = chrono::Utc::now().to_rfc3339();
    let params = config.validate()?;
    let resolved = ExperimentConfig {
        params: params.to_value(),
        ..config.clone()
    };
    let digest = resolved.digest()?;
    let out_dir = resolved.out_dir()?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let ctx = Ctx {
        seed: config.seed,
        digest: &digest,
    };
    let output = pool.install(|| params.run(&ctx))?;

    fs::create_dir_all(&out_dir).map_err(|e| ExperimentError::io(&out_dir, e))?;
    let csv = output.table.to_csv()?;
    let report = json!({
        "kind": resolved.kind,
        "seed": resolved.seed,
        "config_digest": digest,
        "columns": output.table.header,
        "rows": output.table.rows.len(),
        "summary": output.report,
    });
    let files = vec![
        write_file(&out_dir, RESULTS_FILE, &csv)?,
        write_file(&out_dir, REPORT_FILE, &pretty(&report)?)?,
    ];
    let seeds = output
        .streams
        .iter()
        .map(|&(stream, n)| StreamSeeds {
            stream: stream.to_string(),
            replicates: n,
            first: (0..n.min(SEEDS_LISTED) as u64)
                .map(|r| derive_seed(config.seed, r, stream))
                .collect(),
        })
        .collect();
    let manifest = RunManifest {
        config: ExperimentConfig {
            out: Some(out_dir.clone()),
            ..resolved
        },
        config_digest: digest,
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
        out_dir: out_dir.clone(),
        seed_scheme: "first 8 bytes (little endian) of SHA-256 over a domain tag, master seed, replicate \
                      index and stream label; ChaCha8 per (replicate, stream)"
            .to_string(),
        seeds,
        files,
    };
    write_file(&out_dir, MANIFEST_FILE, &pretty(&manifest)?)?;
    Ok(manifest)
}
