use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use polarfield::experiment::{run_experiment, ExperimentConfig, ExperimentError, ExperimentKind, MANIFEST_FILE};

/// Reproducible experiments on anisotropic Gaussian random fields.
#[derive(Parser)]
#[command(name = "polarfield", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ball covers, covering numbers and the entropy integral.
    MetricCheck(RunArgs),
    /// Exact field draws against the analytic covariance.
    FieldSim(RunArgs),
    /// Hitting probabilities of shrinking ρ-balls.
    HittingScan(RunArgs),
    /// Probabilities of hitting shrinking Euclidean targets.
    PolarityScan(RunArgs),
    /// Empirical modulus of continuity across scales.
    ModulusScan(RunArgs),
    /// Chaining series convergence across β.
    ChainingCheck(RunArgs),
    /// Noiseless spectral calibration estimator.
    CalibNoiseless(RunArgs),
    /// Noisy spectral calibration: well-definedness across noise scales.
    CalibSim(RunArgs),
}

impl Command {
    fn split(&self) -> (ExperimentKind, &RunArgs) {
        match self {
            Command::MetricCheck(a) => (ExperimentKind::MetricCheck, a),
            Command::FieldSim(a) => (ExperimentKind::FieldSim, a),
            Command::HittingScan(a) => (ExperimentKind::HittingScan, a),
            Command::PolarityScan(a) => (ExperimentKind::PolarityScan, a),
            Command::ModulusScan(a) => (ExperimentKind::ModulusScan, a),
            Command::ChainingCheck(a) => (ExperimentKind::ChainingCheck, a),
            Command::CalibNoiseless(a) => (ExperimentKind::CalibNoiseless, a),
            Command::CalibSim(a) => (ExperimentKind::CalibSim, a),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Override a config entry, e.g. `--set n_mc=2000` or `--set drift.kind=zero`.
    /// Values are parsed as JSON, falling back to a string.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Print the resolved config and exit without running.
    #[arg(long)]
    print_config: bool,
}

const TOP_LEVEL: [&str; 4] = ["kind", "seed", "out", "workers"];

fn apply_set(root: &mut Value, assignment: &str) -> Result<()> {
    let Some((key, raw)) = assignment.split_once('=') else {
        bail!("--set expects KEY=VALUE, got {assignment:?}");
    };
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut path: Vec<&str> = key.split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        bail!("empty segment in --set key {key:?}");
    }
    if !TOP_LEVEL.contains(&path[0]) && path[0] != "params" {
        path.insert(0, "params");
    }
    let mut node = root;
    for seg in &path[..path.len() - 1] {
        let obj = node
            .as_object_mut()
            .with_context(|| format!("--set {key}: {seg:?} is not inside an object"))?;
        node = obj.entry(seg.to_string()).or_insert_with(|| Value::Object(Map::new()));
        if node.is_null() {
            *node = Value::Object(Map::new());
        }
    }
    let obj = node
        .as_object_mut()
        .with_context(|| format!("--set {key}: parent is not an object"))?;
    obj.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

fn build_config(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut root = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let v: Value = serde_json::from_str(&text).map_err(|e| ExperimentError::Schema(e.to_string()))?;
            if !v.is_object() {
                return Err(ExperimentError::Schema("config must be a JSON object".into()).into());
            }
            v
        }
        None => json!({}),
    };
    let obj = root.as_object_mut().expect("object");
    match obj.get("kind") {
        None => {
            obj.insert("kind".into(), json!(kind));
        }
        Some(k) if *k == json!(kind) => {}
        Some(k) => {
            return Err(ExperimentError::Schema(format!("config is for {k}, not {kind}")).into());
        }
    }
    for s in &args.sets {
        apply_set(&mut root, s)?;
    }
    let mut config = ExperimentConfig::from_value(root)?;
    if config.kind != kind {
        return Err(ExperimentError::Schema(format!("--set cannot change the kind to {}", config.kind)).into());
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(o) = &args.out {
        config.out = Some(o.clone());
    }
    if let Some(w) = args.workers {
        config.workers = Some(w);
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let (kind, args) = cli.command.split();
    let config = build_config(kind, args)?;
    if args.print_config {
        writeln!(
            std::io::stdout(),
            "{}",
            serde_json::to_string_pretty(&config.resolved()?)?
        )?;
        return Ok(());
    }
    let manifest = run_experiment(&config)?;
    writeln!(std::io::stdout(), "{}", manifest.out_dir.join(MANIFEST_FILE).display())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e
                .downcast_ref::<ExperimentError>()
                .map_or("usage", ExperimentError::category);
            let message = match e.downcast_ref::<ExperimentError>() {
                Some(inner) => inner.to_string(),
                None => format!("{e:#}"),
            };
            let body = json!({
                "error": message,
                "category": category,
            });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
