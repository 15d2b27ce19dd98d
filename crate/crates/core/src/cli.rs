//! Batch commands behind the `delay-trend` binary.
//!
//! Each command reads one JSON config (carrying `"schema": 1`), writes its
//! outputs into a staging directory inside `--out`, and moves them into
//! place only after everything succeeded.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ddesolve::{
    fundamental_solution_linear, simulate_delay_sde, solve_delay_ode, DelaySpec, TrendField,
};
use crate::error::{Error, Result};
use crate::estimator::{
    estimate_trend_at_level, estimate_trend_at_time, BandwidthRule, EstimatorConfig, TrendEstimate,
};
use crate::fbm::{HurstIndex, SamplePath};
use crate::harness::{export_report, run_mse_experiment, ExperimentConfig, ReportFormat};
use crate::io::{
    format_f64, read_json, read_path_csv, write_json, write_path_csv, write_path_with_metadata,
    PathMetadata,
};
use crate::kernels::KernelSpec;

/// Config schema version understood by this build.
pub const SCHEMA_VERSION: u64 = 1;

/// Overrides shared by every command.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Replaces the config's seed (`seed` or `base_seed`).
    pub seed: Option<u64>,
    /// Caps the worker threads used by parallel commands.
    pub threads: Option<usize>,
}

/// Files written by a command and an optional line for standard output.
#[derive(Debug, Clone, Default)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FieldKind {
    Number,
    Integer,
    Text,
    Object,
    NumberArray,
    Any,
}

impl FieldKind {
    fn accepts(self, v: &Value) -> bool {
        match self {
            FieldKind::Number => v.is_number(),
            FieldKind::Integer => v.is_u64(),
            FieldKind::Text => v.is_string(),
            FieldKind::Object => v.is_object(),
            FieldKind::NumberArray => v.as_array().is_some_and(|a| a.iter().all(Value::is_number)),
            FieldKind::Any => true,
        }
    }

    fn describe(self) -> &'static str {
        match self {
            FieldKind::Number => "a number",
            FieldKind::Integer => "a non-negative integer",
            FieldKind::Text => "a string",
            FieldKind::Object => "an object",
            FieldKind::NumberArray => "an array of numbers",
            FieldKind::Any => "a value",
        }
    }
}

struct Field {
    name: &'static str,
    kind: FieldKind,
    required: bool,
}

const fn req(name: &'static str, kind: FieldKind) -> Field {
    Field {
        name,
        kind,
        required: true,
    }
}

const fn opt(name: &'static str, kind: FieldKind) -> Field {
    Field {
        name,
        kind,
        required: false,
    }
}

/// Checks presence and JSON type of every listed field; returns all problems at once.
fn check_fields(value: &Value, fields: &[Field]) -> Vec<String> {
    let Some(obj) = value.as_object() else {
        return vec!["config: expected a JSON object".into()];
    };
    let mut problems = Vec::new();
    match obj.get("schema") {
        None => problems.push("field `schema`: missing".to_owned()),
        Some(v) if v.as_u64() != Some(SCHEMA_VERSION) => problems.push(format!(
            "field `schema`: expected {SCHEMA_VERSION}, got {v}"
        )),
        _ => {}
    }
    for f in fields {
        match obj.get(f.name) {
            None | Some(Value::Null) if f.required => {
                problems.push(format!("field `{}`: missing", f.name))
            }
            None | Some(Value::Null) => {}
            Some(v) if !f.kind.accepts(v) => problems.push(format!(
                "field `{}`: expected {}",
                f.name,
                f.kind.describe()
            )),
            Some(_) => {}
        }
    }
    problems
}

fn load_config<T: DeserializeOwned>(file: &Path, fields: &[Field]) -> Result<T> {
    let text = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::json(file, e))?;
    let problems = check_fields(&value, fields);
    if !problems.is_empty() {
        return Err(Error::Config(format!(
            "{}: {}",
            file.display(),
            problems.join("; ")
        )));
    }
    serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", file.display())))
}

/// Runs `write` against a staging directory inside `out`, then moves every
/// staged file into `out`. On error nothing is moved.
fn stage_outputs(out: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".staging-")
        .tempdir_in(out)
        .map_err(|e| Error::io(out, e))?;
    write(staging.path())?;
    let mut names: Vec<PathBuf> = std::fs::read_dir(staging.path())
        .map_err(|e| Error::io(staging.path(), e))?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(staging.path(), e))?;
    names.sort();
    let mut written = Vec::with_capacity(names.len());
    for src in names {
        let dest = out.join(src.file_name().expect("staged entries have names"));
        std::fs::rename(&src, &dest).map_err(|e| Error::io(&dest, e))?;
        written.push(dest);
    }
    Ok(written)
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    job: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match threads {
        None => job(),
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?
            .install(job),
    }
}

/// `simulate` config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub schema: u64,
    pub trend: TrendField,
    pub spec: DelaySpec,
    #[serde(rename = "H")]
    pub hurst: HurstIndex,
    pub epsilon: f64,
    pub dt: f64,
    pub seed: u64,
}

const SIMULATE_FIELDS: &[Field] = &[
    req("trend", FieldKind::Object),
    req("spec", FieldKind::Object),
    req("H", FieldKind::Number),
    req("epsilon", FieldKind::Number),
    req("dt", FieldKind::Number),
    req("seed", FieldKind::Integer),
];

/// Writes `X.csv`, `W.csv`, `x_noiseless.csv` and a JSON sidecar for each.
pub fn cmd_simulate(config: &Path, out: &Path, opts: &RunOptions) -> Result<CommandOutput> {
    let mut cfg: SimulateConfig = load_config(config, SIMULATE_FIELDS)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let (x, w) = simulate_delay_sde(
        &cfg.trend,
        &cfg.spec,
        cfg.epsilon,
        cfg.hurst,
        cfg.dt,
        cfg.seed,
    )?;
    let noiseless = solve_delay_ode(&cfg.trend, &cfg.spec, cfg.dt)?.with_label("x_noiseless");
    let w = w.with_label("W");
    let files = stage_outputs(out, |dir| {
        write_path_with_metadata(&x, &dir.join("X.csv"))?;
        write_path_with_metadata(&w, &dir.join("W.csv"))?;
        write_path_with_metadata(&noiseless, &dir.join("x_noiseless.csv"))
    })?;
    Ok(CommandOutput {
        files,
        message: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    AtLevel,
    AtTime,
}

/// Inline simulation block of an `estimate` config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InlineSimulation {
    pub trend: TrendField,
    pub spec: DelaySpec,
    #[serde(rename = "H")]
    pub hurst: HurstIndex,
    pub epsilon: f64,
    pub dt: f64,
    pub seed: u64,
}

/// `estimate` config: either a `path` to a `t,value` CSV or an inline `simulate` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub schema: u64,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub simulate: Option<InlineSimulation>,
    pub mode: EstimateMode,
    #[serde(default)]
    pub levels: Vec<f64>,
    #[serde(default)]
    pub times: Vec<f64>,
    pub bandwidth_rule: BandwidthRule,
    pub kernel: KernelSpec,
    /// Required with `path`; taken from `simulate` otherwise.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default, rename = "H")]
    pub hurst: Option<HurstIndex>,
    #[serde(default)]
    pub tau: Option<f64>,
    /// Admissible level window; defaults to `(x0, x0 + (T − τ)α)` for inline simulations.
    #[serde(default)]
    pub level_window: Option<(f64, f64)>,
}

const ESTIMATE_FIELDS: &[Field] = &[
    opt("path", FieldKind::Text),
    opt("simulate", FieldKind::Object),
    req("mode", FieldKind::Text),
    opt("levels", FieldKind::NumberArray),
    opt("times", FieldKind::NumberArray),
    req("bandwidth_rule", FieldKind::Object),
    req("kernel", FieldKind::Object),
    opt("epsilon", FieldKind::Number),
    opt("H", FieldKind::Number),
    opt("tau", FieldKind::Number),
    opt("level_window", FieldKind::NumberArray),
];

fn load_observed_path(config_file: &Path, rel: &Path) -> Result<SamplePath> {
    let file = if rel.is_absolute() {
        rel.to_path_buf()
    } else {
        config_file.parent().unwrap_or(Path::new(".")).join(rel)
    };
    let sidecar = file.with_extension("json");
    let meta: Option<PathMetadata> = if sidecar.is_file() {
        Some(read_json(&sidecar)?)
    } else {
        None
    };
    read_path_csv(&file, meta.as_ref())
}

/// Writes `estimates.json` and `estimates.csv`.
pub fn cmd_estimate(config: &Path, out: &Path, opts: &RunOptions) -> Result<CommandOutput> {
    let mut cfg: EstimateConfig = load_config(config, ESTIMATE_FIELDS)?;
    if let (Some(seed), Some(sim)) = (opts.seed, cfg.simulate.as_mut()) {
        sim.seed = seed;
    }
    let (path, epsilon, hurst, tau, horizon, window) = match (&cfg.path, &cfg.simulate) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "give either `path` or `simulate`, not both".into(),
            ))
        }
        (None, None) => {
            return Err(Error::Config(
                "one of `path` or `simulate` is required".into(),
            ))
        }
        (None, Some(sim)) => {
            let (x, _) = simulate_delay_sde(
                &sim.trend,
                &sim.spec,
                sim.epsilon,
                sim.hurst,
                sim.dt,
                sim.seed,
            )?;
            let window = cfg
                .level_window
                .unwrap_or((sim.spec.x0, sim.spec.guaranteed_level(sim.trend.alpha())));
            (
                x,
                sim.epsilon,
                sim.hurst,
                sim.spec.tau,
                sim.spec.horizon,
                Some(window),
            )
        }
        (Some(rel), None) => {
            let x = load_observed_path(config, rel)?;
            let mut missing = Vec::new();
            if cfg.epsilon.is_none() {
                missing.push("field `epsilon`: required with `path`");
            }
            if cfg.hurst.is_none() {
                missing.push("field `H`: required with `path`");
            }
            if cfg.tau.is_none() {
                missing.push("field `tau`: required with `path`");
            }
            if !missing.is_empty() {
                return Err(Error::Config(missing.join("; ")));
            }
            let horizon = x.grid().end();
            (
                x,
                cfg.epsilon.unwrap(),
                cfg.hurst.unwrap(),
                cfg.tau.unwrap(),
                horizon,
                cfg.level_window,
            )
        }
    };
    let mut est_cfg = EstimatorConfig::new(epsilon, hurst, tau, horizon, cfg.bandwidth_rule)?;
    if let Some((lo, hi)) = window {
        est_cfg = est_cfg.with_level_window(lo, hi)?;
    }

    let targets = match cfg.mode {
        EstimateMode::AtLevel => &cfg.levels,
        EstimateMode::AtTime => &cfg.times,
    };
    if targets.is_empty() {
        return Err(Error::Config(match cfg.mode {
            EstimateMode::AtLevel => "mode at_level needs a non-empty `levels` list".into(),
            EstimateMode::AtTime => "mode at_time needs a non-empty `times` list".to_owned(),
        }));
    }
    let mut estimates: Vec<TrendEstimate> = Vec::with_capacity(targets.len());
    let mut failures = Vec::new();
    for &target in targets {
        let result = match cfg.mode {
            EstimateMode::AtLevel => estimate_trend_at_level(&path, target, &est_cfg, &cfg.kernel),
            EstimateMode::AtTime => estimate_trend_at_time(&path, target, &est_cfg, &cfg.kernel),
        };
        match result {
            Ok(e) => estimates.push(e),
            Err(e) => failures.push(format!("target {target}: {e}")),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Config(failures.join("; ")));
    }

    let files = stage_outputs(out, |dir| {
        write_json(&estimates, &dir.join("estimates.json"))?;
        let mut body =
            String::from("level,hitting_time,value,edge_clipped,fallback_used,bandwidth\n");
        for e in &estimates {
            let level = e.level.map(format_f64).unwrap_or_default();
            body.push_str(&format!(
                "{level},{},{},{},{},{}\n",
                format_f64(e.hitting_time),
                format_f64(e.value),
                e.edge_clipped,
                e.fallback_used,
                format_f64(e.bandwidth)
            ));
        }
        let file = dir.join("estimates.csv");
        std::fs::write(&file, body).map_err(|e| Error::io(&file, e))
    })?;
    Ok(CommandOutput {
        files,
        message: None,
    })
}

/// `rate-experiment` config: an [`ExperimentConfig`] plus the schema tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExperimentConfig {
    pub schema: u64,
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
}

const EXPERIMENT_FIELDS: &[Field] = &[
    req("trend", FieldKind::Object),
    req("spec", FieldKind::Object),
    req("H", FieldKind::Number),
    req("epsilons", FieldKind::NumberArray),
    req("replications", FieldKind::Integer),
    req("levels", FieldKind::NumberArray),
    req("kernel", FieldKind::Object),
    req("bandwidth_rule", FieldKind::Object),
    opt("dt_rule", FieldKind::Any),
    opt("base_seed", FieldKind::Integer),
];

/// Writes `report.json` and `report.csv`; the message compares fitted and theoretical slopes.
pub fn cmd_rate_experiment(config: &Path, out: &Path, opts: &RunOptions) -> Result<CommandOutput> {
    let mut cfg: RateExperimentConfig = load_config(config, EXPERIMENT_FIELDS)?;
    if let Some(seed) = opts.seed {
        cfg.experiment.base_seed = seed;
    }
    let report = with_threads(opts.threads, || run_mse_experiment(&cfg.experiment))?;
    let files = stage_outputs(out, |dir| {
        export_report(&report, &dir.join("report.json"), ReportFormat::Json)?;
        export_report(&report, &dir.join("report.csv"), ReportFormat::Csv)
    })?;
    let theoretical = report
        .theoretical_slope
        .map(|s| format!("{s}"))
        .unwrap_or_else(|| "none".into());
    Ok(CommandOutput {
        files,
        message: Some(format!(
            "fitted_slope={} theoretical_slope={theoretical} max_residual={}",
            report.fit.slope, report.fit.max_residual
        )),
    })
}

/// `kernel-check` config: `{"schema": 1, "kernel": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCheckConfig {
    pub schema: u64,
    pub kernel: KernelSpec,
}

const KERNEL_FIELDS: &[Field] = &[req("kernel", FieldKind::Object)];

/// Writes `moments.csv` (`j,moment`) and `kernel_check.json` with pass/fail per condition.
pub fn cmd_kernel_check(config: &Path, out: &Path, _opts: &RunOptions) -> Result<CommandOutput> {
    let cfg: KernelCheckConfig = load_config(config, KERNEL_FIELDS)?;
    let check = cfg.kernel.check_conditions();
    let files = stage_outputs(out, |dir| {
        let mut body = String::from("j,moment\n");
        for row in &check.moments {
            body.push_str(&format!("{},{}\n", row.j, format_f64(row.moment)));
        }
        let file = dir.join("moments.csv");
        std::fs::write(&file, body).map_err(|e| Error::io(&file, e))?;
        write_json(&check, &dir.join("kernel_check.json"))
    })?;
    Ok(CommandOutput {
        files,
        message: Some(format!("passed={}", check.passed)),
    })
}

/// `fundamental-solution` config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalConfig {
    pub schema: u64,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
}

const FUNDAMENTAL_FIELDS: &[Field] = &[
    req("a", FieldKind::Number),
    req("b", FieldKind::Number),
    req("T", FieldKind::Number),
    req("dt", FieldKind::Number),
];

/// Writes `x0.csv`.
pub fn cmd_fundamental_solution(
    config: &Path,
    out: &Path,
    _opts: &RunOptions,
) -> Result<CommandOutput> {
    let cfg: FundamentalConfig = load_config(config, FUNDAMENTAL_FIELDS)?;
    let x = fundamental_solution_linear(cfg.a, cfg.b, cfg.horizon, cfg.dt)?;
    let files = stage_outputs(out, |dir| write_path_csv(&x, &dir.join("x0.csv")))?;
    Ok(CommandOutput {
        files,
        message: None,
    })
}

/// One-line error report: `error kind=<kind> message=<JSON string>`.
pub fn format_error(err: &Error) -> String {
    let message = serde_json::to_string(&err.to_string()).unwrap_or_else(|_| "\"\"".into());
    format!("error kind={} message={message}", err.kind())
}
