//! Monte-Carlo experiments: MSE over a noise grid, log–log rate fits, and
//! the pathwise Gronwall bound between noisy and noiseless solutions.
//!
//! Replicate `r` is driven by the fBm path with seed `base_seed + r`; the
//! same path is reused for every noise level so cells share random numbers.
//! Replicates may run in parallel; aggregation happens afterwards in
//! replicate order with compensated sums, so results do not depend on the
//! thread count.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddesolve::{
    crossing_time, delay_steps, simulate_delay_sde_with_noise, solve_delay_ode, DelaySpec,
    TrendField,
};
use crate::error::{Error, Result};
use crate::estimator::{estimate_trend_at_level, BandwidthRule, EstimatorConfig, RESOLUTION_GUARD};
use crate::fbm::{path_supremum, FbmSampler, HurstIndex, TimeGrid};
use crate::io::{format_f64, read_json, write_json};
use crate::kernels::KernelSpec;

/// Minimum replicates per cell.
pub const MIN_REPLICATIONS: usize = 100;

/// Ratio of the simulation step to the ground-truth step.
pub const TRUTH_REFINEMENT: f64 = 10.0;

/// Scheme slack in the Gronwall bound, in units of `dt · sup|S|`.
pub const SCHEME_SLACK_FACTOR: f64 = 10.0;

/// Step-size rule for the simulation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DtRuleRepr", into = "DtRuleRepr")]
pub enum DtRule {
    /// `bandwidth(min ε) / 50`, shrunk so that it divides τ (or T when τ = 0).
    Auto,
    Explicit(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DtRuleRepr {
    Step(f64),
    Name(String),
}

impl TryFrom<DtRuleRepr> for DtRule {
    type Error = Error;

    fn try_from(r: DtRuleRepr) -> Result<Self> {
        match r {
            DtRuleRepr::Step(dt) if dt.is_finite() && dt > 0.0 => Ok(DtRule::Explicit(dt)),
            DtRuleRepr::Step(dt) => Err(Error::Config(format!("dt must be positive, got {dt}"))),
            DtRuleRepr::Name(s) if s == "auto" => Ok(DtRule::Auto),
            DtRuleRepr::Name(s) => Err(Error::Config(format!(
                "dt_rule must be \"auto\" or a number, got `{s}`"
            ))),
        }
    }
}

impl From<DtRule> for DtRuleRepr {
    fn from(r: DtRule) -> Self {
        match r {
            DtRule::Auto => DtRuleRepr::Name("auto".into()),
            DtRule::Explicit(dt) => DtRuleRepr::Step(dt),
        }
    }
}

/// A full MSE experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub trend: TrendField,
    pub spec: DelaySpec,
    #[serde(rename = "H")]
    pub hurst: HurstIndex,
    /// Strictly decreasing, all in (0, 1).
    pub epsilons: Vec<f64>,
    pub replications: usize,
    /// Target levels `x`.
    pub levels: Vec<f64>,
    pub kernel: KernelSpec,
    pub bandwidth_rule: BandwidthRule,
    #[serde(default = "default_dt_rule")]
    pub dt_rule: DtRule,
    #[serde(default)]
    pub base_seed: u64,
}

fn default_dt_rule() -> DtRule {
    DtRule::Auto
}

impl ExperimentConfig {
    /// Open level window `(x0, x0 + (T − τ)·α)`.
    pub fn level_window(&self) -> (f64, f64) {
        (self.spec.x0, self.spec.guaranteed_level(self.trend.alpha()))
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.bandwidth_rule.validate()?;
        if self.epsilons.len() < 4 {
            return Err(Error::Config(format!(
                "need at least 4 noise levels, got {}",
                self.epsilons.len()
            )));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(Error::Config(format!("noise level {e} outside (0, 1)")));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(
                "noise levels must be strictly decreasing".into(),
            ));
        }
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::Config(format!(
                "need at least {MIN_REPLICATIONS} replications, got {}",
                self.replications
            )));
        }
        if self.levels.is_empty() {
            return Err(Error::Config("no levels given".into()));
        }
        let (lo, hi) = self.level_window();
        if let Some(x) = self.levels.iter().find(|x| !(**x > lo && **x < hi)) {
            return Err(Error::Config(format!(
                "level {x} outside the admissible window ({lo}, {hi})"
            )));
        }
        Ok(())
    }

    /// Simulation step after applying the dt rule.
    pub fn resolve_dt(&self) -> Result<f64> {
        match self.dt_rule {
            DtRule::Explicit(dt) => {
                delay_steps(self.spec.tau, dt)?;
                Ok(dt)
            }
            DtRule::Auto => {
                let smallest = *self
                    .epsilons
                    .last()
                    .ok_or_else(|| Error::Config("no noise levels given".into()))?;
                let target =
                    self.bandwidth_rule.bandwidth(smallest, self.hurst)? / RESOLUTION_GUARD;
                let unit = if self.spec.tau > 0.0 {
                    self.spec.tau
                } else {
                    self.spec.horizon
                };
                Ok(unit / (unit / target).ceil())
            }
        }
    }
}

/// Aggregates for one `(ε, level)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub epsilon: f64,
    pub level: f64,
    pub bandwidth: f64,
    pub mse: f64,
    pub bias2: f64,
    pub variance: f64,
    /// Standard error of `mse` as a Monte-Carlo mean.
    pub mse_stderr: f64,
    pub n_used: usize,
    pub n_clipped: usize,
    pub n_fallback: usize,
}

/// Least-squares line through `(log ε, log MSE)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelFit {
    pub level: f64,
    pub fit: RateFit,
}

/// Ground truth for one level, from the refined noiseless solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTruth {
    pub level: f64,
    pub crossing_time: f64,
    pub trend_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub dt: f64,
    pub truths: Vec<LevelTruth>,
    /// Ordered by noise level, then level.
    pub cells: Vec<CellReport>,
    /// Fit of the level-averaged MSE against ε.
    pub fit: RateFit,
    pub level_fits: Vec<LevelFit>,
    /// Exponent implied by the bandwidth rule; not fitted.
    pub theoretical_slope: Option<f64>,
}

impl ExperimentReport {
    pub fn cell(&self, epsilon: f64, level: f64) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.epsilon == epsilon && c.level == level)
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Ordinary least squares of `log(mse)` on `log(ε)`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::Domain(format!(
            "rate fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(&(e, m)) = points.iter().find(|(e, m)| !(*e > 0.0 && *m > 0.0)) {
        return Err(Error::Domain(format!(
            "rate fit needs positive values, got (epsilon, mse) = ({e}, {m})"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = points.len() as f64;
    let mx = compensated_sum(xs.iter().copied()) / n;
    let my = compensated_sum(ys.iter().copied()) / n;
    let sxx = compensated_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    if sxx == 0.0 {
        return Err(Error::Domain("rate fit needs distinct noise levels".into()));
    }
    let sxy = compensated_sum(xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    let max_residual = residuals.iter().fold(0.0_f64, |a, r| a.max(r.abs()));
    Ok(RateFit {
        slope,
        intercept,
        residuals,
        max_residual,
    })
}

#[derive(Clone, Copy)]
struct Outcome {
    error: f64,
    clipped: bool,
    fallback: bool,
}

fn aggregate(epsilon: f64, level: f64, bandwidth: f64, outcomes: &[Outcome]) -> Result<CellReport> {
    let n_clipped = outcomes.iter().filter(|o| o.clipped).count();
    let n_fallback = outcomes.iter().filter(|o| o.fallback).count();
    let used: Vec<f64> = outcomes
        .iter()
        .filter(|o| !o.clipped && !o.fallback)
        .map(|o| o.error)
        .collect();
    if used.len() < 2 {
        return Err(Error::Config(format!(
            "fewer than 2 interior replicates at (epsilon, level) = ({epsilon}, {level})"
        )));
    }
    let n = used.len() as f64;
    let mean = compensated_sum(used.iter().copied()) / n;
    let mse = compensated_sum(used.iter().map(|e| e * e)) / n;
    let variance = compensated_sum(used.iter().map(|e| (e - mean) * (e - mean))) / n;
    let sq_dev = compensated_sum(used.iter().map(|e| (e * e - mse) * (e * e - mse))) / (n - 1.0);
    Ok(CellReport {
        epsilon,
        level,
        bandwidth,
        mse,
        bias2: mean * mean,
        variance,
        mse_stderr: (sq_dev / n).sqrt(),
        n_used: used.len(),
        n_clipped,
        n_fallback,
    })
}

/// Runs the MSE experiment described by `config`.
pub fn run_mse_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let dt = config.resolve_dt()?;
    let spec = config.spec;
    let (lo, hi) = config.level_window();

    let fine = solve_delay_ode(&config.trend, &spec, dt / TRUTH_REFINEMENT)?;
    let truths = config
        .levels
        .iter()
        .map(|&level| {
            let t = crossing_time(&fine, level, spec.tau)?;
            Ok(LevelTruth {
                level,
                crossing_time: t,
                trend_value: config.trend.eval(t, level),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let estimators = config
        .epsilons
        .iter()
        .map(|&eps| {
            EstimatorConfig::new(
                eps,
                config.hurst,
                spec.tau,
                spec.horizon,
                config.bandwidth_rule,
            )
            .and_then(|c| c.with_level_window(lo, hi))
            .map_err(|e| Error::Config(format!("epsilon = {eps}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;

    let grid = TimeGrid::covering(spec.horizon, dt)?;
    delay_steps(spec.tau, dt)?;
    let sampler = FbmSampler::davies_harte(grid, config.hurst)?;

    let per_replicate: Vec<Vec<Outcome>> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let noise = sampler.sample(config.base_seed.wrapping_add(r as u64));
            let mut out = Vec::with_capacity(estimators.len() * truths.len());
            for est in &estimators {
                let path = simulate_delay_sde_with_noise(&config.trend, &spec, est.epsilon, &noise)
                    .map_err(|e| Error::Config(format!("epsilon = {}: {e}", est.epsilon)))?;
                for truth in &truths {
                    let e = estimate_trend_at_level(&path, truth.level, est, &config.kernel)
                        .map_err(|e| {
                            Error::Config(format!(
                                "(epsilon, level) = ({}, {}): {e}",
                                est.epsilon, truth.level
                            ))
                        })?;
                    out.push(Outcome {
                        error: e.value - truth.trend_value,
                        clipped: e.edge_clipped,
                        fallback: e.fallback_used,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let n_levels = truths.len();
    let mut cells = Vec::with_capacity(estimators.len() * n_levels);
    for (ei, est) in estimators.iter().enumerate() {
        for (li, truth) in truths.iter().enumerate() {
            let idx = ei * n_levels + li;
            let outcomes: Vec<Outcome> = per_replicate.iter().map(|r| r[idx]).collect();
            cells.push(aggregate(
                est.epsilon,
                truth.level,
                est.bandwidth,
                &outcomes,
            )?);
        }
    }

    let pooled: Vec<(f64, f64)> = estimators
        .iter()
        .enumerate()
        .map(|(ei, est)| {
            let row = &cells[ei * n_levels..(ei + 1) * n_levels];
            (
                est.epsilon,
                compensated_sum(row.iter().map(|c| c.mse)) / n_levels as f64,
            )
        })
        .collect();
    let fit = fit_rate(&pooled)?;
    let level_fits = truths
        .iter()
        .enumerate()
        .map(|(li, truth)| {
            let points: Vec<(f64, f64)> = (0..estimators.len())
                .map(|ei| {
                    let c = &cells[ei * n_levels + li];
                    (c.epsilon, c.mse)
                })
                .collect();
            Ok(LevelFit {
                level: truth.level,
                fit: fit_rate(&points)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ExperimentReport {
        config: config.clone(),
        dt,
        truths,
        cells,
        fit,
        level_fits,
        theoretical_slope: config.bandwidth_rule.theoretical_slope(config.hurst),
    })
}

/// A replicate whose deviation exceeded the Gronwall bound plus slack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub replicate: usize,
    pub seed: u64,
    pub deviation: f64,
    pub bound: f64,
    pub excess: f64,
}

/// Outcome of [`check_gronwall_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub epsilon: f64,
    #[serde(rename = "H")]
    pub hurst: f64,
    pub dt: f64,
    pub replications: usize,
    /// `e^{L·T}`.
    pub gronwall_factor: f64,
    /// `10 · dt · sup|S|`.
    pub scheme_slack: f64,
    pub violations: Vec<BoundViolation>,
    /// Largest `sup|X − x| / (e^{LT}·ε·sup|W|)` over replicates (0 when ε = 0).
    pub max_bound_ratio: f64,
    /// Mean of `sup|X − x|²`.
    pub mean_sup_deviation_sq: f64,
    /// Mean of `sup|W|²`.
    pub mean_sup_noise_sq: f64,
    /// `e^{2LT} · ε² · mean sup|W|²`.
    pub mean_bound: f64,
    /// Mean of `(e^{LT}·ε·sup|W| + slack)²`, the second-moment bound with scheme slack.
    pub mean_bound_with_slack: f64,
    /// `mean sup|X − x|² / ε²`; absent when ε = 0.
    pub normalized_second_moment: Option<f64>,
    /// `mean sup|W|² / T^{2H}`.
    pub sup_moment_constant: f64,
}

impl GronwallReport {
    pub fn pathwise_holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn mean_holds(&self) -> bool {
        self.mean_sup_deviation_sq <= self.mean_bound_with_slack
    }
}

/// Compares Euler paths with the noiseless RK4 solution over `replications` seeds
/// `seed, seed + 1, …`, checking `sup|X − x| <= e^{LT}·ε·sup|W| + 10·dt·sup|S|`.
pub fn check_gronwall_bound(
    trend: &TrendField,
    spec: &DelaySpec,
    hurst: HurstIndex,
    epsilon: f64,
    dt: f64,
    replications: usize,
    seed: u64,
) -> Result<GronwallReport> {
    if replications == 0 {
        return Err(Error::Config("need at least one replication".into()));
    }
    let noiseless = solve_delay_ode(trend, spec, dt)?;
    let sampler = FbmSampler::davies_harte(*noiseless.grid(), hurst)?;
    let factor = (trend.lip_x() * spec.horizon).exp();
    let slack = SCHEME_SLACK_FACTOR * dt * trend.sup_bound();

    struct Rep {
        deviation: f64,
        noise_sup: f64,
    }
    let reps: Vec<Rep> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let noise = sampler.sample(seed.wrapping_add(r as u64));
            let path = simulate_delay_sde_with_noise(trend, spec, epsilon, &noise)?;
            let deviation = path
                .values()
                .iter()
                .zip(noiseless.values())
                .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
            Ok(Rep {
                deviation,
                noise_sup: path_supremum(&noise),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut violations = Vec::new();
    let mut max_ratio = 0.0_f64;
    for (r, rep) in reps.iter().enumerate() {
        let bound = factor * epsilon * rep.noise_sup;
        if rep.deviation > bound + slack {
            violations.push(BoundViolation {
                replicate: r,
                seed: seed.wrapping_add(r as u64),
                deviation: rep.deviation,
                bound,
                excess: rep.deviation - bound - slack,
            });
        }
        if bound > 0.0 {
            max_ratio = max_ratio.max(rep.deviation / bound);
        }
    }
    let n = replications as f64;
    let mean_dev_sq = compensated_sum(reps.iter().map(|r| r.deviation * r.deviation)) / n;
    let mean_noise_sq = compensated_sum(reps.iter().map(|r| r.noise_sup * r.noise_sup)) / n;
    let mean_with_slack = compensated_sum(reps.iter().map(|r| {
        let b = factor * epsilon * r.noise_sup + slack;
        b * b
    })) / n;
    Ok(GronwallReport {
        epsilon,
        hurst: hurst.value(),
        dt,
        replications,
        gronwall_factor: factor,
        scheme_slack: slack,
        violations,
        max_bound_ratio: max_ratio,
        mean_sup_deviation_sq: mean_dev_sq,
        mean_sup_noise_sq: mean_noise_sq,
        mean_bound: factor * factor * epsilon * epsilon * mean_noise_sq,
        mean_bound_with_slack: mean_with_slack,
        normalized_second_moment: (epsilon > 0.0).then(|| mean_dev_sq / (epsilon * epsilon)),
        sup_moment_constant: mean_noise_sq / spec.horizon.powf(2.0 * hurst.value()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

/// Column order of the report CSV.
pub const REPORT_CSV_HEADER: &str = "epsilon,level,mse,bias2,variance,n_clipped,n_fallback";

/// One row of the report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub epsilon: f64,
    pub level: f64,
    pub mse: f64,
    pub bias2: f64,
    pub variance: f64,
    pub n_clipped: usize,
    pub n_fallback: usize,
}

pub fn export_report(report: &ExperimentReport, file: &Path, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Json => write_json(report, file),
        ReportFormat::Csv => {
            let mut body = String::from(REPORT_CSV_HEADER);
            body.push('\n');
            for c in &report.cells {
                let row = [
                    format_f64(c.epsilon),
                    format_f64(c.level),
                    format_f64(c.mse),
                    format_f64(c.bias2),
                    format_f64(c.variance),
                    c.n_clipped.to_string(),
                    c.n_fallback.to_string(),
                ];
                body.push_str(&row.join(","));
                body.push('\n');
            }
            std::fs::write(file, body).map_err(|e| Error::io(file, e))
        }
    }
}

pub fn import_report(file: &Path) -> Result<ExperimentReport> {
    read_json(file)
}

pub fn read_report_csv(file: &Path) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_path(file).map_err(|e| Error::csv(file, e))?;
    let header = reader
        .headers()
        .map_err(|e| Error::csv(file, e))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != REPORT_CSV_HEADER {
        return Err(Error::Config(format!(
            "{}: unexpected header `{header}`",
            file.display()
        )));
    }
    let bad = |s: &str| Error::Config(format!("{}: bad value `{s}`", file.display()));
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::csv(file, e))?;
            let f = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(&rec[i]));
            let u = |i: usize| rec[i].parse::<usize>().map_err(|_| bad(&rec[i]));
            Ok(ReportRow {
                epsilon: f(0)?,
                level: f(1)?,
                mse: f(2)?,
                bias2: f(3)?,
                variance: f(4)?,
                n_clipped: u(5)?,
                n_fallback: u(6)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::make_standard_kernel;

    #[test]
    fn fit_exact_power_laws() {
        let eps = [0.1, 0.05, 0.025, 0.0125];
        let sq: Vec<_> = eps.iter().map(|&e| (e, e * e)).collect();
        let f = fit_rate(&sq).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!(f.max_residual < 1e-12);
        let p: Vec<_> = eps.iter().map(|&e: &f64| (e, 3.0 * e.powf(1.6))).collect();
        let f = fit_rate(&p).unwrap();
        assert!((f.slope - 1.6).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(matches!(
            fit_rate(&[(0.1, 1.0), (0.05, 0.5)]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            fit_rate(&[(0.1, 1.0), (0.05, 0.0), (0.01, 0.1)]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn fit_matches_closed_form_regression() {
        // Noisy synthetic points; normal equations solved by hand.
        let pts = [
            (0.2, 0.05),
            (0.1, 0.02),
            (0.05, 0.004),
            (0.02, 0.0011),
            (0.01, 0.0003),
        ];
        let xs: Vec<f64> = pts.iter().map(|p: &(f64, f64)| p.0.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|p: &(f64, f64)| p.1.ln()).collect();
        let n = 5.0;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let f = fit_rate(&pts).unwrap();
        assert!((f.slope - slope).abs() < 1e-10);
        assert!(f.max_residual > 0.0);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            trend: TrendField::constant(1.5).unwrap(),
            spec: DelaySpec::new(0.5, 0.0, 3.0).unwrap(),
            hurst: HurstIndex::new(0.5).unwrap(),
            epsilons: vec![0.1, 0.05, 0.025, 0.0125],
            replications: 100,
            levels: vec![1.5],
            kernel: make_standard_kernel("epanechnikov").unwrap(),
            bandwidth_rule: BandwidthRule::RateOptimal,
            dt_rule: DtRule::Auto,
            base_seed: 7,
        }
    }

    #[test]
    fn config_validation() {
        let mut c = small_config();
        assert!(c.validate().is_ok());
        c.epsilons = vec![0.1, 0.05, 0.05, 0.01];
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.epsilons.pop();
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.levels = vec![4.0]; // window is (0, 3.75)
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.replications = 99;
        assert!(c.validate().is_err());
    }

    #[test]
    fn auto_dt_divides_delay() {
        let c = small_config();
        let dt = c.resolve_dt().unwrap();
        let phi_min = 0.0125f64.powf(0.4);
        assert!(dt <= phi_min / 50.0);
        assert!(delay_steps(0.5, dt).is_ok());
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains(r#""dt_rule":"auto""#));
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), c);
    }

    #[test]
    fn constant_trend_has_no_bias_and_exact_decomposition() {
        let report = run_mse_experiment(&small_config()).unwrap();
        assert_eq!(report.cells.len(), 4);
        for c in &report.cells {
            assert!((c.mse - c.bias2 - c.variance).abs() <= 1e-12 * c.mse);
            // Bias is a Monte-Carlo mean of zero-mean noise: |mean| within 4 standard errors.
            let se = (c.variance / c.n_used as f64).sqrt();
            assert!(c.bias2.sqrt() < 4.0 * se, "{c:?}");
        }
        assert_eq!(report.theoretical_slope, Some(1.6));
    }
}
