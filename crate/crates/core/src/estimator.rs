//! Kernel-type trend estimation from a single observed path.
//!
//! The estimator is a kernel-weighted Stieltjes integral of the path,
//! `(1/φ) Σ G((s_i − c)/φ)·(X_{i+1} − X_i)`, centered either at the first
//! time the delayed path reaches a level (level-indexed estimate) or at a
//! given time (time-indexed estimate, which needs no knowledge of τ).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{HurstIndex, SamplePath};
use crate::kernels::KernelSpec;

/// The bandwidth must span at least this many grid steps.
pub const RESOLUTION_GUARD: f64 = 50.0;

/// How the bandwidth follows the noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `φ = ε^{1/(3 − H)}`, balancing the φ⁴ bias of an order-1 kernel against the noise variance.
    RateOptimal,
    /// `φ = ε^{1/(k − H + β + 1)}` for trends with a β-Hölder k-th derivative.
    Smooth { k: u32, beta: f64 },
    /// A fixed bandwidth.
    Manual { bandwidth: f64 },
}

impl BandwidthRule {
    pub fn bandwidth(&self, epsilon: f64, hurst: HurstIndex) -> Result<f64> {
        match *self {
            BandwidthRule::RateOptimal => bandwidth_rate_optimal(epsilon, hurst),
            BandwidthRule::Smooth { k, beta } => bandwidth_smooth(epsilon, hurst, k, beta),
            BandwidthRule::Manual { bandwidth } => {
                if bandwidth.is_finite() && bandwidth > 0.0 {
                    Ok(bandwidth)
                } else {
                    Err(Error::Config(format!(
                        "bandwidth must be positive, got {bandwidth}"
                    )))
                }
            }
        }
    }

    /// Exponent `r` in `MSE ≤ C ε^r` implied by the rule, if it scales with ε.
    pub fn theoretical_slope(&self, hurst: HurstIndex) -> Option<f64> {
        let h = hurst.value();
        match *self {
            BandwidthRule::RateOptimal => Some(4.0 / (3.0 - h)),
            BandwidthRule::Smooth { k, beta } => {
                let k = k as f64;
                Some(2.0 * (k + beta) / (k - h + beta + 1.0))
            }
            BandwidthRule::Manual { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BandwidthRule::Smooth { k, beta } if k == 0 || !(0.0..=1.0).contains(&beta) => {
                Err(Error::Config(format!(
                    "smooth rule needs k >= 1 and beta in [0, 1], got k = {k}, beta = {beta}"
                )))
            }
            BandwidthRule::Manual { bandwidth } if !(bandwidth.is_finite() && bandwidth > 0.0) => {
                Err(Error::Config(format!(
                    "bandwidth must be positive, got {bandwidth}"
                )))
            }
            _ => Ok(()),
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Domain(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if epsilon >= 1.0 {
        log::warn!("epsilon = {epsilon} >= 1: small-noise bandwidth used outside its regime");
    }
    Ok(())
}

/// `ε^{1/(3 − H)}`.
pub fn bandwidth_rate_optimal(epsilon: f64, hurst: HurstIndex) -> Result<f64> {
    check_epsilon(epsilon)?;
    Ok(epsilon.powf(1.0 / (3.0 - hurst.value())))
}

/// `ε^{1/(k − H + β + 1)}`.
pub fn bandwidth_smooth(epsilon: f64, hurst: HurstIndex, k: u32, beta: f64) -> Result<f64> {
    BandwidthRule::Smooth { k, beta }.validate()?;
    check_epsilon(epsilon)?;
    Ok(epsilon.powf(1.0 / (k as f64 - hurst.value() + beta + 1.0)))
}

/// Noise level, model constants and bandwidth for one estimation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub epsilon: f64,
    #[serde(rename = "H")]
    pub hurst: HurstIndex,
    pub tau: f64,
    /// Observation horizon `T`.
    #[serde(rename = "T")]
    pub horizon: f64,
    pub bandwidth: f64,
    pub bandwidth_rule: BandwidthRule,
    /// Open interval of admissible levels, typically `(x0, x0 + (T − τ)·α)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_window: Option<(f64, f64)>,
}

impl EstimatorConfig {
    pub fn new(
        epsilon: f64,
        hurst: HurstIndex,
        tau: f64,
        horizon: f64,
        rule: BandwidthRule,
    ) -> Result<Self> {
        rule.validate()?;
        let bandwidth = rule.bandwidth(epsilon, hurst)?;
        let config = EstimatorConfig {
            epsilon,
            hurst,
            tau,
            horizon,
            bandwidth,
            bandwidth_rule: rule,
            level_window: None,
        };
        config.validate()?;
        if !hurst.wiener_integral_regime() {
            log::warn!("H = {hurst} < 1/2: the estimator's rate is not established in this range");
        }
        Ok(config)
    }

    pub fn with_level_window(mut self, lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::Config(format!(
                "empty level window ({lower}, {upper})"
            )));
        }
        self.level_window = Some((lower, upper));
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let noiseless_ok = matches!(self.bandwidth_rule, BandwidthRule::Manual { .. });
        if !(self.epsilon.is_finite()
            && (self.epsilon > 0.0 || (self.epsilon == 0.0 && noiseless_ok)))
        {
            return Err(Error::Config(format!(
                "epsilon must be positive (or 0 with a manual bandwidth), got {}",
                self.epsilon
            )));
        }
        if !(self.tau >= 0.0 && self.horizon > self.tau) {
            return Err(Error::Config(format!(
                "need 0 <= tau < T, got tau = {}, T = {}",
                self.tau, self.horizon
            )));
        }
        let limit = (self.horizon - self.tau) / 4.0;
        if !(self.bandwidth > 0.0 && self.bandwidth < limit) {
            return Err(Error::Config(format!(
                "bandwidth {} outside (0, (T - tau)/4) = (0, {limit})",
                self.bandwidth
            )));
        }
        match self.bandwidth_rule {
            BandwidthRule::Manual { bandwidth } if bandwidth != self.bandwidth => Err(
                Error::Config("bandwidth differs from the manual rule's value".into()),
            ),
            BandwidthRule::Manual { .. } => Ok(()),
            rule => {
                let expected = rule.bandwidth(self.epsilon, self.hurst)?;
                if expected != self.bandwidth {
                    return Err(Error::Config(format!(
                        "bandwidth {} does not follow its rule (expected {expected})",
                        self.bandwidth
                    )));
                }
                Ok(())
            }
        }
    }
}

/// One estimate with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendEstimate {
    pub value: f64,
    /// Kernel center: the hitting time for level estimates, the requested time otherwise.
    pub hitting_time: f64,
    /// Level `x`; absent for time-indexed estimates.
    pub level: Option<f64>,
    /// Center within `2φ` of either end of `[0, T]`.
    pub edge_clipped: bool,
    /// No crossing was observed and the center fell back to `T − τ`.
    pub fallback_used: bool,
    pub bandwidth: f64,
    pub epsilon: f64,
    #[serde(rename = "H")]
    pub hurst: f64,
}

/// First `t > τ` with `X_{t−τ} >= level`, refined by linear interpolation.
///
/// Returns `(T − τ, true)` when the delayed path stays below `level` on `[0, T − τ]`.
pub fn hitting_time(path: &SamplePath, level: f64, tau: f64, horizon: f64) -> (f64, bool) {
    let grid = path.grid();
    let values = path.values();
    let reach = horizon - tau;
    let slack = 1e-9 * grid.dt;
    for (i, &v) in values.iter().enumerate() {
        let s = grid.time(i);
        if s > reach + slack {
            break;
        }
        if v >= level {
            if i == 0 {
                return (tau + s, false);
            }
            let prev = values[i - 1];
            let frac = (level - prev) / (v - prev);
            return (tau + grid.time(i - 1) + frac * grid.dt, false);
        }
    }
    (horizon - tau, true)
}

/// `(1/φ) Σ_i G((s_i − center)/φ)·(X_{i+1} − X_i)` with left endpoints `s_i`.
///
/// Only increments whose left endpoint lies strictly inside `(center − φ, center + φ)`
/// contribute; all others have zero weight.
pub fn stieltjes_convolution(
    path: &SamplePath,
    center: f64,
    kernel: &KernelSpec,
    bandwidth: f64,
) -> Result<f64> {
    let grid = path.grid();
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::Config(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    if bandwidth < RESOLUTION_GUARD * grid.dt {
        return Err(Error::Config(format!(
            "bandwidth {bandwidth} needs dt <= {} (grid has dt = {})",
            bandwidth / RESOLUTION_GUARD,
            grid.dt
        )));
    }
    if !(center >= grid.t0 && center <= grid.end()) {
        return Err(Error::OutOfRange(format!(
            "kernel center {center} outside [{}, {}]",
            grid.t0,
            grid.end()
        )));
    }
    let values = path.values();
    let lo = ((center - bandwidth - grid.t0) / grid.dt).floor().max(0.0) as usize;
    let hi = (((center + bandwidth - grid.t0) / grid.dt).ceil() as usize).min(grid.n_steps - 1);
    let mut sum = 0.0;
    for i in lo..=hi {
        let u = (grid.time(i) - center) / bandwidth;
        if u.abs() >= 1.0 {
            continue;
        }
        sum += kernel.eval(u) * (values[i + 1] - values[i]);
    }
    Ok(sum / bandwidth)
}

fn edge_clipped(center: f64, horizon: f64, bandwidth: f64) -> bool {
    center <= 2.0 * bandwidth || horizon - center <= 2.0 * bandwidth
}

/// Estimate of `S(t_x, x)`: the convolution centered at the hitting time of `level`.
pub fn estimate_trend_at_level(
    path: &SamplePath,
    level: f64,
    config: &EstimatorConfig,
    kernel: &KernelSpec,
) -> Result<TrendEstimate> {
    let (lower, upper) = config
        .level_window
        .unwrap_or((path.values()[0], f64::INFINITY));
    if !(level > lower && level < upper) {
        return Err(Error::OutOfRange(format!(
            "level {level} outside the admissible window ({lower}, {upper})"
        )));
    }
    let (center, fallback) = hitting_time(path, level, config.tau, config.horizon);
    let value = stieltjes_convolution(path, center, kernel, config.bandwidth)?;
    Ok(TrendEstimate {
        value,
        hitting_time: center,
        level: Some(level),
        edge_clipped: edge_clipped(center, config.horizon, config.bandwidth),
        fallback_used: fallback,
        bandwidth: config.bandwidth,
        epsilon: config.epsilon,
        hurst: config.hurst.value(),
    })
}

/// Estimate of `f(t) = S(t, x_{t−τ})` from the convolution centered at `t`.
pub fn estimate_trend_at_time(
    path: &SamplePath,
    t: f64,
    config: &EstimatorConfig,
    kernel: &KernelSpec,
) -> Result<TrendEstimate> {
    let phi = config.bandwidth;
    if !(t > 2.0 * phi && t < config.horizon - 2.0 * phi) {
        return Err(Error::Edge(format!(
            "time {t} outside the interior window ({}, {})",
            2.0 * phi,
            config.horizon - 2.0 * phi
        )));
    }
    let value = stieltjes_convolution(path, t, kernel, phi)?;
    Ok(TrendEstimate {
        value,
        hitting_time: t,
        level: None,
        edge_clipped: false,
        fallback_used: false,
        bandwidth: phi,
        epsilon: config.epsilon,
        hurst: config.hurst.value(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{Generator, Provenance, TimeGrid};
    use crate::kernels::make_standard_kernel;

    fn path_from(grid: TimeGrid, f: impl Fn(f64) -> f64) -> SamplePath {
        let values = grid.times().map(f).collect();
        SamplePath::new(
            grid,
            values,
            "X",
            Provenance {
                hurst: None,
                seed: None,
                generator: Generator::External,
            },
        )
        .unwrap()
    }

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn bandwidth_values() {
        // mpmath, 40 digits.
        assert!(
            (bandwidth_rate_optimal(0.01, h(0.5)).unwrap() - 0.158_489_319_246_111_35).abs()
                < 1e-15
        );
        assert!(
            (bandwidth_rate_optimal(0.1, h(0.7)).unwrap() - 0.367_466_194_073_668_9).abs() < 1e-15
        );
        assert!(
            (bandwidth_smooth(0.01, h(0.5), 3, 1.0).unwrap() - 0.359_381_366_380_462_7).abs()
                < 1e-15
        );
        assert!(
            (bandwidth_smooth(0.05, h(0.9), 2, 0.5).unwrap() - 0.315_939_442_759_261_9).abs()
                < 1e-15
        );
        // H -> 1 limit: exponent 1/2.
        let near_one = bandwidth_rate_optimal(0.01, h(1.0 - 1e-12)).unwrap();
        assert!((near_one - 0.1).abs() < 1e-10);
        for (eps, hv) in [(0.01, 0.5), (0.2, 0.8), (0.003, 0.6)] {
            assert_eq!(
                bandwidth_smooth(eps, h(hv), 1, 1.0).unwrap(),
                bandwidth_rate_optimal(eps, h(hv)).unwrap()
            );
        }
        assert!(bandwidth_rate_optimal(0.0, h(0.5)).is_err());
        assert!(bandwidth_smooth(0.1, h(0.5), 0, 1.0).is_err());
        assert!(bandwidth_smooth(0.1, h(0.5), 2, 1.5).is_err());
    }

    #[test]
    fn theoretical_slopes() {
        assert!(
            (BandwidthRule::RateOptimal
                .theoretical_slope(h(0.5))
                .unwrap()
                - 1.6)
                .abs()
                < 1e-15
        );
        assert!(
            (BandwidthRule::RateOptimal
                .theoretical_slope(h(0.7))
                .unwrap()
                - 4.0 / 2.3)
                .abs()
                < 1e-15
        );
        let smooth = BandwidthRule::Smooth { k: 3, beta: 1.0 };
        assert!((smooth.theoretical_slope(h(0.5)).unwrap() - 8.0 / 4.5).abs() < 1e-15);
        assert_eq!(
            BandwidthRule::Manual { bandwidth: 0.1 }.theoretical_slope(h(0.5)),
            None
        );
    }

    #[test]
    fn config_invariants() {
        let c = EstimatorConfig::new(0.01, h(0.5), 0.5, 3.0, BandwidthRule::RateOptimal).unwrap();
        assert_eq!(c.bandwidth, 0.01f64.powf(1.0 / 2.5));
        // (T - tau)/4 = 0.1 < 0.158
        assert!(EstimatorConfig::new(0.01, h(0.5), 0.5, 0.9, BandwidthRule::RateOptimal).is_err());
        let mut bad = c.clone();
        bad.bandwidth *= 1.01;
        assert!(bad.validate().is_err());
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains(r#""bandwidth_rule":{"rule":"rate_optimal"}"#));
        assert_eq!(serde_json::from_str::<EstimatorConfig>(&json).unwrap(), c);
    }

    #[test]
    fn hitting_time_cases() {
        let grid = TimeGrid::new(0.0, 0.01, 300).unwrap();
        let x = path_from(grid, |t| t);
        let (t, fb) = hitting_time(&x, 1.0, 0.5, 3.0);
        assert!((t - 1.5).abs() < 1e-12 && !fb);
        assert_eq!(hitting_time(&x, 10.0, 0.5, 3.0), (2.5, true));
        // Level reached only after T - tau counts as no crossing.
        assert_eq!(hitting_time(&x, 2.7, 0.5, 3.0), (2.5, true));
        let (t, _) = hitting_time(&x, 1e-9, 0.5, 3.0);
        assert!((t - 0.5).abs() < 1e-8);
    }

    #[test]
    fn convolution_of_linear_path() {
        let grid = TimeGrid::new(0.0, 1e-3, 3000).unwrap();
        let x = path_from(grid, |t| t);
        for name in ["epanechnikov", "quartic", "triangular", "uniform"] {
            let k = make_standard_kernel(name).unwrap();
            for &(c, phi) in &[(1.5, 0.2), (1.234, 0.1), (2.0, 0.37)] {
                let v = stieltjes_convolution(&x, c, &k, phi).unwrap();
                assert!(
                    (v - 1.0).abs() < 10.0 * 1e-3 / phi,
                    "{name} c={c} phi={phi}: {v}"
                );
            }
        }
        let flat = path_from(grid, |_| 4.2);
        let k = make_standard_kernel("epanechnikov").unwrap();
        assert_eq!(stieltjes_convolution(&flat, 1.0, &k, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn convolution_of_quadratic_path() {
        // dX = 2s ds; a symmetric kernel returns exactly 2·center in the continuum limit.
        let grid = TimeGrid::new(0.0, 1e-4, 20000).unwrap();
        let x = path_from(grid, |t| t * t);
        let k = make_standard_kernel("epanechnikov").unwrap();
        let v = stieltjes_convolution(&x, 1.0, &k, 0.1).unwrap();
        assert!((v - 2.0).abs() < 0.1f64.powi(2) + 1e-4 / 0.1 * 2.0, "{v}");
    }

    #[test]
    fn resolution_guard() {
        let grid = TimeGrid::new(0.0, 0.01, 300).unwrap();
        let x = path_from(grid, |t| t);
        let k = make_standard_kernel("epanechnikov").unwrap();
        let err = stieltjes_convolution(&x, 1.0, &k, 0.4).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("dt <= 0.008")));
        assert!(stieltjes_convolution(&x, 1.0, &k, 0.5).is_ok());
    }

    #[test]
    fn level_window_and_edges() {
        let grid = TimeGrid::new(0.0, 1e-3, 3000).unwrap();
        let x = path_from(grid, |t| t);
        let k = make_standard_kernel("epanechnikov").unwrap();
        let c = EstimatorConfig::new(0.01, h(0.5), 0.5, 3.0, BandwidthRule::RateOptimal)
            .unwrap()
            .with_level_window(0.0, 2.5)
            .unwrap();
        let e = estimate_trend_at_level(&x, 1.0, &c, &k).unwrap();
        assert!((e.value - 1.0).abs() < 10.0 * 1e-3 / c.bandwidth);
        assert!(!e.edge_clipped && !e.fallback_used);
        assert!(matches!(
            estimate_trend_at_level(&x, 2.6, &c, &k),
            Err(Error::OutOfRange(_))
        ));
        // With tau = 0.1 a level just above X_0 is hit at t ~ 0.1 < 2 phi.
        let short =
            EstimatorConfig::new(0.01, h(0.5), 0.1, 3.0, BandwidthRule::RateOptimal).unwrap();
        let near_start = estimate_trend_at_level(&x, 1e-6, &short, &k).unwrap();
        assert!(near_start.edge_clipped);
        assert!((near_start.hitting_time - 0.1).abs() < 1e-5);

        let t = estimate_trend_at_time(&x, e.hitting_time, &c, &k).unwrap();
        assert_eq!(t.value, e.value);
        assert!(matches!(
            estimate_trend_at_time(&x, 0.2, &c, &k),
            Err(Error::Edge(_))
        ));
    }
}
