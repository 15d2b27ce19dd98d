//! Delay ODE and small-noise delay SDE solvers.
//!
//! All solvers require the step to divide the delay, so delayed lookups are
//! index shifts. The deterministic solver is classical RK4 applied with the
//! method of steps; midpoint stages read the delayed segment through cubic
//! Hermite interpolation built from stored node derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{FbmSampler, Generator, HurstIndex, Provenance, SamplePath, TimeGrid};

/// Relative tolerance for "dt divides tau".
pub const ALIGNMENT_TOLERANCE: f64 = 1e-12;

/// Catalog of trend functions `S(t, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendKind {
    /// `S = c`, params `[c]`.
    Constant,
    /// `S = c0 + c1·tanh(x) + c2·sin(ω t)`, params `[c0, c1, c2, ω]`.
    TanhSine,
    /// `S = c0 + c1 / (1 + x²)`, params `[c0, c1]`.
    Logistic,
}

/// Serialized form of a [`TrendField`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSpec {
    pub kind: TrendKind,
    pub params: Vec<f64>,
}

/// A catalog trend together with its analytic bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrendSpec", into = "TrendSpec")]
pub struct TrendField {
    kind: TrendKind,
    params: Vec<f64>,
    alpha: f64,
    lip_x: f64,
    bound_t: f64,
    sup_bound: f64,
}

impl TrendField {
    pub fn constant(c: f64) -> Result<Self> {
        Self::new(TrendKind::Constant, vec![c])
    }

    pub fn tanh_sine(c0: f64, c1: f64, c2: f64, omega: f64) -> Result<Self> {
        Self::new(TrendKind::TanhSine, vec![c0, c1, c2, omega])
    }

    pub fn logistic(c0: f64, c1: f64) -> Result<Self> {
        Self::new(TrendKind::Logistic, vec![c0, c1])
    }

    pub fn new(kind: TrendKind, params: Vec<f64>) -> Result<Self> {
        let expected = match kind {
            TrendKind::Constant => 1,
            TrendKind::TanhSine => 4,
            TrendKind::Logistic => 2,
        };
        if params.len() != expected {
            return Err(Error::Config(format!(
                "{kind:?} trend takes {expected} params, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config(format!(
                "{kind:?} trend params must be finite"
            )));
        }
        let (alpha, lip_x, bound_t, sup_bound) = match kind {
            TrendKind::Constant => {
                let c = params[0];
                if c <= 0.0 {
                    return Err(Error::Config(format!(
                        "constant trend needs c > 0, got {c}"
                    )));
                }
                (c, 0.0, 0.0, c)
            }
            TrendKind::TanhSine => {
                let [c0, c1, c2, omega] = [params[0], params[1], params[2], params[3]];
                let spread = c1.abs() + c2.abs();
                if !(spread > 0.0 && c0 > spread) {
                    return Err(Error::Config(format!(
                        "tanh_sine trend needs c0 > |c1| + |c2| > 0, got c0 = {c0}, |c1| + |c2| = {spread}"
                    )));
                }
                (c0 - spread, c1.abs(), c2.abs() * omega.abs(), c0 + spread)
            }
            TrendKind::Logistic => {
                let [c0, c1] = [params[0], params[1]];
                let alpha = c0 + c1.min(0.0);
                if alpha <= 0.0 {
                    return Err(Error::Config(format!(
                        "logistic trend needs c0 + min(c1, 0) > 0, got {alpha}"
                    )));
                }
                // max |d/dx 1/(1+x²)| = 3√3/8, attained at x = 1/√3
                let lip = c1.abs() * 3.0 * 3f64.sqrt() / 8.0;
                (alpha, lip, 0.0, c0 + c1.max(0.0))
            }
        };
        let field = TrendField {
            kind,
            params,
            alpha,
            lip_x,
            bound_t,
            sup_bound,
        };
        field.spot_check()?;
        Ok(field)
    }

    /// Dense-grid check of the lower bound and the Lipschitz constant in `x`.
    fn spot_check(&self) -> Result<()> {
        let slack = 1e-12 * self.sup_bound.max(1.0);
        for i in 0..=64 {
            let t = 10.0 * i as f64 / 64.0;
            let mut prev: Option<(f64, f64)> = None;
            for j in 0..=256 {
                let x = -20.0 + 40.0 * j as f64 / 256.0;
                let s = self.eval(t, x);
                if s < self.alpha - slack || s.abs() > self.sup_bound + slack {
                    return Err(Error::Construction(format!(
                        "trend bound check failed at (t, x) = ({t}, {x}): S = {s}"
                    )));
                }
                if let Some((px, ps)) = prev {
                    if (s - ps).abs() > self.lip_x * (x - px).abs() + slack {
                        return Err(Error::Construction(format!(
                            "trend Lipschitz check failed between x = {px} and x = {x}"
                        )));
                    }
                }
                prev = Some((x, s));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let p = &self.params;
        match self.kind {
            TrendKind::Constant => p[0],
            TrendKind::TanhSine => p[0] + p[1] * x.tanh() + p[2] * (p[3] * t).sin(),
            TrendKind::Logistic => p[0] + p[1] / (1.0 + x * x),
        }
    }

    pub fn kind(&self) -> TrendKind {
        self.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Infimum of `S` over `t`, `x`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Bound on `|∂S/∂x|`.
    pub fn lip_x(&self) -> f64 {
        self.lip_x
    }

    /// Bound on `|∂S/∂t|`.
    pub fn bound_t(&self) -> f64 {
        self.bound_t
    }

    /// Uniform bound on `|S|`.
    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }
}

impl TryFrom<TrendSpec> for TrendField {
    type Error = Error;

    fn try_from(spec: TrendSpec) -> Result<Self> {
        TrendField::new(spec.kind, spec.params)
    }
}

impl From<TrendField> for TrendSpec {
    fn from(f: TrendField) -> Self {
        TrendSpec {
            kind: f.kind,
            params: f.params,
        }
    }
}

/// Delay, constant pre-history and horizon of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySpec {
    pub tau: f64,
    pub x0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl DelaySpec {
    pub fn new(tau: f64, x0: f64, horizon: f64) -> Result<Self> {
        let spec = DelaySpec { tau, x0, horizon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::Config(format!("tau must be >= 0, got {}", self.tau)));
        }
        if !self.x0.is_finite() {
            return Err(Error::Config("x0 must be finite".into()));
        }
        if !(self.horizon.is_finite() && self.horizon > self.tau) {
            return Err(Error::Config(format!(
                "horizon T = {} must exceed tau = {}",
                self.horizon, self.tau
            )));
        }
        Ok(())
    }

    /// Upper end of the level window where the crossing is guaranteed: `x0 + (T − τ)·α`.
    pub fn guaranteed_level(&self, alpha: f64) -> f64 {
        self.x0 + (self.horizon - self.tau) * alpha
    }
}

/// Number of grid steps in `delay`; errors unless `dt` divides it.
pub fn delay_steps(delay: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if delay == 0.0 {
        return Ok(0);
    }
    let m = (delay / dt).round();
    if m < 1.0 || (m * dt - delay).abs() > ALIGNMENT_TOLERANCE * delay {
        return Err(Error::Config(format!(
            "dt = {dt} does not divide the delay {delay}"
        )));
    }
    Ok(m as usize)
}

/// RK4 method of steps for `x'(t) = f(t, x(t), x(t − lag·dt))`.
///
/// `prehistory` is the value on `[−lag·dt, 0)`; `initial` is `x(0)`, which may differ.
/// Delayed stages in step `i` read segment `i − lag`, so a jump at 0 is seen as the
/// pre-history throughout the first delay interval.
fn method_of_steps<F>(
    grid: TimeGrid,
    lag: usize,
    initial: f64,
    prehistory: f64,
    rhs: F,
) -> Result<Vec<f64>>
where
    F: Fn(f64, f64, f64) -> f64,
{
    let n = grid.n_steps;
    let dt = grid.dt;
    let mut x = vec![0.0; n + 1];
    // Right and left derivatives at each node.
    let mut f_right = vec![0.0; n + 1];
    let mut f_left = vec![0.0; n + 1];
    x[0] = initial;

    let node_derivatives = |x: &[f64], j: usize| -> (f64, f64) {
        let t = grid.time(j);
        if lag == 0 {
            let d = rhs(t, x[j], x[j]);
            return (d, d);
        }
        let right_delayed = if j >= lag { x[j - lag] } else { prehistory };
        let left_delayed = if j > lag { x[j - lag] } else { prehistory };
        (rhs(t, x[j], right_delayed), rhs(t, x[j], left_delayed))
    };
    let (r0, l0) = node_derivatives(&x, 0);
    f_right[0] = r0;
    f_left[0] = l0;

    for i in 0..n {
        let t = grid.time(i);
        let xi = x[i];
        let (k1, k2, k3, k4);
        if lag == 0 {
            k1 = rhs(t, xi, xi);
            let y2 = xi + 0.5 * dt * k1;
            k2 = rhs(t + 0.5 * dt, y2, y2);
            let y3 = xi + 0.5 * dt * k2;
            k3 = rhs(t + 0.5 * dt, y3, y3);
            let y4 = xi + dt * k3;
            k4 = rhs(t + dt, y4, y4);
        } else {
            let (d0, dm, d1) = if i < lag {
                (prehistory, prehistory, prehistory)
            } else {
                let s = i - lag;
                let mid = 0.5 * (x[s] + x[s + 1]) + dt * (f_right[s] - f_left[s + 1]) / 8.0;
                (x[s], mid, x[s + 1])
            };
            k1 = rhs(t, xi, d0);
            k2 = rhs(t + 0.5 * dt, xi + 0.5 * dt * k1, dm);
            k3 = rhs(t + 0.5 * dt, xi + 0.5 * dt * k2, dm);
            k4 = rhs(t + dt, xi + dt * k3, d1);
        }
        let next = xi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::Divergence {
                time: grid.time(i + 1),
            });
        }
        x[i + 1] = next;
        let (r, l) = node_derivatives(&x, i + 1);
        f_right[i + 1] = r;
        f_left[i + 1] = l;
    }
    Ok(x)
}

/// Noiseless delay ODE `x' = S(t, x_{t−τ})`, `x = x0` on `(−∞, 0]`, solved on `[0, T]`.
pub fn solve_delay_ode(trend: &TrendField, spec: &DelaySpec, dt: f64) -> Result<SamplePath> {
    spec.validate()?;
    let lag = delay_steps(spec.tau, dt)?;
    let grid = TimeGrid::covering(spec.horizon, dt)?;
    let values = method_of_steps(grid, lag, spec.x0, spec.x0, |t, _, delayed| {
        trend.eval(t, delayed)
    })?;
    SamplePath::new(
        grid,
        values,
        "x",
        Provenance {
            hurst: None,
            seed: None,
            generator: Generator::MethodOfSteps,
        },
    )
}

/// Fundamental solution of `x' = a·x(t) + b·x(t − 1)` with `x(0) = 1` and zero pre-history.
pub fn fundamental_solution_linear(a: f64, b: f64, horizon: f64, dt: f64) -> Result<SamplePath> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Config(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Config("coefficients must be finite".into()));
    }
    let lag = delay_steps(1.0, dt)?;
    let grid = TimeGrid::covering(horizon, dt)?;
    let values = method_of_steps(grid, lag, 1.0, 0.0, |_, x, delayed| a * x + b * delayed)?;
    SamplePath::new(
        grid,
        values,
        "x0",
        Provenance {
            hurst: None,
            seed: None,
            generator: Generator::MethodOfSteps,
        },
    )
}

/// Euler scheme `X_{i+1} = X_i + S(t_i, X_{i−m})·dt + ε·(W_{i+1} − W_i)` driven by a given path.
///
/// The noise path must live on the simulation grid. Useful when one fBm path drives
/// several noise levels.
pub fn simulate_delay_sde_with_noise(
    trend: &TrendField,
    spec: &DelaySpec,
    epsilon: f64,
    noise: &SamplePath,
) -> Result<SamplePath> {
    spec.validate()?;
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::Config(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    let grid = *noise.grid();
    if grid.t0 != 0.0 || grid.end() < spec.horizon * (1.0 - 1e-12) {
        return Err(Error::Config(format!(
            "noise path covers [{}, {}], need [0, {}]",
            grid.t0,
            grid.end(),
            spec.horizon
        )));
    }
    let lag = delay_steps(spec.tau, grid.dt)?;
    let w = noise.values();
    let dt = grid.dt;
    let mut x = vec![0.0; grid.len()];
    x[0] = spec.x0;
    for i in 0..grid.n_steps {
        let delayed = if lag == 0 {
            x[i]
        } else if i >= lag {
            x[i - lag]
        } else {
            spec.x0
        };
        let next = x[i] + trend.eval(grid.time(i), delayed) * dt + epsilon * (w[i + 1] - w[i]);
        if !next.is_finite() {
            return Err(Error::Divergence {
                time: grid.time(i + 1),
            });
        }
        x[i + 1] = next;
    }
    SamplePath::new(
        grid,
        x,
        "X",
        Provenance {
            hurst: noise.provenance().hurst,
            seed: noise.provenance().seed,
            generator: Generator::Euler,
        },
    )
}

/// Simulate `dX = S(t, X_{t−τ})dt + ε dW^H` and return `(X, W)` on the same grid.
pub fn simulate_delay_sde(
    trend: &TrendField,
    spec: &DelaySpec,
    epsilon: f64,
    hurst: HurstIndex,
    dt: f64,
    seed: u64,
) -> Result<(SamplePath, SamplePath)> {
    spec.validate()?;
    delay_steps(spec.tau, dt)?;
    let grid = TimeGrid::covering(spec.horizon, dt)?;
    let noise = FbmSampler::davies_harte(grid, hurst)?.sample(seed);
    let path = simulate_delay_sde_with_noise(trend, spec, epsilon, &noise)?;
    Ok((path, noise))
}

/// Deterministic crossing time `t_x = τ + s*` with `x(s*) = level`.
///
/// `level` must lie strictly between `x(0)` and `x(T − τ)`.
pub fn crossing_time(path: &SamplePath, level: f64, tau: f64) -> Result<f64> {
    let values = path.values();
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(
            "crossing time needs a strictly increasing path".into(),
        ));
    }
    let grid = path.grid();
    let reach = grid.end() - tau;
    let upper = path.value_at(reach);
    if !(level > values[0] && level < upper) {
        return Err(Error::OutOfRange(format!(
            "level {level} outside ({}, {upper})",
            values[0]
        )));
    }
    // First index with value >= level; index 0 is excluded by the window check.
    let i = values.partition_point(|&v| v < level);
    let (lo, hi) = (values[i - 1], values[i]);
    let s = grid.time(i - 1) + grid.dt * (level - lo) / (hi - lo);
    Ok(tau + s)
}
