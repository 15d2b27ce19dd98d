//! Simulation and nonparametric trend estimation for delay SDEs driven by
//! fractional Brownian motion with small noise,
//!
//! ```text
//! dX_t = S(t, X_{t−τ}) dt + ε dW^H_t,   X_s = x0 for s ≤ 0.
//! ```
//!
//! The crate is organized bottom-up:
//!
//! - [`fbm`]: exact fBm sampling (Cholesky and Davies–Harte) on uniform grids.
//! - [`ddesolve`]: the noiseless delay ODE, the Euler scheme for the SDE,
//!   the linear fundamental solution and deterministic crossing times.
//! - [`kernels`]: compactly supported kernels, including constructed
//!   higher-order polynomial kernels.
//! - [`estimator`]: hitting times and the kernel-weighted Stieltjes estimator,
//!   indexed by level or by time, with the small-noise bandwidth rules.
//! - [`harness`]: Monte-Carlo MSE experiments, log–log rate fits and the
//!   pathwise Gronwall bound check.
//! - [`cli`]: the batch commands exposed by the `delay-trend` binary.

pub mod cli;
pub mod ddesolve;
pub mod error;
pub mod estimator;
pub mod fbm;
pub mod harness;
pub mod io;
pub mod kernels;

pub use ddesolve::{
    crossing_time, fundamental_solution_linear, simulate_delay_sde, simulate_delay_sde_with_noise,
    solve_delay_ode, DelaySpec, TrendField, TrendKind,
};
pub use error::{Error, Result};
pub use estimator::{
    bandwidth_rate_optimal, bandwidth_smooth, estimate_trend_at_level, estimate_trend_at_time,
    hitting_time, stieltjes_convolution, BandwidthRule, EstimatorConfig, TrendEstimate,
};
pub use fbm::{
    fbm_covariance, path_supremum, sample_fbm_cholesky, sample_fbm_davies_harte, FbmSampler,
    HurstIndex, SamplePath, TimeGrid,
};
pub use harness::{
    check_gronwall_bound, export_report, fit_rate, import_report, run_mse_experiment, DtRule,
    ExperimentConfig, ExperimentReport, GronwallReport, RateFit, ReportFormat,
};
pub use kernels::{
    eval_kernel, kernel_moment, make_higher_order_kernel, make_standard_kernel, KernelSpec,
    StandardKernel,
};
