//! Monte-Carlo MSE over a noise grid with a log-log slope fit.
//!
//! `cargo run --release --example rate_experiment -- [replications]`

use delay_trend::{
    make_higher_order_kernel, run_mse_experiment, BandwidthRule, DelaySpec, DtRule,
    ExperimentConfig, HurstIndex, KernelSpec, StandardKernel, TrendField,
};

fn config(
    h: f64,
    kernel: KernelSpec,
    rule: BandwidthRule,
    reps: usize,
) -> delay_trend::Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        trend: TrendField::tanh_sine(2.0, 0.5, 0.3, 1.0)?,
        spec: DelaySpec::new(0.5, 0.0, 3.0)?,
        hurst: HurstIndex::new(h)?,
        epsilons: vec![0.1, 0.05, 0.025, 0.0125],
        replications: reps,
        levels: vec![1.5, 2.25],
        kernel,
        bandwidth_rule: rule,
        dt_rule: DtRule::Explicit(5e-4),
        base_seed: 0,
    })
}

fn main() -> delay_trend::Result<()> {
    let reps = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(300);
    let runs = [
        (
            "epanechnikov, H = 0.5",
            config(
                0.5,
                StandardKernel::Epanechnikov.build(),
                BandwidthRule::RateOptimal,
                reps,
            )?,
        ),
        (
            "epanechnikov, H = 0.7",
            config(
                0.7,
                StandardKernel::Epanechnikov.build(),
                BandwidthRule::RateOptimal,
                reps,
            )?,
        ),
        (
            "order 3, H = 0.5",
            config(
                0.5,
                make_higher_order_kernel(3)?,
                BandwidthRule::Smooth { k: 3, beta: 1.0 },
                reps,
            )?,
        ),
    ];
    for (name, cfg) in runs {
        let report = run_mse_experiment(&cfg)?;
        println!(
            "{name}: fitted slope {:.3} (theory {:.3}), max residual {:.3}",
            report.fit.slope,
            report.theoretical_slope.unwrap_or(f64::NAN),
            report.fit.max_residual
        );
        for c in &report.cells {
            println!(
                "    eps {:<7} level {:<5} phi {:.4}  mse {:.3e}  bias² {:.3e}  var {:.3e}",
                c.epsilon, c.level, c.bandwidth, c.mse, c.bias2, c.variance
            );
        }
    }
    Ok(())
}
