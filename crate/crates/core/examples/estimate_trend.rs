//! Kernel estimates of the trend along one simulated path, by level and by time.
//!
//! `cargo run --release --example estimate_trend`

use delay_trend::{
    crossing_time, estimate_trend_at_level, estimate_trend_at_time, simulate_delay_sde,
    solve_delay_ode, BandwidthRule, DelaySpec, EstimatorConfig, HurstIndex, StandardKernel,
    TrendField,
};

fn main() -> delay_trend::Result<()> {
    let trend = TrendField::tanh_sine(2.0, 0.5, 0.3, 1.0)?;
    let spec = DelaySpec::new(0.5, 0.0, 3.0)?;
    let hurst = HurstIndex::new(0.7)?;
    let eps = 0.01;
    let dt = 5e-4;
    let (x, _) = simulate_delay_sde(&trend, &spec, eps, hurst, dt, 17)?;
    let ode = solve_delay_ode(&trend, &spec, dt)?;
    let kernel = StandardKernel::Epanechnikov.build();
    let config = EstimatorConfig::new(
        eps,
        hurst,
        spec.tau,
        spec.horizon,
        BandwidthRule::RateOptimal,
    )?
    .with_level_window(spec.x0, spec.guaranteed_level(trend.alpha()))?;
    println!("bandwidth = {:.4}", config.bandwidth);

    println!(
        "{:>6} {:>10} {:>10} {:>10}",
        "level", "t_hit", "estimate", "S(t_x, x)"
    );
    for level in [1.0, 1.5, 2.0, 2.5] {
        let e = estimate_trend_at_level(&x, level, &config, &kernel)?;
        let t_x = crossing_time(&ode, level, spec.tau)?;
        println!(
            "{level:>6} {:>10.4} {:>10.4} {:>10.4}",
            e.hitting_time,
            e.value,
            trend.eval(t_x, level)
        );
    }

    println!("{:>6} {:>10} {:>10}", "t", "estimate", "f(t)");
    for t in [1.0, 1.5, 2.0] {
        let e = estimate_trend_at_time(&x, t, &config, &kernel)?;
        let f = trend.eval(t, ode.value_at(t - spec.tau));
        println!("{t:>6} {:>10.4} {:>10.4}", e.value, f);
    }
    Ok(())
}
