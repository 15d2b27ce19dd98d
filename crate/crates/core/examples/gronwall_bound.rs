//! Pathwise check of `sup|X − x| <= e^{LT} ε sup|W|` over many replicates.
//!
//! `cargo run --release --example gronwall_bound`

use delay_trend::{check_gronwall_bound, DelaySpec, HurstIndex, TrendField};

fn main() -> delay_trend::Result<()> {
    let trend = TrendField::tanh_sine(2.0, 0.5, 0.3, 1.0)?;
    let spec = DelaySpec::new(0.5, 0.0, 3.0)?;
    for (eps, h) in [(0.05, 0.5), (0.05, 0.7), (0.2, 0.9)] {
        let r = check_gronwall_bound(&trend, &spec, HurstIndex::new(h)?, eps, 5e-4, 500, 0)?;
        println!(
            "eps = {eps}, H = {h}: violations {}, max ratio {:.3}, E sup|X-x|²/ε² = {:.4}, E sup|W|²/T^2H = {:.4}",
            r.violations.len(),
            r.max_bound_ratio,
            r.normalized_second_moment.unwrap_or(0.0),
            r.sup_moment_constant
        );
    }
    Ok(())
}
