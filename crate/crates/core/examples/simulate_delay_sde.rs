//! Simulate `dX = S(t, X_{t−τ}) dt + ε dW^H` and write the paths as CSV.
//!
//! `cargo run --release --example simulate_delay_sde -- [out_dir]`

use std::path::PathBuf;

use delay_trend::io::write_path_with_metadata;
use delay_trend::{
    path_supremum, simulate_delay_sde, solve_delay_ode, DelaySpec, HurstIndex, TrendField,
};

fn main() -> delay_trend::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "target/simulated".into()),
    );
    std::fs::create_dir_all(&out).map_err(|e| delay_trend::Error::Config(e.to_string()))?;

    let trend = TrendField::tanh_sine(2.0, 0.5, 0.3, 1.0)?;
    let spec = DelaySpec::new(0.5, 0.0, 3.0)?;
    let dt = 1e-3;
    let noiseless = solve_delay_ode(&trend, &spec, dt)?;
    println!(
        "alpha = {}, L = {}, sup|S| = {}",
        trend.alpha(),
        trend.lip_x(),
        trend.sup_bound()
    );
    for (eps, h) in [(0.1, 0.5), (0.1, 0.8), (0.01, 0.8)] {
        let (x, w) = simulate_delay_sde(&trend, &spec, eps, HurstIndex::new(h)?, dt, 2024)?;
        let dev = x
            .values()
            .iter()
            .zip(noiseless.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!(
            "eps = {eps:<5} H = {h}: X(T) = {:.4}, sup|X - x| = {dev:.4}, sup|W| = {:.4}",
            x.values().last().unwrap(),
            path_supremum(&w)
        );
        let stem = format!("eps{eps}_H{h}");
        write_path_with_metadata(&x, &out.join(format!("X_{stem}.csv")))?;
        write_path_with_metadata(&w, &out.join(format!("W_{stem}.csv")))?;
    }
    write_path_with_metadata(&noiseless, &out.join("x_noiseless.csv"))?;
    println!("paths written to {}", out.display());
    Ok(())
}
