//! Exact fBm sampling: Davies–Harte against Cholesky on the same grid.
//!
//! `cargo run --release --example fbm_samplers`

use delay_trend::{fbm_covariance, FbmSampler, HurstIndex, TimeGrid};

fn main() -> delay_trend::Result<()> {
    let grid = TimeGrid::new(0.0, 1.0 / 128.0, 128)?;
    let n = 4000;
    println!(
        "{:>5} {:>12} {:>12} {:>12} {:>12}",
        "H", "Var W(1) DH", "Var W(1) Ch", "Cov(½,1) DH", "exact"
    );
    for h in [0.3, 0.5, 0.7, 0.9] {
        let hurst = HurstIndex::new(h)?;
        let dh = FbmSampler::davies_harte(grid, hurst)?;
        let chol = FbmSampler::cholesky(grid, hurst)?;
        let (mut v_dh, mut v_ch, mut c_dh) = (0.0, 0.0, 0.0);
        for seed in 0..n {
            let a = dh.sample(seed);
            let b = chol.sample(seed);
            v_dh += a.values()[128].powi(2);
            v_ch += b.values()[128].powi(2);
            c_dh += a.values()[64] * a.values()[128];
        }
        let n = n as f64;
        println!(
            "{h:>5} {:>12.4} {:>12.4} {:>12.4} {:>12.4}",
            v_dh / n,
            v_ch / n,
            c_dh / n,
            fbm_covariance(0.5, 1.0, hurst)?
        );
    }
    Ok(())
}
