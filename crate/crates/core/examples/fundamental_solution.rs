//! Fundamental solution of `x'(t) = a x(t) + b x(t − 1)` with `x(0) = 1`, zero pre-history.
//!
//! `cargo run --release --example fundamental_solution`

use delay_trend::fundamental_solution_linear;

fn main() -> delay_trend::Result<()> {
    let (a, b) = (1.0, 0.5);
    let x = fundamental_solution_linear(a, b, 2.0, 1e-4)?;
    let exact = |t: f64| {
        if t <= 1.0 {
            t.exp()
        } else {
            t.exp() + 0.5 * (t - 1.0) * (t - 1.0).exp()
        }
    };
    println!(
        "{:>5} {:>20} {:>20} {:>10}",
        "t", "method of steps", "closed form", "error"
    );
    for k in 0..=8 {
        let t = 0.25 * k as f64;
        let v = x.value_at(t);
        println!(
            "{t:>5} {v:>20.15} {:>20.15} {:>10.2e}",
            exact(t),
            (v - exact(t)).abs()
        );
    }
    Ok(())
}
