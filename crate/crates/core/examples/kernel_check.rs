//! Moment tables for the catalog kernels and the constructed higher-order kernels.
//!
//! `cargo run --release --example kernel_check`

use delay_trend::{make_higher_order_kernel, StandardKernel};

fn main() -> delay_trend::Result<()> {
    let mut kernels: Vec<_> = StandardKernel::ALL.iter().map(|k| k.build()).collect();
    for k in 1..=6 {
        kernels.push(make_higher_order_kernel(k)?);
    }
    for kernel in &kernels {
        let check = kernel.check_conditions();
        let moments: Vec<String> = check
            .moments
            .iter()
            .map(|m| format!("{:+.3e}", m.moment))
            .collect();
        println!(
            "{:<14} order {} passed={} moments [{}]",
            check.name.as_deref().unwrap_or("custom"),
            check.order,
            check.passed,
            moments.join(", ")
        );
        if let Some(c) = kernel.coefficients() {
            println!("{:<14} even coefficients {c:?}", "");
        }
    }
    Ok(())
}
