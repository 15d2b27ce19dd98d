use delay_trend::fbm::{Generator, Provenance};
use delay_trend::{
    crossing_time, estimate_trend_at_level, estimate_trend_at_time, hitting_time,
    make_higher_order_kernel, path_supremum, simulate_delay_sde, solve_delay_ode,
    stieltjes_convolution, BandwidthRule, DelaySpec, Error, EstimatorConfig, HurstIndex,
    SamplePath, StandardKernel, TimeGrid, TrendField,
};
use proptest::prelude::*;

fn h(v: f64) -> HurstIndex {
    HurstIndex::new(v).unwrap()
}

fn external(grid: TimeGrid, values: Vec<f64>) -> SamplePath {
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

#[test]
fn noiseless_constant_trend_is_recovered() {
    let trend = TrendField::constant(1.7).unwrap();
    let spec = DelaySpec::new(0.5, 0.0, 3.0).unwrap();
    let x = solve_delay_ode(&trend, &spec, 1e-3).unwrap();
    let rule = BandwidthRule::Manual { bandwidth: 0.2 };
    let cfg = EstimatorConfig::new(0.0, h(0.5), spec.tau, spec.horizon, rule).unwrap();
    for kernel in StandardKernel::ALL.map(|k| k.build()) {
        for level in [0.8, 1.5, 2.5] {
            let e = estimate_trend_at_level(&x, level, &cfg, &kernel).unwrap();
            assert!(
                (e.value - 1.7).abs() < 1e-4,
                "{:?} at {level}: {}",
                kernel.name(),
                e.value
            );
            assert!(!e.fallback_used);
        }
    }
}

#[test]
fn zero_noise_needs_a_manual_bandwidth() {
    let err = EstimatorConfig::new(0.0, h(0.5), 0.5, 3.0, BandwidthRule::RateOptimal);
    assert!(err.is_err());
}

#[test]
fn level_and_time_estimates_agree_at_the_same_center() {
    let trend = TrendField::tanh_sine(2.0, 0.5, 0.3, 1.0).unwrap();
    let spec = DelaySpec::new(0.5, 0.0, 3.0).unwrap();
    let (x, _) = simulate_delay_sde(&trend, &spec, 0.05, h(0.7), 1e-3, 11).unwrap();
    let cfg = EstimatorConfig::new(
        0.05,
        h(0.7),
        spec.tau,
        spec.horizon,
        BandwidthRule::RateOptimal,
    )
    .unwrap();
    let kernel = StandardKernel::Quartic.build();
    let at_level = estimate_trend_at_level(&x, 2.0, &cfg, &kernel).unwrap();
    let at_time = estimate_trend_at_time(&x, at_level.hitting_time, &cfg, &kernel).unwrap();
    assert_eq!(at_level.value, at_time.value);
    assert_eq!(at_time.level, None);
}

#[test]
fn hitting_time_stays_within_the_perturbation_bound() {
    let trend = TrendField::tanh_sine(2.0, 0.5, 0.3, 1.0).unwrap();
    let spec = DelaySpec::new(0.5, 0.0, 3.0).unwrap();
    let dt = 1e-3;
    let ode = solve_delay_ode(&trend, &spec, dt).unwrap();
    let (alpha, lip) = (trend.alpha(), trend.lip_x());
    let t_len = spec.horizon;
    let eps = 0.05;
    for seed in 0..50 {
        let (x, w) = simulate_delay_sde(&trend, &spec, eps, h(0.7), dt, seed).unwrap();
        let sup_w = path_supremum(&w);
        let bound = eps / alpha * ((lip * t_len).exp() * lip * t_len + 1.0) * sup_w
            + 10.0 * dt * trend.sup_bound() / alpha
            + 2.0 * dt;
        for level in [1.0, 2.0, 2.8] {
            let (t_eps, fallback) = hitting_time(&x, level, spec.tau, spec.horizon);
            assert!(!fallback);
            let t_x = crossing_time(&ode, level, spec.tau).unwrap();
            assert!((t_eps - t_x).abs() <= bound, "seed {seed}, level {level}");
        }
    }
}

#[test]
fn higher_order_time_estimates_converge_faster() {
    // f(t) = S(t, x_{t-τ}) on a noiseless path. The constructed kernel jumps at ±1, which
    // costs O(dt/φ) in a left-point sum, so the step is kept far below φ.
    let trend = TrendField::tanh_sine(2.0, 0.5, 0.3, 1.0).unwrap();
    let spec = DelaySpec::new(0.5, 0.0, 3.0).unwrap();
    let x = solve_delay_ode(&trend, &spec, 1e-5).unwrap();
    let t = 1.5;
    let truth = trend.eval(t, x.value_at(t - spec.tau));
    let error = |kernel: &delay_trend::KernelSpec, phi: f64| {
        (stieltjes_convolution(&x, t, kernel, phi).unwrap() - truth).abs()
    };
    let order1 = StandardKernel::Epanechnikov.build();
    let order3 = make_higher_order_kernel(3).unwrap();
    let r1 = error(&order1, 0.5) / error(&order1, 0.25);
    let r3 = error(&order3, 0.5) / error(&order3, 0.25);
    assert!(r1 > 3.0 && r1 < 5.0, "order-1 ratio {r1}");
    assert!(r3 > r1, "order-3 ratio {r3} vs order-1 ratio {r1}");
}

#[test]
fn unreachable_level_falls_back() {
    let grid = TimeGrid::new(0.0, 1e-3, 3000).unwrap();
    let x = external(grid, grid.times().map(|t| 0.5 * t).collect());
    let cfg = EstimatorConfig::new(0.01, h(0.5), 0.5, 3.0, BandwidthRule::RateOptimal)
        .unwrap()
        .with_level_window(0.0, 10.0)
        .unwrap();
    let e = estimate_trend_at_level(&x, 5.0, &cfg, &StandardKernel::Epanechnikov.build()).unwrap();
    assert!(e.fallback_used);
    assert_eq!(e.hitting_time, 2.5);
}

#[test]
fn window_and_edge_errors() {
    let grid = TimeGrid::new(0.0, 1e-3, 3000).unwrap();
    let x = external(grid, grid.times().collect());
    let cfg = EstimatorConfig::new(0.01, h(0.5), 0.5, 3.0, BandwidthRule::RateOptimal)
        .unwrap()
        .with_level_window(0.0, 2.5)
        .unwrap();
    let k = StandardKernel::Epanechnikov.build();
    assert!(matches!(
        estimate_trend_at_level(&x, 2.6, &cfg, &k),
        Err(Error::OutOfRange(_))
    ));
    assert!(matches!(
        estimate_trend_at_level(&x, 0.0, &cfg, &k),
        Err(Error::OutOfRange(_))
    ));
    assert!(matches!(
        estimate_trend_at_time(&x, 0.1, &cfg, &k),
        Err(Error::Edge(_))
    ));
    assert!(matches!(
        estimate_trend_at_time(&x, 2.95, &cfg, &k),
        Err(Error::Edge(_))
    ));
    let coarse = TimeGrid::new(0.0, 0.1, 30).unwrap();
    let y = external(coarse, coarse.times().collect());
    assert!(matches!(
        estimate_trend_at_time(&y, 1.5, &cfg, &k),
        Err(Error::Config(_))
    ));
}

fn grid_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 1001)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convolution_is_linear_in_the_path(
        a in grid_values(),
        b in grid_values(),
        ca in -3.0f64..3.0,
        cb in -3.0f64..3.0,
        center in 0.3f64..0.7,
    ) {
        let grid = TimeGrid::new(0.0, 1e-3, 1000).unwrap();
        let k = StandardKernel::Triangular.build();
        let phi = 0.2;
        let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| ca * x + cb * y).collect();
        let fa = stieltjes_convolution(&external(grid, a), center, &k, phi).unwrap();
        let fb = stieltjes_convolution(&external(grid, b), center, &k, phi).unwrap();
        let fc = stieltjes_convolution(&external(grid, combo), center, &k, phi).unwrap();
        let scale = 1.0 + fa.abs() + fb.abs();
        prop_assert!((fc - (ca * fa + cb * fb)).abs() <= 1e-9 * scale * (1.0 + ca.abs() + cb.abs()));
    }

    #[test]
    fn increments_outside_the_support_are_ignored(
        a in grid_values(),
        shift in -10.0f64..10.0,
        center in 0.3f64..0.7,
    ) {
        let grid = TimeGrid::new(0.0, 1e-3, 1000).unwrap();
        let k = StandardKernel::Epanechnikov.build();
        let phi = 0.15;
        let base = stieltjes_convolution(&external(grid, a.clone()), center, &k, phi).unwrap();
        // Shifting the path by a constant, or by a step whose increment sits
        // outside (center - φ, center + φ), leaves the sum unchanged.
        let cut = ((center + phi) / grid.dt).ceil() as usize + 2;
        let moved: Vec<f64> = a
            .iter()
            .enumerate()
            .map(|(i, v)| v + shift + if i >= cut { 100.0 } else { 0.0 })
            .collect();
        let other = stieltjes_convolution(&external(grid, moved), center, &k, phi).unwrap();
        prop_assert!((other - base).abs() <= 1e-9 * (1.0 + base.abs()));
    }
}
