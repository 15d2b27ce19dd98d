use delay_trend::fbm::Generator;
use delay_trend::{
    crossing_time, fundamental_solution_linear, simulate_delay_sde, simulate_delay_sde_with_noise,
    solve_delay_ode, DelaySpec, Error, HurstIndex, TrendField,
};
use proptest::prelude::*;

fn tanh_sine() -> TrendField {
    TrendField::tanh_sine(2.0, 0.5, 0.3, 1.0).unwrap()
}

#[test]
fn rk4_self_convergence() {
    let trend = TrendField::tanh_sine(2.0, 0.5, 0.0, 1.0).unwrap();
    let spec = DelaySpec::new(0.5, 0.0, 2.0).unwrap();
    let coarse = solve_delay_ode(&trend, &spec, 1e-3).unwrap();
    let fine = solve_delay_ode(&trend, &spec, 1e-5).unwrap();
    let worst = coarse
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| (v - fine.values()[100 * i]).abs())
        .fold(0.0_f64, f64::max);
    assert!(worst < 1e-8, "sup difference {worst}");
    assert_eq!(coarse.provenance().generator, Generator::MethodOfSteps);
}

#[test]
fn constant_drift_euler_is_exact() {
    let trend = TrendField::constant(1.5).unwrap();
    let spec = DelaySpec::new(0.25, 0.3, 2.0).unwrap();
    let eps = 0.1;
    let (x, w) =
        simulate_delay_sde(&trend, &spec, eps, HurstIndex::new(0.7).unwrap(), 1e-3, 9).unwrap();
    for (i, t) in x.grid().times().enumerate() {
        let expected = 0.3 + 1.5 * t + eps * w.values()[i];
        assert!((x.values()[i] - expected).abs() < 1e-12, "t = {t}");
    }
}

#[test]
fn noiseless_euler_tracks_rk4() {
    let trend = tanh_sine();
    let spec = DelaySpec::new(0.5, 0.0, 3.0).unwrap();
    let dt = 1e-3;
    let (x, _) =
        simulate_delay_sde(&trend, &spec, 0.0, HurstIndex::new(0.5).unwrap(), dt, 0).unwrap();
    let ode = solve_delay_ode(&trend, &spec, dt).unwrap();
    let worst = x
        .values()
        .iter()
        .zip(ode.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    assert!(
        worst <= 10.0 * dt * trend.sup_bound(),
        "sup difference {worst}"
    );
}

#[test]
fn common_noise_gives_ordered_paths_in_epsilon() {
    let trend = tanh_sine();
    let spec = DelaySpec::new(0.5, 0.0, 3.0).unwrap();
    let (_, w) =
        simulate_delay_sde(&trend, &spec, 0.1, HurstIndex::new(0.7).unwrap(), 1e-3, 3).unwrap();
    let ode = solve_delay_ode(&trend, &spec, 1e-3).unwrap();
    let dev = |eps: f64| {
        let x = simulate_delay_sde_with_noise(&trend, &spec, eps, &w).unwrap();
        x.values()
            .iter()
            .zip(ode.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max)
    };
    assert!(dev(0.01) < dev(0.1));
}

#[test]
fn misaligned_step_is_a_config_error() {
    let spec = DelaySpec::new(0.5, 0.0, 3.0).unwrap();
    let err = solve_delay_ode(&tanh_sine(), &spec, 0.3).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
    let err = simulate_delay_sde(
        &tanh_sine(),
        &spec,
        0.1,
        HurstIndex::new(0.5).unwrap(),
        0.3,
        0,
    );
    assert!(matches!(err, Err(Error::Config(_))));
}

#[test]
fn fundamental_solution_special_cases() {
    let flat = fundamental_solution_linear(0.0, 0.0, 2.0, 1e-3).unwrap();
    assert!(flat.values().iter().all(|v| (*v - 1.0).abs() < 1e-14));
    let exp = fundamental_solution_linear(1.0, 0.0, 2.0, 1e-3).unwrap();
    for (t, v) in exp.grid().times().zip(exp.values()) {
        assert!((v - t.exp()).abs() < 1e-10 * t.exp(), "t = {t}");
    }
    // x' = -x(t) - x(t - 1): on [1, 2], x = e^{-t} - (t - 1)e^{-(t - 1)}.
    let d = fundamental_solution_linear(-1.0, -1.0, 2.0, 1e-3).unwrap();
    for (t, v) in d.grid().times().zip(d.values()) {
        let exact = if t <= 1.0 {
            (-t).exp()
        } else {
            (-t).exp() - (t - 1.0) * (-(t - 1.0)).exp()
        };
        assert!((v - exact).abs() < 1e-10, "t = {t}: {v} vs {exact}");
    }
}

#[test]
fn crossing_time_of_linear_path() {
    let trend = TrendField::constant(2.0).unwrap();
    let spec = DelaySpec::new(0.5, 1.0, 3.0).unwrap();
    let x = solve_delay_ode(&trend, &spec, 1e-3).unwrap();
    let t = crossing_time(&x, 2.0, spec.tau).unwrap();
    assert!((t - 1.0).abs() < 1e-12);
    assert!(matches!(
        crossing_time(&x, 0.5, spec.tau),
        Err(Error::OutOfRange(_))
    ));
    assert!(matches!(
        crossing_time(&x, 10.0, spec.tau),
        Err(Error::OutOfRange(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn crossing_time_is_monotone_in_level(a in 0.05f64..2.9, b in 0.05f64..2.9) {
        let trend = tanh_sine();
        let spec = DelaySpec::new(0.5, 0.0, 3.0).unwrap();
        let x = solve_delay_ode(&trend, &spec, 1e-3).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let tl = crossing_time(&x, lo, spec.tau).unwrap();
        let th = crossing_time(&x, hi, spec.tau).unwrap();
        prop_assert!(tl <= th);
        prop_assert!(tl > spec.tau && th <= spec.horizon);
        // The delayed solution passes through the level at the crossing time.
        prop_assert!((x.value_at(tl - spec.tau) - lo).abs() < 1e-6);
    }

    #[test]
    fn noiseless_solution_grows_at_least_at_rate_alpha(c0 in 1.5f64..4.0, c1 in -0.7f64..0.7, c2 in 0.05f64..0.7) {
        let trend = TrendField::tanh_sine(c0, c1, c2, 1.3).unwrap();
        let spec = DelaySpec::new(0.25, -0.5, 2.0).unwrap();
        let x = solve_delay_ode(&trend, &spec, 1e-3).unwrap();
        let dt = x.grid().dt;
        for w in x.values().windows(2) {
            prop_assert!((w[1] - w[0]) / dt >= trend.alpha() * (1.0 - 1e-9));
            prop_assert!((w[1] - w[0]) / dt <= trend.sup_bound() * (1.0 + 1e-9));
        }
    }
}
