//! Statistical properties of the Monte Carlo estimator.

use infctl::verify::{mc_payoff, mc_samples, PayoffEstimate};
use infctl_core::{simulate_path, solve_boundary, value, Absorption, ModelParams, Policy, SimConfig};

fn unit(q: f64) -> ModelParams {
    ModelParams::new(1.0, 1.0, 1.0, q).unwrap()
}

fn sim(dt: f64, horizon: f64, seed: u64, absorption: Absorption) -> SimConfig {
    SimConfig { dt, horizon, seed, path_index: 0, absorption }
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let p = unit(0.5);
    let table = solve_boundary(&p, 3.8, 1e-3).unwrap();
    let cfg = sim(1e-3, 6.0, 7, Absorption::Bridge);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_samples(&p, &Policy::OptimalReflection(&table), 0.5, 0.2, 1500, &cfg).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.len(), 1500);
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn immediate_payout_is_exact() {
    let p = unit(0.7);
    let cfg = sim(1e-2, 1.0, 1, Absorption::Bridge);
    let est = mc_payoff(&p, &Policy::ImmediatePayout, 1.3, 0.4, 200, &cfg).unwrap();
    let exact = (-0.7f64 * 0.4).exp() * 0.9 - (-0.7f64 * 0.4).exp_m1() / 0.7;
    assert!((est.mean - exact).abs() <= 1e-13, "{} vs {exact}", est.mean);
    assert!(est.stderr <= 1e-13);
}

#[test]
fn doubling_paths_shrinks_stderr_by_sqrt_two() {
    let p = unit(0.5);
    let table = solve_boundary(&p, 3.8, 1e-3).unwrap();
    let cfg = sim(1e-3, 6.0, 11, Absorption::Bridge);
    let policy = Policy::OptimalReflection(&table);
    let samples = mc_samples(&p, &policy, 0.5, 0.2, 16_000, &cfg).unwrap();
    let small = PayoffEstimate::from_samples(&samples[..8_000]);
    let large = PayoffEstimate::from_samples(&samples);
    let ratio = small.stderr / large.stderr;
    assert!((ratio / std::f64::consts::SQRT_2 - 1.0).abs() <= 0.1, "ratio {ratio}");
}

#[test]
fn uncontrolled_terminal_mean_follows_the_drift() {
    // Far from zero, absorption within the horizon has negligible probability.
    let p = unit(0.5);
    let (x0, horizon, n) = (20.0, 1.0, 100_000u64);
    let cfg = sim(1e-2, horizon, 3, Absorption::Bridge);
    let ends: Vec<f64> = (0..n)
        .map(|k| {
            let path = simulate_path(&p, &Policy::Null, x0, x0, &SimConfig { path_index: k, ..cfg }).unwrap();
            assert!(path.absorbed_at.is_none());
            path.x[path.end()]
        })
        .collect();
    let e = PayoffEstimate::from_samples(&ends);
    assert!((e.mean - (x0 + p.mu * horizon)).abs() <= 3.0 * e.stderr, "{} +- {}", e.mean, e.stderr);
}

#[test]
fn grid_absorption_bias_shrinks_with_the_step() {
    let p = unit(0.5);
    let table = solve_boundary(&p, 3.8, 1e-4).unwrap();
    let exact = value(0.5, 0.2, &p, Some(&table)).unwrap();
    let err = |dt: f64| {
        let cfg = sim(dt, 12.0, 5, Absorption::Grid);
        let est = mc_payoff(&p, &Policy::OptimalReflection(&table), 0.5, 0.2, 50_000, &cfg).unwrap();
        (est.mean - exact).abs()
    };
    let coarse = err(4e-3);
    let fine = err(1e-3);
    assert!(fine < coarse, "dt=1e-3 error {fine} not below dt=4e-3 error {coarse}");
}
