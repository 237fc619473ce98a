use infctl_core::{simulate_path, solve_boundary, Absorption, ModelParams, Policy, SimConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Every simulated path stays in the state space, its infimum never
    /// rises, its cumulative control never falls, and it validates as an
    /// admissible path.
    #[test]
    fn paths_are_admissible(
        seed in any::<u64>(),
        index in 0u64..1_000_000,
        q in 0.05f64..2.0,
        x0 in 0.0f64..2.0,
        frac in 0.0f64..=1.0,
        kind in 0usize..4,
        grid_rule in any::<bool>(),
    ) {
        let p = ModelParams::new(1.0, 1.0, 1.0, q).unwrap();
        let table = solve_boundary(&p, 3.8, 1e-2).unwrap();
        let policy = match kind {
            0 => Policy::Null,
            1 => Policy::ImmediatePayout,
            2 => Policy::ConstantBarrier(0.7),
            _ => Policy::OptimalReflection(&table),
        };
        let cfg = SimConfig {
            dt: 1e-2,
            horizon: 2.0,
            seed,
            path_index: index,
            absorption: if grid_rule { Absorption::Grid } else { Absorption::Bridge },
        };
        let i0 = x0 * frac;
        let path = simulate_path(&p, &policy, x0, i0, &cfg).unwrap();
        prop_assert!(path.validate().is_ok());
        let end = path.end();
        for k in 0..=end {
            if path.absorbed_at != Some(k) {
                prop_assert!(path.x[k] >= path.inf[k]);
                prop_assert!(path.x[k] >= 0.0);
            }
            if k > 0 {
                prop_assert!(path.inf[k] <= path.inf[k - 1]);
                prop_assert!(path.dc[k] >= 0.0);
            }
        }
        prop_assert!(path.jumps.iter().all(|j| j.delta_d >= 0.0));
    }
}
