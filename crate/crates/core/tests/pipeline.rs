//! End-to-end checks across modules: registry drift -> fBm noise -> solvers.

use std::collections::BTreeMap;

use proptest::prelude::*;
use regnoise::drift::{build_drift, DriftField, FieldSpec};
use regnoise::fbm::{sample_fbm, TimeGrid};
use regnoise::sde::{solve_euler, SdeProblem};
use regnoise::transport::forward_flow;
use regnoise::young::DiscretePath;

fn sine() -> DriftField {
    let params = BTreeMap::from([("amplitude".to_string(), 0.8), ("frequency".to_string(), 1.5)]);
    build_drift(&FieldSpec { name: "sine".into(), params }).unwrap()
}

#[test]
fn characteristics_agree_with_the_euler_solver() {
    let grid = TimeGrid::unit(256).unwrap();
    let b = sample_fbm(0.5, grid, 1, 42).unwrap();
    let noise = DiscretePath::from_fbm(&b);
    for x0 in [-1.0, 0.0, 0.7] {
        let sol = solve_euler(&SdeProblem::new(sine(), &b, vec![x0]).unwrap()).unwrap();
        for t in [1, 64, 256] {
            let flow = forward_flow(&sine(), &noise, t, x0).unwrap();
            let expected = sol.x.at(t)[0] - sol.x.at(0)[0] + x0;
            assert!((flow - expected).abs() < 1e-12, "t={t}: {flow} vs {expected}");
        }
    }
}

#[test]
fn zero_drift_solution_is_shifted_noise() {
    let zero = build_drift(&FieldSpec { name: "zero".into(), params: BTreeMap::new() }).unwrap();
    let b = sample_fbm(0.3, TimeGrid::unit(128).unwrap(), 1, 9).unwrap();
    let sol = solve_euler(&SdeProblem::new(zero, &b, vec![0.25]).unwrap()).unwrap();
    let noise = DiscretePath::from_fbm(&b);
    for i in 0..=128 {
        assert_eq!(sol.phi.at(i)[0], 0.25);
        assert!((sol.x.at(i)[0] - 0.25 - (noise.at(i)[0] - noise.at(0)[0])).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // dt * Lip(b) < 1, so each Euler step is increasing in the state
    #[test]
    fn scalar_flow_preserves_order(seed in 0u64..1000, x in -2.0f64..2.0, gap in 1e-6f64..1.0) {
        let b = sample_fbm(0.5, TimeGrid::unit(128).unwrap(), 1, seed).unwrap();
        let noise = DiscretePath::from_fbm(&b);
        let lo = forward_flow(&sine(), &noise, 128, x).unwrap();
        let hi = forward_flow(&sine(), &noise, 128, x + gap).unwrap();
        prop_assert!(hi > lo);
    }
}
