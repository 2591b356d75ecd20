//! Comparison, convexity and scheme consistency of the transformed BSDE.

mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsallis_robust::bsde::{
    invert_transform, solve_strategy, solve_transformed, solve_untransformed, StepScheme,
};
use tsallis_robust::qcalc::exp_q;
use tsallis_robust::Strategy as Plan;
use tsallis_robust::{build_lattice, AdaptedProcess, QParams, UtilitySpec};

fn scheme_strategy() -> impl Strategy<Value = StepScheme> {
    prop_oneof![
        Just(StepScheme::ImplicitEuler),
        Just(StepScheme::CertaintyEquivalent)
    ]
}

fn dominating(s: &Plan, rng: &mut impl Rng) -> Plan {
    let mut out = s.clone();
    out.consumption = s.consumption.map(|_, c| c + rng.gen_range(0.0..0.5));
    for x in &mut out.terminal {
        *x += rng.gen_range(0.0..0.5);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn more_consumption_and_wealth_lower_ybar(
        seed in any::<u64>(),
        n in 1usize..=5,
        q in 1.2f64..3.0,
        gamma in 0.3f64..2.0,
        scheme in scheme_strategy(),
    ) {
        let m = build_lattice(1.0, n, 0.2, 0.1).unwrap();
        let p = QParams::new(q, gamma).unwrap();
        let util = UtilitySpec::power(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo = common::interior(&m, &mut rng);
        let hi = dominating(&lo, &mut rng);
        let y_lo = solve_strategy(&m, &p, &util, &lo, scheme).unwrap().initial();
        let y_hi = solve_strategy(&m, &p, &util, &hi, scheme).unwrap().initial();
        prop_assert!(y_hi <= y_lo + 1e-10);
    }

    #[test]
    fn ybar_is_midpoint_convex(
        seed in any::<u64>(),
        n in 1usize..=5,
        q in 1.2f64..3.0,
        gamma in 0.3f64..2.0,
        lambda in prop_oneof![Just(0.25), Just(0.5), Just(0.75)],
        scheme in scheme_strategy(),
    ) {
        let m = build_lattice(1.0, n, 0.2, 0.1).unwrap();
        let p = QParams::new(q, gamma).unwrap();
        let util = UtilitySpec::power(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = common::interior(&m, &mut rng);
        let b = common::interior(&m, &mut rng);
        let mix = a.combine(&b, lambda);
        let ya = solve_strategy(&m, &p, &util, &a, scheme).unwrap().initial();
        let yb = solve_strategy(&m, &p, &util, &b, scheme).unwrap().initial();
        let ym = solve_strategy(&m, &p, &util, &mix, scheme).unwrap().initial();
        prop_assert!(ym <= (1.0 - lambda) * ya + lambda * yb + 1e-10);
    }

    #[test]
    fn larger_terminal_and_source_raise_y(
        seed in any::<u64>(),
        n in 1usize..=5,
        q in 1.2f64..3.0,
    ) {
        let m = build_lattice(1.0, n, 0.2, 0.1).unwrap();
        let p = QParams::new(q, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zeta: Vec<f64> = (0..m.leaf_count()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let bigger: Vec<f64> = zeta.iter().map(|z| z + rng.gen_range(0.0..0.3)).collect();
        let u = AdaptedProcess::integrand_from_fn(&m, |_| rng.gen_range(0.0..0.1)).unwrap();
        let u_big = u.map(|_, x| x + 0.05);
        let solve = |z: &[f64], u: &AdaptedProcess| {
            let t: Vec<f64> = z.iter().map(|&z| exp_q(-z, &p).unwrap()).collect();
            invert_transform(&solve_transformed(&m, &t, u, &p).unwrap(), &p).unwrap().initial()
        };
        let base = solve(&zeta, &u);
        prop_assert!(solve(&bigger, &u) >= base - 1e-12);
        prop_assert!(solve(&zeta, &u_big) >= base - 1e-12);
    }
}

#[test]
fn untransformed_solver_agrees_as_lattice_refines() {
    // smooth terminal in B_T, constant source
    let p = QParams::new(2.0, 1.0).unwrap();
    let mut gaps = Vec::new();
    for n in [6usize, 12] {
        let m = build_lattice(1.0, n, 0.2, 0.1).unwrap();
        let zeta: Vec<f64> = (0..m.leaf_count())
            .map(|i| 0.5 + 0.3 * m.brownian(tsallis_robust::NodeId::new(n, i)).tanh())
            .collect();
        let u = AdaptedProcess::constant_integrand(&m, 0.05).unwrap();
        let t: Vec<f64> = zeta.iter().map(|&z| exp_q(-z, &p).unwrap()).collect();
        let via_transform =
            invert_transform(&solve_transformed(&m, &t, &u, &p).unwrap(), &p).unwrap();
        let direct = solve_untransformed(&m, &zeta, &u, &p).unwrap();
        gaps.push((via_transform.initial() - direct.initial()).abs());
    }
    assert!(gaps[0] <= 5e-3, "{gaps:?}");
    assert!(gaps[1] < gaps[0], "{gaps:?}");
}

#[test]
fn random_n6_instance_within_tolerance() {
    let p = QParams::new(2.0, 1.0).unwrap();
    let m = build_lattice(1.0, 6, 0.2, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let zeta: Vec<f64> = (0..m.leaf_count())
        .map(|_| rng.gen_range(0.0..1.0))
        .collect();
    let u = AdaptedProcess::integrand_from_fn(&m, |_| rng.gen_range(0.0..0.05)).unwrap();
    let t: Vec<f64> = zeta.iter().map(|&z| exp_q(-z, &p).unwrap()).collect();
    let via_transform = invert_transform(&solve_transformed(&m, &t, &u, &p).unwrap(), &p).unwrap();
    let direct = solve_untransformed(&m, &zeta, &u, &p).unwrap();
    assert!((via_transform.initial() - direct.initial()).abs() <= 5e-3);
}
