//! The derivative BSDE against difference quotients, and the adjoint
//! representation of the directional derivative of the Lagrangian.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tsallis_robust::bsde::{
    consumption_sensitivity, solve_derivative_bsde, solve_strategy, StepScheme,
};
use tsallis_robust::lattice::{replicate, NodeId};
use tsallis_robust::optimal::adjoints;
use tsallis_robust::{build_lattice, QParams, UtilitySpec};

const SCHEMES: [StepScheme; 2] = [StepScheme::ImplicitEuler, StepScheme::CertaintyEquivalent];

#[test]
fn difference_quotients_converge_at_first_order() {
    let util = UtilitySpec::power(0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (n, q, gamma) in [(3, 2.0, 1.0), (5, 1.5, 0.5), (6, 3.0, 2.0)] {
        let m = build_lattice(1.0, n, 0.2, 0.1).unwrap();
        let p = QParams::new(q, gamma).unwrap();
        let base = common::interior(&m, &mut rng);
        let other = common::interior(&m, &mut rng);
        let dir = base.direction_to(&other);
        for scheme in SCHEMES {
            let sol = solve_strategy(&m, &p, &util, &base, scheme).unwrap();
            let d = solve_derivative_bsde(&m, &p, &util, &base, &dir, &sol)
                .unwrap()
                .initial();
            let errors: Vec<f64> = [1e-2, 1e-3, 1e-4]
                .iter()
                .map(|&a| {
                    let moved = solve_strategy(&m, &p, &util, &base.step(&dir, a), scheme).unwrap();
                    ((moved.initial() - sol.initial()) / a - d).abs()
                })
                .collect();
            for w in errors.windows(2) {
                let ratio = w[0] / w[1];
                assert!(
                    (5.0..=20.0).contains(&ratio),
                    "N={n} {scheme:?} errors {errors:?}"
                );
            }
        }
    }
}

#[test]
fn lagrangian_derivative_matches_adjoint_sum() {
    let util = UtilitySpec::power(0.4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for n in 1..=5 {
        let m = build_lattice(1.0, n, 0.25, 0.1).unwrap();
        let p = QParams::new(1.8, 0.7).unwrap();
        let base = common::interior(&m, &mut rng);
        let dir = base.direction_to(&common::interior(&m, &mut rng));
        let v = -0.37;
        for scheme in SCHEMES {
            let sol = solve_strategy(&m, &p, &util, &base, scheme).unwrap();
            let dy = solve_derivative_bsde(&m, &p, &util, &base, &dir, &sol)
                .unwrap()
                .initial();
            let dx = replicate(&m, &dir).unwrap().x0;
            let lhs = dy - v * dx;

            let adj = adjoints(&m, &p, &util, &base.consumption, &sol).unwrap();
            let terminal: Vec<f64> = (0..m.leaf_count())
                .map(|i| {
                    let node = NodeId::new(n, i);
                    let g = util.g_prime(base.terminal[i], &p).unwrap();
                    (adj.gamma.at(node) * g - v * adj.h.at(node)) * dir.terminal[i]
                })
                .collect();
            let mut rhs = common::leaf_mean(&terminal);
            for k in 0..n {
                let level: Vec<f64> = (0..1usize << k)
                    .map(|i| {
                        let node = NodeId::new(k, i);
                        let fc = consumption_sensitivity(
                            scheme,
                            sol.value.at(node),
                            sol.value.conditional_mean(node),
                            base.consumption.at(node),
                            &util,
                            m.dt(),
                            &p,
                        );
                        (adj.gamma.at(node) * fc - v * adj.h.at(node)) * dir.consumption.at(node)
                    })
                    .collect();
                rhs += common::leaf_mean(&level) * m.dt();
            }
            assert!((lhs - rhs).abs() < 1e-8, "N={n} {scheme:?}: {lhs} vs {rhs}");
        }
    }
}
