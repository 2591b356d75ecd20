#![allow(dead_code)]

use rand::Rng;
use tsallis_robust::{AdaptedProcess, LatticeModel, Strategy};

/// Consumption in `[c_lo, c_hi]`, terminal wealth in `[x_lo, x_hi]`.
pub fn random_strategy(
    m: &LatticeModel,
    rng: &mut impl Rng,
    c: (f64, f64),
    x: (f64, f64),
) -> Strategy {
    let consumption = AdaptedProcess::integrand_from_fn(m, |_| rng.gen_range(c.0..c.1)).unwrap();
    let terminal = (0..m.leaf_count())
        .map(|_| rng.gen_range(x.0..x.1))
        .collect();
    Strategy::new(m, consumption, terminal).unwrap()
}

pub fn interior(m: &LatticeModel, rng: &mut impl Rng) -> Strategy {
    random_strategy(m, rng, (0.2, 2.0), (0.2, 3.0))
}

/// `E[f]` over leaves of a node-level vector.
pub fn leaf_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
