//! The derivative BSDE against difference quotients along a random direction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsallis_robust::bsde::{solve_derivative_bsde, solve_strategy, StepScheme};
use tsallis_robust::{build_lattice, AdaptedProcess, QParams, Strategy, UtilitySpec};

fn random(
    m: &tsallis_robust::LatticeModel,
    rng: &mut impl Rng,
) -> tsallis_robust::Result<Strategy> {
    let c = AdaptedProcess::integrand_from_fn(m, |_| rng.gen_range(0.2..2.0))?;
    Strategy::new(
        m,
        c,
        (0..m.leaf_count())
            .map(|_| rng.gen_range(0.2..3.0))
            .collect(),
    )
}

fn main() -> tsallis_robust::Result<()> {
    let m = build_lattice(1.0, 5, 0.2, 0.1)?;
    let p = QParams::new(2.0, 1.0)?;
    let util = UtilitySpec::power(0.5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base = random(&m, &mut rng)?;
    let dir = base.direction_to(&random(&m, &mut rng)?);

    let sol = solve_strategy(&m, &p, &util, &base, StepScheme::ImplicitEuler)?;
    let d = solve_derivative_bsde(&m, &p, &util, &base, &dir, &sol)?.initial();
    println!("derivative BSDE: {d:.12}");
    for alpha in [1e-2, 1e-3, 1e-4] {
        let moved = solve_strategy(
            &m,
            &p,
            &util,
            &base.step(&dir, alpha),
            StepScheme::ImplicitEuler,
        )?;
        let fd = (moved.initial() - sol.initial()) / alpha;
        println!(
            "alpha = {alpha:.0e}: quotient {fd:.12}, error {:.3e}",
            (fd - d).abs()
        );
    }
    Ok(())
}
