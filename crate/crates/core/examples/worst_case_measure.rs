//! The inner problem: exact recursion, brute-force grid, and the value at
//! the minimizing measure.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tsallis_robust::measures::density_from_eta;
use tsallis_robust::robust::{evaluate_objective, inner_closed_form, inner_dp_grid, EtaGrid};
use tsallis_robust::scenario::random_inner_instance;
use tsallis_robust::{build_lattice, QParams};

fn main() -> tsallis_robust::Result<()> {
    let m = build_lattice(1.0, 5, 0.2, 0.1)?;
    let p = QParams::new(2.0, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (zeta, source) = random_inner_instance(&m, &mut rng, 1.0, 0.05)?;

    let exact = inner_closed_form(&m, &zeta, &source, &p)?;
    let grid = inner_dp_grid(&m, &zeta, &source, &p, &EtaGrid::default_for(&m)?)?;
    let star = density_from_eta(&m, &exact.optimal_eta)?;
    let attained = evaluate_objective(&m, &zeta, &source, &p, &star)?;

    println!("Y0 (recursion)        {:.12}", exact.y0);
    println!("Y0 (2001-point grid)  {:.12}", grid.y0);
    println!("objective at Q*       {:.12}", attained);
    println!("eta* at the root      {:.6}", exact.optimal_eta.root());
    Ok(())
}
