//! Solving the quadratic BSDE through `Ybar = exp_q(-gamma Y)` and directly,
//! at increasing resolution.

use tsallis_robust::bsde::{invert_transform, solve_transformed, solve_untransformed};
use tsallis_robust::qcalc::exp_q;
use tsallis_robust::{build_lattice, AdaptedProcess, NodeId, QParams};

fn main() -> tsallis_robust::Result<()> {
    let p = QParams::new(2.0, 1.0)?;
    println!(
        "{:>3} {:>18} {:>18} {:>10}",
        "N", "transformed", "direct", "gap"
    );
    for n in [2usize, 4, 8, 16] {
        let m = build_lattice(1.0, n, 0.2, 0.1)?;
        let zeta: Vec<f64> = (0..m.leaf_count())
            .map(|i| 0.5 + 0.3 * m.brownian(NodeId::new(n, i)).tanh())
            .collect();
        let u = AdaptedProcess::constant_integrand(&m, 0.05)?;
        let terminal = zeta
            .iter()
            .map(|&z| exp_q(-z, &p))
            .collect::<Result<Vec<_>, _>>()?;
        let via = invert_transform(&solve_transformed(&m, &terminal, &u, &p)?, &p)?;
        let direct = solve_untransformed(&m, &zeta, &u, &p)?;
        println!(
            "{n:>3} {:>18.12} {:>18.12} {:>10.2e}",
            via.initial(),
            direct.initial(),
            (via.initial() - direct.initial()).abs()
        );
    }
    Ok(())
}
