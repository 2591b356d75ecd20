//! Robust value V(x) across initial wealth, found by shooting on the
//! budget multiplier.

use tsallis_robust::optimal::shoot_for_budget;
use tsallis_robust::{build_lattice, QParams, UtilitySpec};

fn main() -> tsallis_robust::Result<()> {
    let m = build_lattice(1.0, 6, 0.2, 0.1)?;
    let p = QParams::new(2.0, 1.0)?;
    let util = UtilitySpec::power(0.5)?;
    println!(
        "{:>5} {:>14} {:>14} {:>14} {:>6}",
        "x", "v*", "Ybar0", "V(x)", "iters"
    );
    for x in [0.5, 1.0, 2.0, 4.0, 8.0] {
        let r = shoot_for_budget(&m, &p, &util, x)?;
        println!(
            "{x:>5} {:>14.8} {:>14.10} {:>14.10} {:>6}",
            r.v_star, r.ybar0, r.y0, r.fb_iterations
        );
    }
    Ok(())
}
