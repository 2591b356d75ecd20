//! Forward-backward fixed point for a given multiplier and the residuals of
//! the first-order conditions, at the fixed point and after a perturbation.

use tsallis_robust::optimal::{max_principle_residuals, solve_fb_system, FbOptions};
use tsallis_robust::{build_lattice, QParams, UtilitySpec};

fn main() -> tsallis_robust::Result<()> {
    let m = build_lattice(1.0, 6, 0.2, 0.1)?;
    let p = QParams::new(2.0, 1.0)?;
    let util = UtilitySpec::power(0.5)?;
    let v = -0.2;

    let fb = solve_fb_system(&m, &p, &util, v, &FbOptions::default())?;
    println!("Picard iterations: {}", fb.iterations);
    println!(
        "last changes: {:?}",
        &fb.trace[fb.trace.len().saturating_sub(3)..]
    );

    let at = max_principle_residuals(&m, &p, &util, &fb.strategy, v)?;
    println!(
        "at fixed point: terminal {:.2e}, consumption {:.2e}, forms differ by {:.2e}",
        at.terminal.max, at.consumption.max, at.form_gap
    );

    let mut bumped = fb.strategy.clone();
    bumped.consumption = bumped.consumption.map(|_, c| 1.1 * c);
    let off = max_principle_residuals(&m, &p, &util, &bumped, v)?;
    println!(
        "consumption x1.1: consumption residual {:.2e}",
        off.consumption.max
    );
    Ok(())
}
