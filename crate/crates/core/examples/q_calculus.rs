//! q-logarithm / q-exponential and the Tsallis entropy of a drift profile.

use tsallis_robust::measures::{density_from_eta, profile_entropy, tsallis_entropy};
use tsallis_robust::qcalc::{exp_q, ln_q, mu};
use tsallis_robust::{build_lattice, AdaptedProcess, QParams};

fn main() -> tsallis_robust::Result<()> {
    let p = QParams::new(2.0, 1.0)?;
    for x in [0.1, 1.0, 7.3] {
        let l = ln_q(x, &p)?;
        println!("ln_q({x}) = {l:.6}   exp_q back = {:.15}", exp_q(l, &p)?);
    }
    println!("mu(1) = {}", mu(1.0, &p)?);

    let m = build_lattice(1.0, 8, 0.2, 0.1)?;
    let eta = AdaptedProcess::constant_integrand(&m, 0.3)?;
    let mc = density_from_eta(&m, &eta)?;
    println!(
        "H_q over 256 paths:      {:.12}",
        tsallis_entropy(&m, &mc, &p)?
    );
    println!(
        "H_q by product formula:  {:.12}",
        profile_entropy(&m, &[0.3; 8], &p)?.entropy
    );

    let p15 = QParams::new(1.5, 1.0)?;
    for n in [8, 16, 32] {
        let m = build_lattice(1.0, n, 0.2, 0.1)?;
        let e = profile_entropy(&m, &vec![0.3; n], &p15)?;
        println!(
            "N = {n:>2}: entropy {:.10}, gap to (q/2) E[sum eta^2 dt] {:.3e}",
            e.entropy,
            e.gap()
        );
    }
    Ok(())
}
