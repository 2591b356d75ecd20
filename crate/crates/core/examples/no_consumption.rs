//! Terminal wealth only: forward-backward solution against the closed form
//! `xi* = I(y Dt_N)`.

use tsallis_robust::optimal::no_consumption_example;
use tsallis_robust::{build_lattice, QParams, UtilitySpec};

fn main() -> tsallis_robust::Result<()> {
    let m = build_lattice(1.0, 4, 0.2, 0.1)?;
    let p = QParams::new(2.0, 1.0)?;
    let util = UtilitySpec::power(0.5)?;
    let r = no_consumption_example(&m, &p, &util, 1.0)?;
    println!(
        "v* = {:.12}, closed-form y = {:.12}",
        r.report.v_star, r.y_closed
    );
    println!("max leaf gap {:.2e}", r.terminal_gap);
    println!("V(x) = {:.12} (formula {:.12})", r.value, r.value_formula);
    for (i, (a, b)) in r
        .report
        .strategy
        .terminal
        .iter()
        .zip(&r.closed_form_terminal)
        .enumerate()
    {
        println!("leaf {i:>2}: {a:.10} {b:.10}");
    }
    Ok(())
}
