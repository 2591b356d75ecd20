use crate::error::{invalid, Error, Result};
use crate::lattice::{mean, pricing_density, LatticeModel};
use crate::optimal::{shoot_with, FbOptions, OptimizationReport, ShootingOptions};
use crate::qcalc::{ln_q, QParams};
use crate::utility::UtilitySpec;

/// Terminal-wealth-only problem solved twice: through the forward-backward
/// system with consumption pinned at zero, and in closed form
/// `xi* = I(y Dt_N)` where `I` inverts `-g'` and `y > 0` matches the budget.
#[derive(Debug, Clone, PartialEq)]
pub struct NoConsumptionReport {
    pub report: OptimizationReport,
    pub closed_form_terminal: Vec<f64>,
    /// Budget multiplier of the closed form; compare with `-v*`.
    pub y_closed: f64,
    /// `max |xi_fb - xi_closed|` over leaves.
    pub terminal_gap: f64,
    /// `Y_0` from the transformed value of the forward-backward solution.
    pub value: f64,
    /// `-(1/gamma) ln_q E[exp_q(-gamma h(xi*))]` at the forward-backward `xi*`.
    pub value_formula: f64,
    /// The same formula at the closed-form terminal wealth.
    pub value_closed: f64,
}

/// Bisection bracket search on a decreasing function of `t`, returning the
/// root to within `1e-14` in `t`.
fn decreasing_root(f: impl Fn(f64) -> f64, what: f64) -> Result<f64> {
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut expansions = 0;
    while f(lo) < 0.0 || f(hi) > 0.0 {
        if f(lo) < 0.0 {
            lo -= 2.0 * (hi - lo);
        }
        if f(hi) > 0.0 {
            hi += 2.0 * (hi - lo);
        }
        expansions += 1;
        if expansions > 60 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Bracket {
                expansions,
                target: what,
            });
        }
    }
    while hi - lo > 1e-14 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `I(z)`: the wealth where the marginal transformed utility `-g'` equals `z`.
fn inverse_marginal(utility: &UtilitySpec, p: &QParams, z: f64) -> Result<f64> {
    let goal = z.ln();
    let f = |t: f64| match utility.g_prime(t.exp(), p) {
        Ok(d) => (-d).ln() - goal,
        Err(_) => f64::NAN,
    };
    Ok(decreasing_root(f, z)?.exp())
}

fn robust_terminal_value(utility: &UtilitySpec, p: &QParams, xi: &[f64]) -> Result<f64> {
    let g = xi
        .iter()
        .map(|&x| utility.g(x, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(-ln_q(mean(&g), p)? / p.gamma())
}

pub fn no_consumption_example(
    m: &LatticeModel,
    p: &QParams,
    utility: &UtilitySpec,
    x: f64,
) -> Result<NoConsumptionReport> {
    if !(x > 0.0) {
        return Err(invalid("x0", format!("budget must be positive, got {x}")));
    }
    let opts = ShootingOptions {
        budget_tolerance: 1e-13,
        fb: FbOptions {
            consumption: false,
            ..FbOptions::default()
        },
        ..ShootingOptions::default()
    };
    let report = shoot_with(m, p, utility, x, &opts)?;

    let dt_n = pricing_density(m)?.last_level().to_vec();
    let terminal_for = |y: f64| -> Result<Vec<f64>> {
        dt_n.iter()
            .map(|&d| inverse_marginal(utility, p, y * d))
            .collect()
    };
    let excess = |t: f64| -> f64 {
        match terminal_for(t.exp()) {
            Ok(xi) => mean(&xi.iter().zip(&dt_n).map(|(a, b)| a * b).collect::<Vec<_>>()) - x,
            Err(_) => f64::NAN,
        }
    };
    let y_closed = decreasing_root(excess, x)?.exp();
    let closed_form_terminal = terminal_for(y_closed)?;
    let terminal_gap = report
        .strategy
        .terminal
        .iter()
        .zip(&closed_form_terminal)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(NoConsumptionReport {
        value: report.y0,
        value_formula: robust_terminal_value(utility, p, &report.strategy.terminal)?,
        value_closed: robust_terminal_value(utility, p, &closed_form_terminal)?,
        y_closed,
        terminal_gap,
        closed_form_terminal,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    #[test]
    fn agrees_with_closed_form() {
        let m = build_lattice(1.0, 6, 0.2, 0.1).unwrap();
        let p = QParams::new(2.0, 1.0).unwrap();
        let util = UtilitySpec::power(0.5).unwrap();
        let r = no_consumption_example(&m, &p, &util, 1.0).unwrap();
        assert!(r.terminal_gap < 1e-6, "{}", r.terminal_gap);
        assert!((r.value - r.value_formula).abs() < 1e-8);
        assert!((r.value - r.value_closed).abs() < 1e-8);
        assert!((r.y_closed + r.report.v_star).abs() < 1e-6 * r.y_closed);
    }

    #[test]
    fn no_drift_keeps_budget() {
        let m = build_lattice(1.0, 4, 0.2, 0.0).unwrap();
        let p = QParams::new(1.5, 1.0).unwrap();
        let util = UtilitySpec::power(0.5).unwrap();
        let r = no_consumption_example(&m, &p, &util, 2.0).unwrap();
        for &xi in &r.report.strategy.terminal {
            assert!((xi - 2.0).abs() < 1e-9);
        }
        for &xi in &r.closed_form_terminal {
            assert!((xi - 2.0).abs() < 1e-9);
        }
    }
}
