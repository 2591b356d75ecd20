use crate::bsde::solve_strategy;
use crate::error::{invalid, Result};
use crate::lattice::{replicate, LatticeModel, Strategy};
use crate::optimal::{solve_fb_system, FbOptions, OUTER_SCHEME};
use crate::qcalc::QParams;
use crate::utility::UtilitySpec;

/// `Jbar(c, xi; v) = Ybar_0(c, xi) + v (x - X_0(c, xi))` for `v < 0`.
/// Minimizing over `(c, xi)` and maximizing over `v` recovers the
/// constrained optimum.
pub fn auxiliary_value(
    m: &LatticeModel,
    p: &QParams,
    utility: &UtilitySpec,
    candidate: &Strategy,
    x: f64,
    v: f64,
) -> Result<f64> {
    if !(v < 0.0) || !v.is_finite() {
        return Err(invalid(
            "v",
            format!("must be negative and finite, got {v}"),
        ));
    }
    let sol = solve_strategy(m, p, utility, candidate, OUTER_SCHEME)?;
    let cost = replicate(m, candidate)?.x0;
    Ok(sol.initial() + v * (x - cost))
}

/// `Vt(v) = min over (c, xi) of Ybar_0 - v X_0`, evaluated at the
/// forward-backward fixed point. The transformed primal value satisfies
/// `Ybar*(x) = max_v (Vt(v) + v x)`.
pub fn dual_function(
    m: &LatticeModel,
    p: &QParams,
    utility: &UtilitySpec,
    v: f64,
    opts: &FbOptions,
) -> Result<f64> {
    let fb = solve_fb_system(m, p, utility, v, opts)?;
    let cost = replicate(m, &fb.strategy)?.x0;
    Ok(fb.solution.initial() - v * cost)
}
