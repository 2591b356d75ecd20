use crate::error::{invalid, Error, Result};
use crate::lattice::{replicate, LatticeModel, Strategy};
use crate::optimal::{
    max_principle_residuals, solve_fb_system, FbOptions, FbSolution, MaxPrincipleResiduals,
};
use crate::qcalc::{ln_q, QParams};
use crate::utility::UtilitySpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    /// Stop when `|X_0(v) - x| <= budget_tolerance * x`.
    pub budget_tolerance: f64,
    pub max_expansions: usize,
    pub max_bisections: usize,
    pub fb: FbOptions,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            budget_tolerance: 1e-10,
            max_expansions: 60,
            max_bisections: 200,
            fb: FbOptions::default(),
        }
    }
}

/// Result of matching the budget: the multiplier, the optimal strategy and
/// its values, and the residuals of the optimality conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationReport {
    pub v_star: f64,
    pub strategy: Strategy,
    /// Replication cost of `strategy`.
    pub x0: f64,
    /// Transformed value `Ybar_0`.
    pub ybar0: f64,
    /// Robust value `Y_0 = -(1/gamma) ln_q(Ybar_0)`.
    pub y0: f64,
    /// `None` when consumption is switched off.
    pub residuals: Option<MaxPrincipleResiduals>,
    /// Picard iterations at the final multiplier.
    pub fb_iterations: usize,
    pub bisections: usize,
    pub fb: FbSolution,
}

/// Cost of the fixed-point strategy for multiplier `v`.
pub fn budget_of(
    m: &LatticeModel,
    p: &QParams,
    utility: &UtilitySpec,
    v: f64,
    opts: &FbOptions,
) -> Result<(f64, FbSolution)> {
    let fb = solve_fb_system(m, p, utility, v, opts)?;
    Ok((replicate(m, &fb.strategy)?.x0, fb))
}

/// [`shoot_with`] under default options.
pub fn shoot_for_budget(
    m: &LatticeModel,
    p: &QParams,
    utility: &UtilitySpec,
    x: f64,
) -> Result<OptimizationReport> {
    shoot_with(m, p, utility, x, &ShootingOptions::default())
}

/// Finds `v* < 0` with `X_0(v*) = x`. The cost increases as `v` rises
/// towards zero, so the search brackets geometrically from `v = -1` and
/// then bisects in `ln(-v)`.
pub fn shoot_with(
    m: &LatticeModel,
    p: &QParams,
    utility: &UtilitySpec,
    x: f64,
    opts: &ShootingOptions,
) -> Result<OptimizationReport> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(invalid("x0", format!("budget must be positive, got {x}")));
    }
    let cost = |log_abs_v: f64| budget_of(m, p, utility, -log_abs_v.exp(), &opts.fb);
    let close = |c: f64| (c - x).abs() <= opts.budget_tolerance * x;

    let mut t = 0.0;
    let (c0, fb0) = cost(t)?;
    if close(c0) {
        return finish(m, p, utility, fb0, c0, 0, opts);
    }
    // t = ln|v|; cost decreases in t
    let (mut lo, mut hi);
    let mut expansions = 0;
    if c0 > x {
        lo = t;
        loop {
            t += 1.0;
            expansions += 1;
            if expansions > opts.max_expansions {
                return Err(Error::Bracket {
                    expansions,
                    target: x,
                });
            }
            let (c, fb) = cost(t)?;
            if close(c) {
                return finish(m, p, utility, fb, c, 0, opts);
            }
            if c < x {
                hi = t;
                break;
            }
            lo = t;
        }
    } else {
        hi = t;
        loop {
            t -= 1.0;
            expansions += 1;
            if expansions > opts.max_expansions {
                return Err(Error::Bracket {
                    expansions,
                    target: x,
                });
            }
            let (c, fb) = cost(t)?;
            if close(c) {
                return finish(m, p, utility, fb, c, 0, opts);
            }
            if c > x {
                lo = t;
                break;
            }
            hi = t;
        }
    }
    for bisection in 1..=opts.max_bisections {
        let mid = 0.5 * (lo + hi);
        let (c, fb) = cost(mid)?;
        if close(c) || hi - lo < 1e-15 {
            return finish(m, p, utility, fb, c, bisection, opts);
        }
        if c > x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_bisections,
        last_change: hi - lo,
        trace: vec![lo, hi],
    })
}

fn finish(
    m: &LatticeModel,
    p: &QParams,
    utility: &UtilitySpec,
    fb: FbSolution,
    x0: f64,
    bisections: usize,
    opts: &ShootingOptions,
) -> Result<OptimizationReport> {
    let residuals = if opts.fb.consumption {
        Some(max_principle_residuals(m, p, utility, &fb.strategy, fb.v)?)
    } else {
        None
    };
    let ybar0 = fb.solution.initial();
    Ok(OptimizationReport {
        v_star: fb.v,
        strategy: fb.strategy.clone(),
        x0,
        ybar0,
        y0: -ln_q(ybar0, p)? / p.gamma(),
        residuals,
        fb_iterations: fb.iterations,
        bisections,
        fb,
    })
}
