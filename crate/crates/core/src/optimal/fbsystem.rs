use crate::bsde::{solve_strategy, BsdeSolution};
use crate::error::{invalid, Error, Result};
use crate::lattice::{AdaptedProcess, LatticeModel, NodeId, Strategy};
use crate::optimal::{adjoints, worst_case_density, AdjointPair, OUTER_SCHEME};
use crate::qcalc::QParams;
use crate::utility::UtilitySpec;

/// Controls for the Picard iteration on the forward-backward system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbOptions {
    /// Stop once successive iterates of `Ybar_0`, and of `Ybar` and `Gamma`
    /// at every node, move by at most this much.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Iteration after which the update is relaxed by `damping`.
    pub damping_start: usize,
    pub damping: f64,
    /// With `false` consumption is pinned at zero and only `xi` is optimized.
    pub consumption: bool,
}

impl Default for FbOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 200,
            damping_start: 50,
            damping: 0.5,
            consumption: true,
        }
    }
}

/// Fixed point of the forward-backward system for a given multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct FbSolution {
    pub v: f64,
    pub strategy: Strategy,
    pub solution: BsdeSolution,
    pub adjoints: AdjointPair,
    pub iterations: usize,
    /// `|Ybar_0^(j) - Ybar_0^(j-1)|` for every iteration.
    pub trace: Vec<f64>,
    /// Largest relative difference between `c*` written with `(D*, Dt)` and
    /// with `(H, Ybar, Gamma)`.
    pub consumption_form_gap: f64,
}

fn controls(
    m: &LatticeModel,
    p: &QParams,
    utility: &UtilitySpec,
    v: f64,
    ybar: &AdaptedProcess,
    adj: &AdjointPair,
    with_consumption: bool,
) -> Result<Strategy> {
    let q = p.q();
    let gamma = p.gamma();
    let consumption = if with_consumption {
        let mut err = None;
        let c = AdaptedProcess::integrand_from_fn(m, |node| {
            let target = -v * adj.h.at(node) / (gamma * ybar.at(node).powf(q) * adj.gamma.at(node));
            utility.inv_u_prime(target).unwrap_or_else(|e| {
                err.get_or_insert(e);
                f64::NAN
            })
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        c
    } else {
        AdaptedProcess::constant_integrand(m, 0.0)?
    };
    let n = m.steps();
    let terminal = (0..m.leaf_count())
        .map(|i| {
            let node = NodeId::new(n, i);
            utility.inv_g_prime(v * adj.h.at(node) / adj.gamma.at(node), p)
        })
        .collect::<Result<Vec<_>>>()?;
    Strategy::new(m, consumption, terminal)
}

fn max_relative_change(a: &AdaptedProcess, b: &AdaptedProcess) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|((_, x), (_, y))| (x - y).abs() / y.abs().max(1e-300))
        .fold(0.0, f64::max)
}

/// Solves the coupled system
/// `c_k = (u')^{-1}(-v H_k / (gamma Ybar_k^q Gamma_k))`,
/// `xi = (g')^{-1}(v H_N / Gamma_N)`,
/// `Ybar` backward from `(c, xi)`, `Gamma` forward from `Ybar`,
/// by Picard iteration started at `Ybar = Gamma = 1`.
pub fn solve_fb_system(
    m: &LatticeModel,
    p: &QParams,
    utility: &UtilitySpec,
    v: f64,
    opts: &FbOptions,
) -> Result<FbSolution> {
    if !(v < 0.0) || !v.is_finite() {
        return Err(invalid(
            "v",
            format!("must be negative and finite, got {v}"),
        ));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(invalid("damping", "must lie in (0, 1]"));
    }
    m.check_path_storage()?;
    let mut ybar = AdaptedProcess::constant_nodes(m, 1.0)?;
    let mut adj = AdjointPair {
        gamma: AdaptedProcess::constant_nodes(m, 1.0)?,
        h: m.adjoint_density_process()?,
    };
    let mut previous: Option<Strategy> = None;
    let mut last_root = f64::NAN;
    let mut trace = Vec::new();
    for iteration in 1..=opts.max_iterations {
        let mut strategy = controls(m, p, utility, v, &ybar, &adj, opts.consumption)?;
        if iteration > opts.damping_start {
            if let Some(prev) = &previous {
                strategy = prev.combine(&strategy, opts.damping);
            }
        }
        let solution = solve_strategy(m, p, utility, &strategy, OUTER_SCHEME)?;
        let next_adj = adjoints(m, p, utility, &strategy.consumption, &solution)?;
        let root_change = (solution.initial() - last_root).abs();
        let node_change = max_relative_change(&solution.value, &ybar)
            .max(max_relative_change(&next_adj.gamma, &adj.gamma));
        trace.push(if root_change.is_nan() {
            f64::INFINITY
        } else {
            root_change
        });
        last_root = solution.initial();
        ybar = solution.value.clone();
        adj = next_adj;
        if root_change <= opts.tolerance && node_change <= opts.tolerance {
            let consumption_form_gap = if opts.consumption {
                consumption_gap(m, p, utility, v, &solution, &adj, &strategy)?
            } else {
                0.0
            };
            return Ok(FbSolution {
                v,
                strategy,
                solution,
                adjoints: adj,
                iterations: iteration,
                trace,
                consumption_form_gap,
            });
        }
        previous = Some(strategy);
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        last_change: trace.last().copied().unwrap_or(f64::NAN),
        trace,
    })
}

/// Compares `(u')^{-1}(-(v/gamma) (Ybar_0 D*_k)^(-q) Dt_k)` with the
/// adjoint-form consumption computed from the same solution.
fn consumption_gap(
    m: &LatticeModel,
    p: &QParams,
    utility: &UtilitySpec,
    v: f64,
    solution: &BsdeSolution,
    adj: &AdjointPair,
    strategy: &Strategy,
) -> Result<f64> {
    let q = p.q();
    let d_star = worst_case_density(m, solution)?.density;
    let y0 = solution.initial();
    let mut gap: f64 = 0.0;
    for (node, _) in strategy.consumption.iter() {
        let density_form = utility
            .inv_u_prime(-(v / p.gamma()) * (y0 * d_star.at(node)).powf(-q) * adj.h.at(node))?;
        let adjoint_form = utility.inv_u_prime(
            -v * adj.h.at(node)
                / (p.gamma() * solution.value.at(node).powf(q) * adj.gamma.at(node)),
        )?;
        gap = gap.max((density_form - adjoint_form).abs() / adjoint_form);
    }
    Ok(gap)
}
