//! Backward solvers on the lattice for the quadratic BSDE with generator
//! `gamma/2 |Z|^2 / mu(Y) - U`, its transformed form
//! `Ybar = exp_q(-gamma Y)` with monotone generator `-gamma Ybar^q U`, and
//! the linear BSDE of directional derivatives.
//!
//! Integrands come from the exact two-branch martingale decomposition
//! `Z_k = (V_up - V_down) / (2 sqrt(dt))`.

use crate::error::{Error, Result};
use crate::lattice::{child_mean, AdaptedProcess, LatticeModel, NodeId, Strategy};
use crate::qcalc::{exp_q, ln_q, QParams};
use crate::utility::UtilitySpec;

/// One-step discretization of the transformed BSDE at a node with
/// conditional mean `m` of the next value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepScheme {
    /// Implicit Euler: `y + gamma y^q U dt = m`, solved by safeguarded Newton.
    #[default]
    ImplicitEuler,
    /// Exact one-step robust certainty equivalent:
    /// `y^(1-q) = m^(1-q) + (q-1) gamma U dt`. This is the value of the
    /// one-step entropy-penalized minimization, and it makes the lattice
    /// optimality conditions hold exactly.
    CertaintyEquivalent,
}

/// Value process and integrand. When `transformed` is set the pair holds
/// `(Ybar, Zbar)`, otherwise `(Y, Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BsdeSolution {
    pub value: AdaptedProcess,
    pub integrand: AdaptedProcess,
    pub transformed: bool,
    pub scheme: StepScheme,
}

impl BsdeSolution {
    pub fn initial(&self) -> f64 {
        self.value.root()
    }
}

const ROOT_TOL: f64 = 1e-12;

fn integrand_from_values(m: &LatticeModel, value: &AdaptedProcess) -> Result<AdaptedProcess> {
    let s = m.sqrt_dt();
    AdaptedProcess::integrand_from_fn(m, |node| {
        (value.at(node.up()) - value.at(node.down())) / (2.0 * s)
    })
}

/// Positive root of `y + a y^q = mean` with `a >= 0`.
fn implicit_root(mean: f64, a: f64, q: f64, node: NodeId) -> Result<f64> {
    if a == 0.0 {
        return Ok(mean);
    }
    let f = |y: f64| y + a * y.powf(q) - mean;
    let df = |y: f64| 1.0 + a * q * y.powf(q - 1.0);
    let (mut lo, mut hi) = (0.0, mean);
    // a few bisection steps to enter the Newton basin for strongly curved roots
    for _ in 0..4 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut y = hi;
    for _ in 0..200 {
        let v = f(y);
        if v > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let mut next = y - v / df(y);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 1e-3 * ROOT_TOL {
            return Ok(next);
        }
        y = next;
    }
    if hi - lo <= ROOT_TOL {
        return Ok(y);
    }
    Err(Error::RootFinding {
        node,
        reason: format!("bracket [{lo}, {hi}] did not shrink below {ROOT_TOL}"),
    })
}

fn step_transformed(
    scheme: StepScheme,
    mean: f64,
    source: f64,
    dt: f64,
    p: &QParams,
    node: NodeId,
) -> Result<f64> {
    if !(mean > 0.0) {
        return Err(Error::NonPositiveMean { node, mean });
    }
    let q = p.q();
    match scheme {
        StepScheme::ImplicitEuler => implicit_root(mean, p.gamma() * source * dt, q, node),
        StepScheme::CertaintyEquivalent if source == 0.0 => Ok(mean),
        StepScheme::CertaintyEquivalent => {
            let base = mean.powf(1.0 - q) + (q - 1.0) * p.gamma() * source * dt;
            if !(base > 0.0) {
                return Err(Error::Domain {
                    function: "certainty equivalent step",
                    argument: base,
                    q,
                });
            }
            Ok(base.powf(1.0 / (1.0 - q)))
        }
    }
}

fn check_inputs(m: &LatticeModel, terminal: &[f64], source: &AdaptedProcess) -> Result<()> {
    m.check_path_storage()?;
    if terminal.len() != m.leaf_count() {
        return Err(Error::Shape {
            expected: m.leaf_count(),
            found: terminal.len(),
        });
    }
    source.expect_levels(m.steps())
}

/// Transformed BSDE with terminal `terminal` in `(0, 1]` and source `U >= 0`,
/// stepped by implicit Euler.
pub fn solve_transformed(
    m: &LatticeModel,
    terminal: &[f64],
    source: &AdaptedProcess,
    p: &QParams,
) -> Result<BsdeSolution> {
    solve_transformed_with(m, terminal, source, p, StepScheme::ImplicitEuler)
}

pub fn solve_transformed_with(
    m: &LatticeModel,
    terminal: &[f64],
    source: &AdaptedProcess,
    p: &QParams,
    scheme: StepScheme,
) -> Result<BsdeSolution> {
    check_inputs(m, terminal, source)?;
    let n = m.steps();
    let mut levels: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    levels[n] = terminal.to_vec();
    for k in (0..n).rev() {
        let next = &levels[k + 1];
        let mut level = Vec::with_capacity(1 << k);
        for i in 0..1usize << k {
            let node = NodeId::new(k, i);
            let mean = child_mean(next, node);
            level.push(step_transformed(
                scheme,
                mean,
                source.at(node),
                m.dt(),
                p,
                node,
            )?);
        }
        levels[k] = level;
    }
    let value = AdaptedProcess::from_levels(levels)?;
    let integrand = integrand_from_values(m, &value)?;
    Ok(BsdeSolution {
        value,
        integrand,
        transformed: true,
        scheme,
    })
}

/// Implicit Euler on the quadratic equation itself:
/// `Y_k = E[Y_{k+1}] - (gamma/2 Z_k^2 / mu(Y_k) - U_k) dt`. Writing
/// `w = q mu(Y_k)` turns the step into a quadratic in `w`; a negative
/// discriminant means the step is too coarse for the local spread.
pub fn solve_untransformed(
    m: &LatticeModel,
    terminal: &[f64],
    source: &AdaptedProcess,
    p: &QParams,
) -> Result<BsdeSolution> {
    check_inputs(m, terminal, source)?;
    let (q, gamma) = (p.q(), p.gamma());
    let kappa = (q - 1.0) * gamma;
    let n = m.steps();
    let mut levels: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    levels[n] = terminal.to_vec();
    for k in (0..n).rev() {
        let next = &levels[k + 1];
        let mut level = Vec::with_capacity(1 << k);
        for i in 0..1usize << k {
            let node = NodeId::new(k, i);
            let z = (next[2 * i] - next[2 * i + 1]) / (2.0 * m.sqrt_dt());
            let a = child_mean(next, node) + source.at(node) * m.dt();
            let b = 0.5 * gamma * q * z * z * m.dt();
            let lin = 1.0 + kappa * a;
            let disc = lin * lin - 4.0 * kappa * b;
            let w = if disc >= 0.0 {
                0.5 * (lin + disc.sqrt())
            } else {
                f64::NAN
            };
            if !(w > 0.0) {
                return Err(Error::Domain {
                    function: "mu",
                    argument: a,
                    q,
                });
            }
            level.push((w - 1.0) / kappa);
        }
        levels[k] = level;
    }
    let value = AdaptedProcess::from_levels(levels)?;
    let integrand = integrand_from_values(m, &value)?;
    Ok(BsdeSolution {
        value,
        integrand,
        transformed: false,
        scheme: StepScheme::ImplicitEuler,
    })
}

/// `Y = -(1/gamma) ln_q(Ybar)` and `Z = -Zbar / (gamma Ybar^q)` node-wise.
pub fn invert_transform(sol: &BsdeSolution, p: &QParams) -> Result<BsdeSolution> {
    if !sol.transformed {
        return Err(crate::error::invalid(
            "transformed",
            "solution already holds (Y, Z)",
        ));
    }
    let gamma = p.gamma();
    let mut err = None;
    let value = sol.value.map(|_, y| match ln_q(y, p) {
        Ok(v) => -v / gamma,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let integrand = sol
        .integrand
        .map(|node, z| -z / (gamma * sol.value.at(node).powf(p.q())));
    Ok(BsdeSolution {
        value,
        integrand,
        transformed: false,
        scheme: sol.scheme,
    })
}

/// Inverse of [`invert_transform`]: `Ybar = exp_q(-gamma Y)`, `Zbar = -gamma Ybar^q Z`.
pub fn apply_transform(sol: &BsdeSolution, p: &QParams) -> Result<BsdeSolution> {
    if sol.transformed {
        return Err(crate::error::invalid(
            "transformed",
            "solution already holds (Ybar, Zbar)",
        ));
    }
    let gamma = p.gamma();
    let mut err = None;
    let value = sol.value.map(|_, y| match exp_q(-gamma * y, p) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let integrand = sol
        .integrand
        .map(|node, z| -gamma * value.at(node).powf(p.q()) * z);
    Ok(BsdeSolution {
        value,
        integrand,
        transformed: true,
        scheme: sol.scheme,
    })
}

/// Transformed BSDE for a consumption/terminal-wealth strategy: terminal
/// `g(xi)` and source `u(c)`.
pub fn solve_strategy(
    m: &LatticeModel,
    p: &QParams,
    utility: &UtilitySpec,
    strategy: &Strategy,
    scheme: StepScheme,
) -> Result<BsdeSolution> {
    strategy.check_shape(m)?;
    let terminal = strategy
        .terminal
        .iter()
        .map(|&x| utility.g(x, p))
        .collect::<Result<Vec<_>>>()?;
    let source = strategy.consumption.map(|_, c| utility.u(c));
    solve_transformed_with(m, &terminal, &source, p, scheme)
}

/// Derivative of `y_k` with respect to the conditional mean `m_k` of the
/// next value, for the scheme that produced `y_k`.
pub fn mean_sensitivity(
    scheme: StepScheme,
    y: f64,
    mean: f64,
    source: f64,
    dt: f64,
    p: &QParams,
) -> f64 {
    let q = p.q();
    match scheme {
        StepScheme::ImplicitEuler => 1.0 / (1.0 + p.gamma() * q * y.powf(q - 1.0) * source * dt),
        StepScheme::CertaintyEquivalent if source == 0.0 => 1.0,
        StepScheme::CertaintyEquivalent => (y / mean).powf(q),
    }
}

/// Derivative of `y_k` with respect to the consumption `c_k`, divided by `dt`.
pub fn consumption_sensitivity(
    scheme: StepScheme,
    y: f64,
    mean: f64,
    consumption: f64,
    utility: &UtilitySpec,
    dt: f64,
    p: &QParams,
) -> f64 {
    let direct = -p.gamma() * y.powf(p.q()) * utility.u_prime(consumption);
    match scheme {
        StepScheme::ImplicitEuler => {
            direct * mean_sensitivity(scheme, y, mean, utility.u(consumption), dt, p)
        }
        StepScheme::CertaintyEquivalent => direct,
    }
}

/// Directional derivative `(d/dalpha) (Ybar, Zbar)` at `alpha = 0` along
/// `base + alpha * direction`, obtained by differentiating the backward
/// step that produced `base_solution`. The step is affine in the unknown,
/// so each node is a single division, no root finding.
pub fn solve_derivative_bsde(
    m: &LatticeModel,
    p: &QParams,
    utility: &UtilitySpec,
    base: &Strategy,
    direction: &Strategy,
    base_solution: &BsdeSolution,
) -> Result<BsdeSolution> {
    base.check_shape(m)?;
    direction.check_shape(m)?;
    if !base_solution.transformed {
        return Err(crate::error::invalid(
            "base_solution",
            "expected the transformed solution",
        ));
    }
    let scheme = base_solution.scheme;
    let ybar = &base_solution.value;
    let n = m.steps();
    let mut levels: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    levels[n] = base
        .terminal
        .iter()
        .zip(&direction.terminal)
        .map(|(&x, &dx)| {
            Ok(if dx == 0.0 {
                0.0
            } else {
                utility.g_prime(x, p)? * dx
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for k in (0..n).rev() {
        let next = &levels[k + 1];
        let mut level = Vec::with_capacity(1 << k);
        for i in 0..1usize << k {
            let node = NodeId::new(k, i);
            let y = ybar.at(node);
            let mean = ybar.conditional_mean(node);
            let c = base.consumption.at(node);
            let dc = direction.consumption.at(node);
            let rho = mean_sensitivity(scheme, y, mean, utility.u(c), m.dt(), p);
            let source = if dc == 0.0 {
                0.0
            } else {
                consumption_sensitivity(scheme, y, mean, c, utility, m.dt(), p) * dc * m.dt()
            };
            level.push(rho * child_mean(next, node) + source);
        }
        levels[k] = level;
    }
    let value = AdaptedProcess::from_levels(levels)?;
    let integrand = integrand_from_values(m, &value)?;
    Ok(BsdeSolution {
        value,
        integrand,
        transformed: true,
        scheme,
    })
}
