//! The inner worst-case problem
//!
//! ```text
//! inf_Q  E[(D_{t,T})^q zeta + sum (D_{t,s})^q U_s dt | F_t] + (1/gamma) H_{q,t}(Q|P)
//! ```
//!
//! on the lattice. Because `D^q` factors across steps, the infimum over
//! path measures is solved node by node: each node picks a two-state
//! density `d` with `E[d] = 1`. Stationarity of the one-step Lagrangian
//! gives `d* = e / E[e]` with `e = exp_q(-gamma V_next)`, and the node value
//! `U dt - (1/gamma) ln_q E[e]`. [`inner_dp_grid`] checks this by brute
//! force over a grid of drifts.

use crate::bsde::{invert_transform, solve_transformed_with, BsdeSolution, StepScheme};
use crate::error::{invalid, Result};
use crate::lattice::{mean, AdaptedProcess, LatticeModel, NodeId};
use crate::measures::{density_from_eta, tsallis_entropy, MeasureChange};
use crate::qcalc::{exp_q, ln_q, QParams};

/// Default number of grid points for [`EtaGrid::default_for`].
pub const DEFAULT_GRID_POINTS: usize = 2001;

/// Fraction of the equivalence interval `(-1/sqrt(dt), 1/sqrt(dt))` spanned
/// by the default grid.
pub const DEFAULT_GRID_SPAN: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct InnerValue {
    pub y0: f64,
    pub value: AdaptedProcess,
    pub optimal_eta: AdaptedProcess,
}

/// Sorted candidate drifts for the grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaGrid {
    points: Vec<f64>,
}

impl EtaGrid {
    pub fn new(m: &LatticeModel, points: Vec<f64>) -> Result<Self> {
        let bound = 1.0 / m.sqrt_dt();
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("eta_grid", "points must be strictly increasing"));
        }
        if !points.contains(&0.0) {
            return Err(invalid("eta_grid", "grid must contain 0"));
        }
        if points.iter().any(|e| e.abs() >= bound) {
            return Err(invalid(
                "eta_grid",
                format!("points must lie in (-{bound}, {bound})"),
            ));
        }
        Ok(Self { points })
    }

    /// `count` equally spaced points on `span * (-1/sqrt(dt), 1/sqrt(dt))`.
    /// `count` must be odd so that 0 is a grid point.
    pub fn uniform(m: &LatticeModel, count: usize, span: f64) -> Result<Self> {
        if count < 3 || count.is_multiple_of(2) {
            return Err(invalid(
                "grid_size",
                format!("{count} must be odd and >= 3"),
            ));
        }
        if !(span > 0.0 && span < 1.0) {
            return Err(invalid("grid_span", format!("{span} must lie in (0, 1)")));
        }
        let half = (count / 2) as i64;
        let step = span / (m.sqrt_dt() * half as f64);
        let points = (-half..=half).map(|j| j as f64 * step).collect();
        Self::new(m, points)
    }

    pub fn default_for(m: &LatticeModel) -> Result<Self> {
        Self::uniform(m, DEFAULT_GRID_POINTS, DEFAULT_GRID_SPAN)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

fn check(m: &LatticeModel, zeta: &[f64], source: &AdaptedProcess) -> Result<()> {
    m.check_path_storage()?;
    if zeta.len() != m.leaf_count() {
        return Err(crate::error::Error::Shape {
            expected: m.leaf_count(),
            found: zeta.len(),
        });
    }
    source.expect_levels(m.steps())
}

/// Backward induction where every node minimizes the one-step functional
/// `E[d^q V_next] + U dt + (1/gamma) E[d^q ln_q d]`, `d = 1 + eta dB`, over
/// the grid.
pub fn inner_dp_grid(
    m: &LatticeModel,
    zeta: &[f64],
    source: &AdaptedProcess,
    p: &QParams,
    grid: &EtaGrid,
) -> Result<InnerValue> {
    check(m, zeta, source)?;
    let (q, s) = (p.q(), m.sqrt_dt());
    let penalty = 1.0 / p.gamma();
    // per grid point: (d_up^q, d_down^q, one-step entropy)
    let table = grid
        .points
        .iter()
        .map(|&e| {
            let (du, dd) = (1.0 + e * s, 1.0 - e * s);
            let (pu, pd) = (du.powf(q), dd.powf(q));
            let entropy = 0.5 * (pu * ln_q(du, p)? + pd * ln_q(dd, p)?);
            Ok((pu, pd, entropy))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = m.steps();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    let mut etas: Vec<Vec<f64>> = vec![Vec::new(); n];
    values[n] = zeta.to_vec();
    for k in (0..n).rev() {
        let next = &values[k + 1];
        let mut level = Vec::with_capacity(1 << k);
        let mut arg = Vec::with_capacity(1 << k);
        for i in 0..1usize << k {
            let (vu, vd) = (next[2 * i], next[2 * i + 1]);
            let running = source.at(NodeId::new(k, i)) * m.dt();
            let (mut best, mut best_eta) = (f64::INFINITY, 0.0);
            for (&(pu, pd, entropy), &e) in table.iter().zip(&grid.points) {
                let value = 0.5 * (pu * vu + pd * vd) + running + penalty * entropy;
                if value < best {
                    best = value;
                    best_eta = e;
                }
            }
            level.push(best);
            arg.push(best_eta);
        }
        values[k] = level;
        etas[k] = arg;
    }
    let value = AdaptedProcess::from_levels(values)?;
    Ok(InnerValue {
        y0: value.root(),
        value,
        optimal_eta: AdaptedProcess::from_levels(etas)?,
    })
}

/// Exact nested recursion `V_k = U_k dt - (1/gamma) ln_q E[exp_q(-gamma V_{k+1})]`
/// with minimizing drift recovered from `d*_up = 1 + eta* sqrt(dt)`.
pub fn inner_closed_form(
    m: &LatticeModel,
    zeta: &[f64],
    source: &AdaptedProcess,
    p: &QParams,
) -> Result<InnerValue> {
    check(m, zeta, source)?;
    let gamma = p.gamma();
    let n = m.steps();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    let mut etas: Vec<Vec<f64>> = vec![Vec::new(); n];
    values[n] = zeta.to_vec();
    for k in (0..n).rev() {
        let next = &values[k + 1];
        let mut level = Vec::with_capacity(1 << k);
        let mut arg = Vec::with_capacity(1 << k);
        for i in 0..1usize << k {
            let node = NodeId::new(k, i);
            let eu = exp_q(-gamma * next[2 * i], p)?;
            let ed = exp_q(-gamma * next[2 * i + 1], p)?;
            let avg = 0.5 * (eu + ed);
            level.push(source.at(node) * m.dt() - ln_q(avg, p)? / gamma);
            arg.push((eu / avg - 1.0) / m.sqrt_dt());
        }
        values[k] = level;
        etas[k] = arg;
    }
    let value = AdaptedProcess::from_levels(values)?;
    Ok(InnerValue {
        y0: value.root(),
        value,
        optimal_eta: AdaptedProcess::from_levels(etas)?,
    })
}

/// Worst-case measure `Q*` of the inner problem.
pub fn optimal_measure(
    m: &LatticeModel,
    zeta: &[f64],
    source: &AdaptedProcess,
    p: &QParams,
) -> Result<MeasureChange> {
    let inner = inner_closed_form(m, zeta, source, p)?;
    density_from_eta(m, &inner.optimal_eta)
}

/// Inner objective at a fixed measure, by direct summation over leaves
/// and nodes (no recursion).
pub fn evaluate_objective(
    m: &LatticeModel,
    zeta: &[f64],
    source: &AdaptedProcess,
    p: &QParams,
    mc: &MeasureChange,
) -> Result<f64> {
    check(m, zeta, source)?;
    let q = p.q();
    let terminal: Vec<f64> = mc
        .density
        .last_level()
        .iter()
        .zip(zeta)
        .map(|(d, z)| d.powf(q) * z)
        .collect();
    let mut running = 0.0;
    for k in 0..m.steps() {
        let level: Vec<f64> = mc
            .density
            .level(k)
            .iter()
            .zip(source.level(k))
            .map(|(d, u)| d.powf(q) * u)
            .collect();
        running += mean(&level) * m.dt();
    }
    Ok(mean(&terminal) + running + tsallis_entropy(m, mc, p)? / p.gamma())
}

/// The inner value through the transformed BSDE: terminal `exp_q(-gamma zeta)`,
/// source `U`, stepped by `scheme`, then mapped back to `(Y, Z)`.
pub fn inner_via_bsde(
    m: &LatticeModel,
    zeta: &[f64],
    source: &AdaptedProcess,
    p: &QParams,
    scheme: StepScheme,
) -> Result<BsdeSolution> {
    check(m, zeta, source)?;
    let terminal = zeta
        .iter()
        .map(|&z| exp_q(-p.gamma() * z, p))
        .collect::<Result<Vec<_>>>()?;
    let sol = solve_transformed_with(m, &terminal, source, p, scheme)?;
    invert_transform(&sol, p)
}

/// `exp_q(-gamma V)` applied node-wise: the transformed value of the inner
/// recursion.
pub fn transformed_value(inner: &InnerValue, p: &QParams) -> Result<AdaptedProcess> {
    let mut err = None;
    let out = inner.value.map(|_, v| match exp_q(-p.gamma() * v, p) {
        Ok(y) => y,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_terminal_has_no_ambiguity() {
        let m = build_lattice(1.0, 3, 0.2, 0.1).unwrap();
        let p = QParams::new(2.0, 1.0).unwrap();
        let zero = AdaptedProcess::constant_integrand(&m, 0.0).unwrap();
        let zeta = vec![1.3; 8];
        let grid = EtaGrid::default_for(&m).unwrap();
        for inner in [
            inner_dp_grid(&m, &zeta, &zero, &p, &grid).unwrap(),
            inner_closed_form(&m, &zeta, &zero, &p).unwrap(),
        ] {
            assert!((inner.y0 - 1.3).abs() < 1e-14);
            assert!(inner.optimal_eta.iter().all(|(_, e)| e.abs() < 1e-14));
        }
    }

    #[test]
    fn one_step_example() {
        let m = build_lattice(1.0, 1, 0.2, 0.1).unwrap();
        let p = QParams::new(2.0, 1.0).unwrap();
        let zero = AdaptedProcess::constant_integrand(&m, 0.0).unwrap();
        let zeta = [2.0, 0.0];
        // exp_2(-2) = 1/3, exp_2(0) = 1, E = 2/3, -ln_2(2/3) = 1/2
        let oracle = 0.5;
        let closed = inner_closed_form(&m, &zeta, &zero, &p).unwrap();
        assert!((closed.y0 - oracle).abs() < 1e-14);
        let grid = inner_dp_grid(&m, &zeta, &zero, &p, &EtaGrid::default_for(&m).unwrap()).unwrap();
        assert!((grid.y0 - oracle).abs() < 1e-4);
        assert!(grid.y0 >= closed.y0 - 1e-15);
        // adverse measure overweights the low-utility (down) state
        assert!(closed.optimal_eta.root() < 0.0);
        assert!((closed.optimal_eta.root() + 0.5).abs() < 1e-14);
    }

    #[test]
    fn grid_refinement_closes_gap() {
        let m = build_lattice(1.0, 3, 0.2, 0.1).unwrap();
        let p = QParams::new(1.5, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let zeta: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..2.0)).collect();
        let source = AdaptedProcess::integrand_from_fn(&m, |_| rng.gen_range(0.0..0.5)).unwrap();
        let exact = inner_closed_form(&m, &zeta, &source, &p).unwrap().y0;
        let mut gaps = Vec::new();
        for count in [101, 201, 401, 801, 1601] {
            let grid = EtaGrid::uniform(&m, count, 0.9).unwrap();
            let g = inner_dp_grid(&m, &zeta, &source, &p, &grid).unwrap().y0 - exact;
            assert!(g >= -1e-14);
            gaps.push(g);
        }
        for w in gaps.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        assert!(gaps[4] <= 0.5 * gaps[0]);
    }

    #[test]
    fn grid_validation() {
        let m = build_lattice(1.0, 4, 0.2, 0.1).unwrap();
        assert!(EtaGrid::uniform(&m, 2000, 0.9).is_err());
        assert!(EtaGrid::new(&m, vec![-1.0, 1.0]).is_err());
        assert!(EtaGrid::new(&m, vec![-1.0, 0.0, 2.5]).is_err());
        assert!(EtaGrid::new(&m, vec![0.0, -1.0]).is_err());
    }

    #[test]
    fn objective_without_drift() {
        let m = build_lattice(1.0, 3, 0.2, 0.1).unwrap();
        let p = QParams::new(2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let zeta: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..2.0)).collect();
        let source = AdaptedProcess::integrand_from_fn(&m, |_| rng.gen_range(0.0..1.0)).unwrap();
        let mc =
            density_from_eta(&m, &AdaptedProcess::constant_integrand(&m, 0.0).unwrap()).unwrap();
        let obj = evaluate_objective(&m, &zeta, &source, &p, &mc).unwrap();
        let mut expected = mean(&zeta);
        for k in 0..3 {
            expected += mean(source.level(k)) * m.dt();
        }
        assert!((obj - expected).abs() < 1e-14);
    }
}
