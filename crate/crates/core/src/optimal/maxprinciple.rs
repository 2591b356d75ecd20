use crate::bsde::{consumption_sensitivity, solve_strategy, BsdeSolution};
use crate::error::{invalid, Result};
use crate::lattice::{AdaptedProcess, LatticeModel, NodeId, Strategy};
use crate::measures::{density_from_eta, MeasureChange};
use crate::optimal::{adjoints, OUTER_SCHEME};
use crate::qcalc::QParams;
use crate::utility::UtilitySpec;

/// Largest and average relative residual over a set of nodes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualStats {
    pub max: f64,
    pub mean: f64,
}

impl ResidualStats {
    fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        Self {
            max: values.iter().cloned().fold(0.0, f64::max),
            mean: values.iter().sum::<f64>() / values.len() as f64,
        }
    }
}

/// Residuals of the first-order conditions of a candidate, in the
/// worst-case-density form and in the adjoint form, plus the disagreement
/// between the two forms.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPrincipleResiduals {
    /// `|-gamma Ybar_0^q (D0_N)^q h'(xi) - v Dt_N| / |v Dt_N|` over leaves.
    pub terminal: ResidualStats,
    /// `|-gamma Ybar_0^q (D0_k)^q u'(c_k) - v Dt_k| / |v Dt_k|` over nodes `k < N`.
    pub consumption: ResidualStats,
    /// `|Gamma_N g'(xi) - v H_N| / |v H_N|`.
    pub adjoint_terminal: ResidualStats,
    /// `|Gamma_k f_c(k) - v H_k| / |v H_k|`.
    pub adjoint_consumption: ResidualStats,
    /// Largest relative difference between the density-form and adjoint-form
    /// left-hand sides.
    pub form_gap: f64,
}

impl MaxPrincipleResiduals {
    pub fn worst(&self) -> f64 {
        [
            self.terminal.max,
            self.consumption.max,
            self.adjoint_terminal.max,
            self.adjoint_consumption.max,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Density of the worst-case measure read off the transformed solution:
/// `eta0_k = Zbar_k / E_k[Ybar_{k+1}]`, so that `D0` tilts each step by
/// `Ybar_{k+1} / E_k[Ybar_{k+1}]`.
pub fn worst_case_density(m: &LatticeModel, ybar: &BsdeSolution) -> Result<MeasureChange> {
    let eta = AdaptedProcess::integrand_from_fn(m, |node| {
        ybar.integrand.at(node) / ybar.value.conditional_mean(node)
    })?;
    density_from_eta(m, &eta)
}

fn relative(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / rhs.abs()
}

/// Evaluates both forms of the maximum principle for `candidate` with
/// multiplier `v < 0`.
pub fn max_principle_residuals(
    m: &LatticeModel,
    p: &QParams,
    utility: &UtilitySpec,
    candidate: &Strategy,
    v: f64,
) -> Result<MaxPrincipleResiduals> {
    if !(v < 0.0) || !v.is_finite() {
        return Err(invalid(
            "v",
            format!("must be negative and finite, got {v}"),
        ));
    }
    candidate.validate(m)?;
    if candidate.terminal.iter().any(|&x| x <= 0.0)
        || candidate.consumption.iter().any(|(_, c)| c <= 0.0)
    {
        return Err(invalid(
            "candidate",
            "first-order conditions need c > 0 and xi > 0",
        ));
    }
    let q = p.q();
    let gamma = p.gamma();
    let sol = solve_strategy(m, p, utility, candidate, OUTER_SCHEME)?;
    let scale = -gamma * sol.initial().powf(q);
    let d0 = worst_case_density(m, &sol)?.density;
    let adj = adjoints(m, p, utility, &candidate.consumption, &sol)?;
    let n = m.steps();

    let mut terminal = Vec::new();
    let mut adjoint_terminal = Vec::new();
    let mut form_gap: f64 = 0.0;
    for (i, &xi) in candidate.terminal.iter().enumerate() {
        let node = NodeId::new(n, i);
        let rhs = v * adj.h.at(node);
        let density_form = scale * d0.at(node).powf(q) * utility.h_prime(xi);
        let adjoint_form = adj.gamma.at(node) * utility.g_prime(xi, p)?;
        terminal.push(relative(density_form, rhs));
        adjoint_terminal.push(relative(adjoint_form, rhs));
        form_gap = form_gap.max(relative(density_form, adjoint_form));
    }
    let mut consumption = Vec::new();
    let mut adjoint_consumption = Vec::new();
    for (node, c) in candidate.consumption.iter() {
        let rhs = v * adj.h.at(node);
        let y = sol.value.at(node);
        let density_form = scale * d0.at(node).powf(q) * utility.u_prime(c);
        let fc = consumption_sensitivity(
            OUTER_SCHEME,
            y,
            sol.value.conditional_mean(node),
            c,
            utility,
            m.dt(),
            p,
        );
        let adjoint_form = adj.gamma.at(node) * fc;
        consumption.push(relative(density_form, rhs));
        adjoint_consumption.push(relative(adjoint_form, rhs));
        form_gap = form_gap.max(relative(density_form, adjoint_form));
    }
    Ok(MaxPrincipleResiduals {
        terminal: ResidualStats::from_values(&terminal),
        consumption: ResidualStats::from_values(&consumption),
        adjoint_terminal: ResidualStats::from_values(&adjoint_terminal),
        adjoint_consumption: ResidualStats::from_values(&adjoint_consumption),
        form_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::robust::optimal_measure;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_strategy(m: &LatticeModel, seed: u64) -> Strategy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = AdaptedProcess::integrand_from_fn(m, |_| rng.gen_range(0.2..2.0)).unwrap();
        let xi = (0..m.leaf_count())
            .map(|_| rng.gen_range(0.2..3.0))
            .collect();
        Strategy::new(m, c, xi).unwrap()
    }

    #[test]
    fn forms_agree_for_any_candidate() {
        // the identity Gamma_k Ybar_k^q = Ybar_0^q (D0_k)^q holds off the optimum too
        let m = build_lattice(1.0, 5, 0.25, 0.08).unwrap();
        let p = QParams::new(1.6, 0.9).unwrap();
        let util = UtilitySpec::power(0.5).unwrap();
        for seed in 0..5 {
            let s = random_strategy(&m, seed);
            let r = max_principle_residuals(&m, &p, &util, &s, -0.3).unwrap();
            assert!(r.form_gap < 1e-12, "gap {}", r.form_gap);
            assert!(r.worst() > 1e-3);
        }
    }

    #[test]
    fn worst_case_density_is_inner_minimizer() {
        // the certainty-equivalent step is the inner recursion itself, so D0
        // is the minimizing measure for zeta = h(xi), U = u(c)
        let m = build_lattice(1.0, 4, 0.2, 0.1).unwrap();
        let p = QParams::new(2.0, 1.0).unwrap();
        let util = UtilitySpec::power(0.5).unwrap();
        let s = random_strategy(&m, 9);
        let sol = solve_strategy(&m, &p, &util, &s, OUTER_SCHEME).unwrap();
        let d0 = worst_case_density(&m, &sol).unwrap();
        let zeta: Vec<f64> = s.terminal.iter().map(|&x| util.h(x)).collect();
        let source = s.consumption.map(|_, c| util.u(c));
        let star = optimal_measure(&m, &zeta, &source, &p).unwrap();
        assert!(d0.density.max_abs_diff(&star.density) < 1e-12);
        assert!(d0.density.min() > 0.0);
    }

    #[test]
    fn rejects_bad_multiplier_and_candidate() {
        let m = build_lattice(1.0, 2, 0.2, 0.1).unwrap();
        let p = QParams::new(2.0, 1.0).unwrap();
        let util = UtilitySpec::power(0.5).unwrap();
        let s = Strategy::constant(&m, 1.0, 1.0).unwrap();
        assert!(max_principle_residuals(&m, &p, &util, &s, 0.5).is_err());
        let z = Strategy::constant(&m, 0.0, 1.0).unwrap();
        assert!(max_principle_residuals(&m, &p, &util, &z, -0.5).is_err());
    }
}
