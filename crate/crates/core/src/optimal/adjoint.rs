use crate::bsde::{mean_sensitivity, BsdeSolution};
use crate::error::{invalid, Result};
use crate::lattice::{AdaptedProcess, LatticeModel};
use crate::qcalc::QParams;
use crate::utility::UtilitySpec;

/// Adjoint `Gamma` of the value derivative and adjoint `H` of the wealth
/// derivative, both node processes on steps `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointPair {
    pub gamma: AdaptedProcess,
    pub h: AdaptedProcess,
}

/// `Gamma_{k+1} = Gamma_k * dYbar_k/dm_k`, the exact discrete adjoint of the
/// step that produced `ybar`; `H` is the adjoint density of the model.
///
/// For the certainty-equivalent step the factor is `(Ybar_k / E[Ybar_{k+1}])^q
/// = (1 - (q-1) gamma Ybar_k^(q-1) u(c_k) dt)^(q/(q-1))`, which tends to
/// `exp(-gamma q Ybar^(q-1) u(c) dt)` as `dt -> 0`.
pub fn adjoints(
    m: &LatticeModel,
    p: &QParams,
    utility: &UtilitySpec,
    consumption: &AdaptedProcess,
    ybar: &BsdeSolution,
) -> Result<AdjointPair> {
    if !ybar.transformed {
        return Err(invalid("ybar", "expected the transformed solution"));
    }
    consumption.expect_levels(m.steps())?;
    let value = &ybar.value;
    let mut levels = vec![vec![1.0]];
    for k in 0..m.steps() {
        let prev = &levels[k];
        let mut next = Vec::with_capacity(prev.len() * 2);
        for (i, &g) in prev.iter().enumerate() {
            let node = crate::lattice::NodeId::new(k, i);
            let rho = mean_sensitivity(
                ybar.scheme,
                value.at(node),
                value.conditional_mean(node),
                utility.u(consumption.at(node)),
                m.dt(),
                p,
            );
            next.push(g * rho);
            next.push(g * rho);
        }
        levels.push(next);
    }
    Ok(AdjointPair {
        gamma: AdaptedProcess::from_levels(levels)?,
        h: m.adjoint_density_process()?,
    })
}

/// Pathwise `Gamma_k = prod_{j<k} exp(-gamma q Ybar_j^(q-1) u(c_j) dt)`, the
/// continuous-time closed form evaluated on the lattice.
pub fn exponential_gamma(
    m: &LatticeModel,
    p: &QParams,
    utility: &UtilitySpec,
    consumption: &AdaptedProcess,
    ybar: &AdaptedProcess,
) -> Result<AdaptedProcess> {
    consumption.expect_levels(m.steps())?;
    let mut levels = vec![vec![1.0]];
    for k in 0..m.steps() {
        let prev = &levels[k];
        let mut next = Vec::with_capacity(prev.len() * 2);
        for (i, &g) in prev.iter().enumerate() {
            let node = crate::lattice::NodeId::new(k, i);
            let rate = p.gamma()
                * p.q()
                * ybar.at(node).powf(p.q() - 1.0)
                * utility.u(consumption.at(node));
            let factor = (-rate * m.dt()).exp();
            next.push(g * factor);
            next.push(g * factor);
        }
        levels.push(next);
    }
    AdaptedProcess::from_levels(levels)
}
