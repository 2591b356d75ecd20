//! Equivalent measure changes on the lattice and their Tsallis relative
//! entropy.

use crate::error::{Error, Result};
use crate::lattice::{mean, AdaptedProcess, LatticeModel, NodeId};
use crate::qcalc::{ln_q, QParams};

/// Girsanov drift `eta` (steps `0..N`) and the induced density (steps `0..=N`).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureChange {
    pub eta: AdaptedProcess,
    pub density: AdaptedProcess,
}

/// `D_{k+1} = D_k (1 + eta_k dB_{k+1})`, `D_0 = 1`.
pub fn density_from_eta(m: &LatticeModel, eta: &AdaptedProcess) -> Result<MeasureChange> {
    m.check_path_storage()?;
    eta.expect_levels(m.steps())?;
    let s = m.sqrt_dt();
    let mut levels = vec![vec![1.0]];
    for k in 0..m.steps() {
        let prev = &levels[k];
        let mut next = Vec::with_capacity(prev.len() * 2);
        for (i, &d) in prev.iter().enumerate() {
            let node = NodeId::new(k, i);
            let e = eta.at(node);
            for factor in [1.0 + e * s, 1.0 - e * s] {
                if factor <= 0.0 {
                    return Err(Error::NotEquivalent { node, factor });
                }
                next.push(d * factor);
            }
        }
        levels.push(next);
    }
    Ok(MeasureChange {
        eta: eta.clone(),
        density: AdaptedProcess::from_levels(levels)?,
    })
}

/// `E_P[D_N^q ln_q(D_N)]` by exhaustive summation over leaves.
pub fn tsallis_entropy(m: &LatticeModel, mc: &MeasureChange, p: &QParams) -> Result<f64> {
    mc.density.expect_levels(m.steps() + 1)?;
    let terms = mc
        .density
        .last_level()
        .iter()
        .map(|&d| Ok(d.powf(p.q()) * ln_q(d, p)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean(&terms))
}

/// Conditional entropy at `node`, summing `(D_N / D_k)^q ln_q(D_N / D_k)`
/// over the leaves below it.
pub fn conditional_tsallis_entropy(
    m: &LatticeModel,
    mc: &MeasureChange,
    p: &QParams,
    node: NodeId,
) -> Result<f64> {
    mc.density.expect_levels(m.steps() + 1)?;
    let depth = m.steps() - node.step;
    let width = 1usize << depth;
    let base = mc.density.at(node);
    let leaves = &mc.density.last_level()[node.index * width..(node.index + 1) * width];
    let mut total = 0.0;
    for &d in leaves {
        let ratio = d / base;
        total += ratio.powf(p.q()) * ln_q(ratio, p)?;
    }
    Ok(total / width as f64)
}

/// `H_q - (q/2) E[sum_k eta_k^2 D_k^q dt]`. Zero in continuous time; on the
/// lattice it is a discretization error.
pub fn entropy_quadratic_identity_gap(
    m: &LatticeModel,
    mc: &MeasureChange,
    p: &QParams,
) -> Result<f64> {
    let entropy = tsallis_entropy(m, mc, p)?;
    let mut quadratic = 0.0;
    for k in 0..m.steps() {
        let level: f64 = mc
            .density
            .level(k)
            .iter()
            .zip(mc.eta.level(k))
            .map(|(d, e)| e * e * d.powf(p.q()))
            .sum();
        quadratic += level / (1usize << k) as f64;
    }
    Ok(entropy - 0.5 * p.q() * quadratic * m.dt())
}

/// Entropy and quadratic functional of a deterministic drift profile
/// `eta_k`, one value per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileEntropy {
    pub entropy: f64,
    pub quadratic: f64,
}

impl ProfileEntropy {
    pub fn gap(&self) -> f64 {
        self.entropy - self.quadratic
    }
}

/// For a deterministic profile the one-step factors are independent, so
/// `E[D_k^q] = prod_{j<k} E[(1 + eta_j dB)^q]` and
/// `D^q ln_q D = (D^q - D) / (q - 1)` gives the entropy without
/// enumerating paths. Works for any step count.
pub fn profile_entropy(m: &LatticeModel, profile: &[f64], p: &QParams) -> Result<ProfileEntropy> {
    if profile.len() != m.steps() {
        return Err(Error::Shape {
            expected: m.steps(),
            found: profile.len(),
        });
    }
    let (q, s) = (p.q(), m.sqrt_dt());
    let mut moment = 1.0;
    let mut quadratic = 0.0;
    for (k, &e) in profile.iter().enumerate() {
        let (up, down) = (1.0 + e * s, 1.0 - e * s);
        if up <= 0.0 || down <= 0.0 {
            return Err(Error::NotEquivalent {
                node: NodeId::new(k, 0),
                factor: up.min(down),
            });
        }
        quadratic += e * e * moment;
        moment *= 0.5 * (up.powf(q) + down.powf(q));
    }
    Ok(ProfileEntropy {
        entropy: (moment - 1.0) / (q - 1.0),
        quadratic: 0.5 * q * quadratic * m.dt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_eta(m: &LatticeModel, rng: &mut ChaCha8Rng, bound: f64) -> AdaptedProcess {
        let lim = bound / m.sqrt_dt();
        AdaptedProcess::integrand_from_fn(m, |_| rng.gen_range(-lim..lim)).unwrap()
    }

    /// Independent brute force: rebuild every leaf density from its branch
    /// word and average over the subtree.
    fn brute_conditional(m: &LatticeModel, eta: &AdaptedProcess, p: &QParams, node: NodeId) -> f64 {
        let depth = m.steps() - node.step;
        let mut total = 0.0;
        for tail in 0..1usize << depth {
            let mut ratio = 1.0;
            let mut cur = node;
            for j in (0..depth).rev() {
                let down = (tail >> j) & 1 == 1;
                let e = eta.at(cur);
                ratio *= if down {
                    1.0 - e * m.sqrt_dt()
                } else {
                    1.0 + e * m.sqrt_dt()
                };
                cur = if down { cur.down() } else { cur.up() };
            }
            let q = p.q();
            total += ratio.powf(q) * (ratio.powf(1.0 - q) - 1.0) / (1.0 - q);
        }
        total / (1usize << depth) as f64
    }

    #[test]
    fn density_examples() {
        let m = build_lattice(1.0, 3, 0.2, 0.1).unwrap();
        let zero = AdaptedProcess::constant_integrand(&m, 0.0).unwrap();
        let mc = density_from_eta(&m, &zero).unwrap();
        assert!(mc.density.iter().all(|(_, d)| d == 1.0));

        let m1 = build_lattice(1.0, 1, 0.2, 0.1).unwrap();
        let eta = AdaptedProcess::constant_integrand(&m1, 0.4).unwrap();
        let mc = density_from_eta(&m1, &eta).unwrap();
        assert!((mc.density.level(1)[0] - 1.4).abs() < 1e-15);
        assert!((mc.density.level(1)[1] - 0.6).abs() < 1e-15);

        let bad = AdaptedProcess::constant_integrand(&m1, 1.0).unwrap();
        assert!(matches!(
            density_from_eta(&m1, &bad),
            Err(Error::NotEquivalent { .. })
        ));
    }

    #[test]
    fn two_state_entropy() {
        let m = build_lattice(1.0, 1, 0.2, 0.1).unwrap();
        let p = QParams::new(2.0, 1.0).unwrap();
        let eta = AdaptedProcess::constant_integrand(&m, 0.2).unwrap();
        let mc = density_from_eta(&m, &eta).unwrap();
        let h = tsallis_entropy(&m, &mc, &p).unwrap();
        let hand: f64 = 0.5 * 1.44 * (1.0 - 1.0 / 1.2) + 0.5 * 0.64 * (1.0 - 1.0 / 0.8);
        assert!((hand - 0.04).abs() < 1e-15);
        assert!((h - 0.04).abs() < 1e-12);
    }

    #[test]
    fn entropy_zero_iff_no_drift() {
        let m = build_lattice(1.0, 4, 0.2, 0.1).unwrap();
        let p = QParams::new(1.5, 1.0).unwrap();
        let zero = AdaptedProcess::constant_integrand(&m, 0.0).unwrap();
        let mc = density_from_eta(&m, &zero).unwrap();
        assert_eq!(tsallis_entropy(&m, &mc, &p).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut eta = random_eta(&m, &mut rng, 0.8);
            // force at least one node with |eta| >= 0.1
            eta.set(NodeId::new(2, 1), 0.1);
            let mc = density_from_eta(&m, &eta).unwrap();
            assert!(tsallis_entropy(&m, &mc, &p).unwrap() > 0.0);
        }
    }

    #[test]
    fn conditional_entropy() {
        let m = build_lattice(1.0, 3, 0.2, 0.1).unwrap();
        let p = QParams::new(2.5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eta = random_eta(&m, &mut rng, 0.9);
        let mc = density_from_eta(&m, &eta).unwrap();
        let root = conditional_tsallis_entropy(&m, &mc, &p, NodeId::ROOT).unwrap();
        assert!((root - tsallis_entropy(&m, &mc, &p).unwrap()).abs() < 1e-14);
        assert_eq!(
            conditional_tsallis_entropy(&m, &mc, &p, NodeId::new(3, 5)).unwrap(),
            0.0
        );
        for node in [NodeId::new(1, 0), NodeId::new(1, 1), NodeId::new(2, 2)] {
            let fast = conditional_tsallis_entropy(&m, &mc, &p, node).unwrap();
            let slow = brute_conditional(&m, &eta, &p, node);
            assert!((fast - slow).abs() < 1e-13, "{node}");
        }
    }

    #[test]
    fn density_martingale_and_power_submartingale() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = build_lattice(1.0, 6, 0.2, 0.1).unwrap();
        let p = QParams::new(1.7, 1.0).unwrap();
        for _ in 0..10 {
            let eta = random_eta(&m, &mut rng, 0.95);
            let mc = density_from_eta(&m, &eta).unwrap();
            assert!((mean(mc.density.last_level()) - 1.0).abs() < 1e-12);
            for k in 0..m.steps() {
                for i in 0..1 << k {
                    let node = NodeId::new(k, i);
                    let d = mc.density.at(node);
                    let up = mc.density.at(node.up()).powf(p.q());
                    let down = mc.density.at(node.down()).powf(p.q());
                    assert!(0.5 * (up + down) >= d.powf(p.q()) - 1e-14);
                }
            }
        }
    }

    #[test]
    fn tower_recursion() {
        // H(node) = E[d^q H(child)] + E[d^q ln_q d], recursively from leaves.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in 1..=4 {
            let m = build_lattice(1.0, n, 0.2, 0.1).unwrap();
            let p = QParams::new(2.2, 1.0).unwrap();
            let eta = random_eta(&m, &mut rng, 0.9);
            let mc = density_from_eta(&m, &eta).unwrap();
            let mut below = vec![0.0; 1 << n];
            for k in (0..n).rev() {
                let mut here = Vec::with_capacity(1 << k);
                for i in 0..1usize << k {
                    let e = eta.at(NodeId::new(k, i));
                    let du = 1.0 + e * m.sqrt_dt();
                    let dd = 1.0 - e * m.sqrt_dt();
                    let q = p.q();
                    let one_step = 0.5
                        * (du.powf(q) * ln_q(du, &p).unwrap() + dd.powf(q) * ln_q(dd, &p).unwrap());
                    here.push(
                        0.5 * (du.powf(q) * below[2 * i] + dd.powf(q) * below[2 * i + 1])
                            + one_step,
                    );
                }
                below = here;
            }
            let h = tsallis_entropy(&m, &mc, &p).unwrap();
            assert!((below[0] - h).abs() < 1e-13);
        }
    }

    #[test]
    fn profile_matches_paths() {
        let m = build_lattice(1.0, 6, 0.2, 0.1).unwrap();
        let p = QParams::new(1.5, 1.0).unwrap();
        let profile: Vec<f64> = (0..6).map(|k| 0.3 * (1.0 + (k as f64).sin())).collect();
        let eta = AdaptedProcess::integrand_from_fn(&m, |n| profile[n.step]).unwrap();
        let mc = density_from_eta(&m, &eta).unwrap();
        let paths = entropy_quadratic_identity_gap(&m, &mc, &p).unwrap();
        let fast = profile_entropy(&m, &profile, &p).unwrap();
        assert!((paths - fast.gap()).abs() < 1e-13);
        assert!((tsallis_entropy(&m, &mc, &p).unwrap() - fast.entropy).abs() < 1e-13);
    }

    #[test]
    fn gap_vanishes_without_drift() {
        let m = build_lattice(1.0, 4, 0.2, 0.1).unwrap();
        let p = QParams::new(1.5, 1.0).unwrap();
        let mc =
            density_from_eta(&m, &AdaptedProcess::constant_integrand(&m, 0.0).unwrap()).unwrap();
        assert_eq!(entropy_quadratic_identity_gap(&m, &mc, &p).unwrap(), 0.0);
    }

    #[test]
    fn gap_for_integer_orders_is_exact_zero() {
        // For q = 2 and q = 3 the one-step q-th moment is exactly
        // 1 + q(q-1)/2 eta^2 dt, so the discrete identity holds exactly.
        for q in [2.0, 3.0] {
            let p = QParams::new(q, 1.0).unwrap();
            let m = build_lattice(1.0, 16, 0.2, 0.1).unwrap();
            let g = profile_entropy(&m, &[0.3; 16], &p).unwrap().gap();
            assert!(g.abs() < 1e-14, "q={q} gap={g}");
        }
    }
}
