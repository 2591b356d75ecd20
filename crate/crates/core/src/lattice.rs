//! Binomial market lattice with path-indexed (non-recombining) storage.
//!
//! A node at step `k` is addressed by the branch word of its path: bit
//! `k - 1 - j` of `index` is the move taken at step `j` (0 = up, 1 = down).
//! The children of `(k, i)` are `(k + 1, 2i)` (up, `+sqrt(dt)`) and
//! `(k + 1, 2i + 1)` (down, `-sqrt(dt)`). Every branch has reference
//! probability 1/2.

use std::fmt;

use crate::error::{invalid, Error, Result};

/// Largest step count for which path-indexed processes are allocated.
pub const MAX_PATH_STEPS: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub step: usize,
    pub index: usize,
}

impl NodeId {
    pub const ROOT: NodeId = NodeId { step: 0, index: 0 };

    pub fn new(step: usize, index: usize) -> Self {
        Self { step, index }
    }

    pub fn up(self) -> NodeId {
        NodeId::new(self.step + 1, 2 * self.index)
    }

    pub fn down(self) -> NodeId {
        NodeId::new(self.step + 1, 2 * self.index + 1)
    }

    /// Branch word, first move first, as a string of `u`/`d`.
    pub fn branch_word(&self) -> String {
        (0..self.step)
            .map(|j| {
                if (self.index >> (self.step - 1 - j)) & 1 == 0 {
                    'u'
                } else {
                    'd'
                }
            })
            .collect()
    }

    /// Number of up moves on the path to this node.
    pub fn ups(&self) -> usize {
        self.step - self.index.count_ones() as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.step == 0 {
            write!(f, "node(step=0, root)")
        } else {
            write!(f, "node(step={}, branch={})", self.step, self.branch_word())
        }
    }
}

/// Which drift the adjoint density `H` uses: `-theta` (the pricing density,
/// default) or `-sigma * theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DensityConvention {
    #[default]
    Theta,
    SigmaTheta,
}

/// One risky asset, zero interest rate, symmetric `±sqrt(dt)` increments.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeModel {
    horizon: f64,
    steps: usize,
    dt: f64,
    sqrt_dt: f64,
    sigma: f64,
    drift: f64,
    theta: f64,
    adjoint_density: DensityConvention,
}

/// Builds a lattice for horizon `horizon`, `steps` periods, volatility
/// `sigma` and drift `drift`.
pub fn build_lattice(horizon: f64, steps: usize, sigma: f64, drift: f64) -> Result<LatticeModel> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid("T", format!("horizon {horizon} must be > 0")));
    }
    if steps == 0 {
        return Err(invalid("N", "step count must be >= 1"));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(invalid("sigma", format!("volatility {sigma} must be > 0")));
    }
    if !drift.is_finite() {
        return Err(invalid("b", "drift must be finite"));
    }
    let dt = horizon / steps as f64;
    Ok(LatticeModel {
        horizon,
        steps,
        dt,
        sqrt_dt: dt.sqrt(),
        sigma,
        drift,
        theta: drift / sigma,
        adjoint_density: DensityConvention::Theta,
    })
}

impl LatticeModel {
    pub fn with_adjoint_density(mut self, convention: DensityConvention) -> Self {
        self.adjoint_density = convention;
        self
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn sqrt_dt(&self) -> f64 {
        self.sqrt_dt
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn adjoint_density(&self) -> DensityConvention {
        self.adjoint_density
    }

    pub fn leaf_count(&self) -> usize {
        1 << self.steps
    }

    /// Brownian increment leading into `child`.
    pub fn increment_into(&self, child: NodeId) -> f64 {
        if child.index & 1 == 0 {
            self.sqrt_dt
        } else {
            -self.sqrt_dt
        }
    }

    /// Value of the discrete Brownian motion at `node`.
    pub fn brownian(&self, node: NodeId) -> f64 {
        let ups = node.ups() as f64;
        let downs = (node.step - node.ups()) as f64;
        (ups - downs) * self.sqrt_dt
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    /// Fails when path-indexed storage would exceed [`MAX_PATH_STEPS`].
    pub fn check_path_storage(&self) -> Result<()> {
        if self.steps > MAX_PATH_STEPS {
            return Err(Error::TooManySteps {
                steps: self.steps,
                cap: MAX_PATH_STEPS,
            });
        }
        Ok(())
    }

    /// Multiplicative density with one-step factor `1 + eta * dB` for a
    /// constant `eta`.
    pub fn constant_drift_density(&self, eta: f64) -> Result<AdaptedProcess> {
        if eta.abs() * self.sqrt_dt >= 1.0 {
            return Err(Error::StepSize {
                value: eta.abs() * self.sqrt_dt,
            });
        }
        self.check_path_storage()?;
        let mut levels = Vec::with_capacity(self.steps + 1);
        levels.push(vec![1.0]);
        for k in 0..self.steps {
            let prev: &Vec<f64> = &levels[k];
            let mut next = Vec::with_capacity(prev.len() * 2);
            for &d in prev {
                next.push(d * (1.0 + eta * self.sqrt_dt));
                next.push(d * (1.0 - eta * self.sqrt_dt));
            }
            levels.push(next);
        }
        Ok(AdaptedProcess { levels })
    }

    /// Adjoint density `H` under the configured convention.
    pub fn adjoint_density_process(&self) -> Result<AdaptedProcess> {
        match self.adjoint_density {
            DensityConvention::Theta => self.constant_drift_density(-self.theta),
            DensityConvention::SigmaTheta => self.constant_drift_density(-self.sigma * self.theta),
        }
    }
}

/// A real value per lattice node. Node processes cover steps `0..=N`,
/// integrand processes steps `0..N` (one value per node, multiplying the
/// next increment or the next `dt`).
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedProcess {
    levels: Vec<Vec<f64>>,
}

impl AdaptedProcess {
    fn with_levels(count: usize, f: impl FnMut(NodeId) -> f64) -> Self {
        let mut f = f;
        let levels = (0..count)
            .map(|k| (0..1usize << k).map(|i| f(NodeId::new(k, i))).collect())
            .collect();
        Self { levels }
    }

    /// Node process on steps `0..=N`.
    pub fn nodes_from_fn(m: &LatticeModel, f: impl FnMut(NodeId) -> f64) -> Result<Self> {
        m.check_path_storage()?;
        Ok(Self::with_levels(m.steps() + 1, f))
    }

    /// Integrand process on steps `0..N`.
    pub fn integrand_from_fn(m: &LatticeModel, f: impl FnMut(NodeId) -> f64) -> Result<Self> {
        m.check_path_storage()?;
        Ok(Self::with_levels(m.steps(), f))
    }

    pub fn constant_nodes(m: &LatticeModel, value: f64) -> Result<Self> {
        Self::nodes_from_fn(m, |_| value)
    }

    pub fn constant_integrand(m: &LatticeModel, value: f64) -> Result<Self> {
        Self::integrand_from_fn(m, |_| value)
    }

    /// Wraps raw levels; level `k` must hold `2^k` values.
    pub fn from_levels(levels: Vec<Vec<f64>>) -> Result<Self> {
        for (k, level) in levels.iter().enumerate() {
            if level.len() != 1 << k {
                return Err(invalid(
                    "levels",
                    format!(
                        "level {k} has {} values, expected {}",
                        level.len(),
                        1usize << k
                    ),
                ));
            }
        }
        Ok(Self { levels })
    }

    /// Number of stored levels (`N + 1` for node processes, `N` for integrands).
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, step: usize) -> &[f64] {
        &self.levels[step]
    }

    pub fn level_mut(&mut self, step: usize) -> &mut [f64] {
        &mut self.levels[step]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn at(&self, node: NodeId) -> f64 {
        self.levels[node.step][node.index]
    }

    pub fn set(&mut self, node: NodeId, value: f64) {
        self.levels[node.step][node.index] = value;
    }

    pub fn root(&self) -> f64 {
        self.levels[0][0]
    }

    /// The last stored level.
    pub fn last_level(&self) -> &[f64] {
        self.levels.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn map(&self, mut f: impl FnMut(NodeId, f64) -> f64) -> Self {
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(k, level)| {
                level
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| f(NodeId::new(k, i), v))
                    .collect()
            })
            .collect();
        Self { levels }
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.levels.iter().enumerate().flat_map(|(k, level)| {
            level
                .iter()
                .enumerate()
                .map(move |(i, &v)| (NodeId::new(k, i), v))
        })
    }

    pub fn min(&self) -> f64 {
        self.iter().map(|(_, v)| v).fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|((_, a), (_, b))| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn expect_levels(&self, expected: usize) -> Result<()> {
        if self.levels.len() != expected {
            return Err(Error::Shape {
                expected,
                found: self.levels.len(),
            });
        }
        Ok(())
    }

    /// One-step reference-measure conditional mean of level `step + 1`.
    pub fn conditional_mean(&self, node: NodeId) -> f64 {
        let next = &self.levels[node.step + 1];
        0.5 * (next[2 * node.index] + next[2 * node.index + 1])
    }
}

/// Reference-measure mean of a leaf-indexed vector.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// One-step conditional mean of `values` (a full level) below `node`.
pub(crate) fn child_mean(values: &[f64], node: NodeId) -> f64 {
    0.5 * (values[2 * node.index] + values[2 * node.index + 1])
}

/// Consumption rate (one value per node on steps `0..N`) and terminal
/// wealth (one value per leaf).
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub consumption: AdaptedProcess,
    pub terminal: Vec<f64>,
}

impl Strategy {
    pub fn new(m: &LatticeModel, consumption: AdaptedProcess, terminal: Vec<f64>) -> Result<Self> {
        let s = Self {
            consumption,
            terminal,
        };
        s.check_shape(m)?;
        Ok(s)
    }

    pub fn constant(m: &LatticeModel, consumption: f64, terminal: f64) -> Result<Self> {
        Self::new(
            m,
            AdaptedProcess::constant_integrand(m, consumption)?,
            vec![terminal; m.leaf_count()],
        )
    }

    pub(crate) fn check_shape(&self, m: &LatticeModel) -> Result<()> {
        self.consumption.expect_levels(m.steps())?;
        if self.terminal.len() != m.leaf_count() {
            return Err(Error::Shape {
                expected: m.leaf_count(),
                found: self.terminal.len(),
            });
        }
        Ok(())
    }

    /// Shape plus nonnegativity of consumption and terminal wealth.
    pub fn validate(&self, m: &LatticeModel) -> Result<()> {
        self.check_shape(m)?;
        if let Some((node, c)) = self.consumption.iter().find(|(_, c)| !(*c >= 0.0)) {
            return Err(invalid("consumption", format!("c = {c} < 0 at {node}")));
        }
        if let Some((i, x)) = self
            .terminal
            .iter()
            .enumerate()
            .find(|(_, x)| !(**x >= 0.0))
        {
            return Err(invalid(
                "terminal",
                format!(
                    "xi = {x} < 0 at {}",
                    NodeId::new(self.consumption.level_count(), i)
                ),
            ));
        }
        Ok(())
    }

    /// `(1 - lambda) * self + lambda * other`.
    pub fn combine(&self, other: &Strategy, lambda: f64) -> Strategy {
        let consumption = self
            .consumption
            .map(|n, a| (1.0 - lambda) * a + lambda * other.consumption.at(n));
        let terminal = self
            .terminal
            .iter()
            .zip(&other.terminal)
            .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
            .collect();
        Strategy {
            consumption,
            terminal,
        }
    }

    /// Pointwise difference `other - self`.
    pub fn direction_to(&self, other: &Strategy) -> Strategy {
        other.subtract(self)
    }

    fn subtract(&self, other: &Strategy) -> Strategy {
        Strategy {
            consumption: self.consumption.map(|n, a| a - other.consumption.at(n)),
            terminal: self
                .terminal
                .iter()
                .zip(&other.terminal)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// `self + alpha * direction`.
    pub fn step(&self, direction: &Strategy, alpha: f64) -> Strategy {
        Strategy {
            consumption: self
                .consumption
                .map(|n, a| a + alpha * direction.consumption.at(n)),
            terminal: self
                .terminal
                .iter()
                .zip(&direction.terminal)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        }
    }
}

/// State-price density `E(-theta . B)` with one-step factors `1 ∓ theta sqrt(dt)`.
pub fn pricing_density(m: &LatticeModel) -> Result<AdaptedProcess> {
    m.constant_drift_density(-m.theta())
}

/// Forward wealth recursion `X_{k+1} = X_k + pi_k sigma (theta dt + dB) - c_k dt`.
pub fn wealth_forward(
    m: &LatticeModel,
    x0: f64,
    consumption: &AdaptedProcess,
    pi: &AdaptedProcess,
) -> Result<AdaptedProcess> {
    consumption.expect_levels(m.steps())?;
    pi.expect_levels(m.steps())?;
    let mut levels = vec![vec![x0]];
    for k in 0..m.steps() {
        let prev = &levels[k];
        let mut next = Vec::with_capacity(prev.len() * 2);
        for (i, &x) in prev.iter().enumerate() {
            let node = NodeId::new(k, i);
            let invest = pi.at(node) * m.sigma();
            let drain = consumption.at(node) * m.dt();
            next.push(x + invest * (m.theta() * m.dt() + m.sqrt_dt()) - drain);
            next.push(x + invest * (m.theta() * m.dt() - m.sqrt_dt()) - drain);
        }
        levels.push(next);
    }
    Ok(AdaptedProcess { levels })
}

/// Replicating portfolio of a strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub x0: f64,
    pub pi: AdaptedProcess,
    pub wealth: AdaptedProcess,
}

/// Backward pricing under the martingale measure: `X_k = E~[X_{k+1}] + c_k dt`,
/// with `pi_k` matching the two-branch spread of `X_{k+1}`.
pub fn replicate(m: &LatticeModel, s: &Strategy) -> Result<Replication> {
    s.check_shape(m)?;
    let ts = m.theta() * m.sqrt_dt();
    if ts.abs() >= 1.0 {
        return Err(Error::StepSize { value: ts.abs() });
    }
    let (p_up, p_down) = (0.5 * (1.0 - ts), 0.5 * (1.0 + ts));
    let n = m.steps();
    let mut wealth: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    let mut pi: Vec<Vec<f64>> = vec![Vec::new(); n];
    wealth[n] = s.terminal.clone();
    for k in (0..n).rev() {
        let next = &wealth[k + 1];
        let mut level = Vec::with_capacity(1 << k);
        let mut hedge = Vec::with_capacity(1 << k);
        for i in 0..1usize << k {
            let (up, down) = (next[2 * i], next[2 * i + 1]);
            let c = s.consumption.at(NodeId::new(k, i));
            level.push(p_up * up + p_down * down + c * m.dt());
            hedge.push((up - down) / (2.0 * m.sigma() * m.sqrt_dt()));
        }
        wealth[k] = level;
        pi[k] = hedge;
    }
    Ok(Replication {
        x0: wealth[0][0],
        pi: AdaptedProcess { levels: pi },
        wealth: AdaptedProcess { levels: wealth },
    })
}

/// `E[D~_N xi] + sum_k E[D~_k c_k] dt` by direct summation over nodes.
pub fn budget_by_summation(m: &LatticeModel, s: &Strategy) -> Result<f64> {
    s.check_shape(m)?;
    let density = pricing_density(m)?;
    let terminal = density
        .last_level()
        .iter()
        .zip(&s.terminal)
        .map(|(d, x)| d * x)
        .sum::<f64>()
        / m.leaf_count() as f64;
    let mut running = 0.0;
    for k in 0..m.steps() {
        let weight = 1.0 / (1usize << k) as f64;
        running += density
            .level(k)
            .iter()
            .zip(s.consumption.level(k))
            .map(|(d, c)| d * c)
            .sum::<f64>()
            * weight
            * m.dt();
    }
    Ok(terminal + running)
}
