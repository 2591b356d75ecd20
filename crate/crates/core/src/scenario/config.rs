use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lattice::{
    build_lattice, pricing_density, DensityConvention, LatticeModel, MAX_PATH_STEPS,
};
use crate::qcalc::QParams;
use crate::utility::UtilitySpec;

/// What a scenario run computes and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Inner,
    OracleCompare,
    Entropy,
    MaxPrinciple,
    Optimize,
    ExampleNc,
    Convergence,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::Inner,
        Mode::OracleCompare,
        Mode::Entropy,
        Mode::MaxPrinciple,
        Mode::Optimize,
        Mode::ExampleNc,
        Mode::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Inner => "inner",
            Mode::OracleCompare => "oracle-compare",
            Mode::Entropy => "entropy",
            Mode::MaxPrinciple => "max-principle",
            Mode::Optimize => "optimize",
            Mode::ExampleNc => "example-nc",
            Mode::Convergence => "convergence",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Mode::ALL.iter().map(|m| m.name()).collect();
                format!("unknown mode `{s}`, expected one of {}", names.join(", "))
            })
    }
}

/// `(key, default, description)` for every accepted key. `mode` and `gamma`
/// have no default.
pub const KEYS: &[(&str, &str, &str)] = &[
    (
        "mode",
        "",
        "inner | oracle-compare | entropy | max-principle | optimize | example-nc | convergence",
    ),
    ("gamma", "", "ambiguity aversion, > 0"),
    (
        "q",
        "2.0",
        "Tsallis index, > 1 (0 < q < 1 only with experimental = true)",
    ),
    ("T", "1.0", "horizon"),
    ("N", "6", "lattice steps, at most 22"),
    ("sigma", "0.2", "volatility, > 0"),
    ("b", "0.1", "excess drift; theta = b / sigma"),
    ("p0", "0.5", "power-utility exponent in (0, 1)"),
    ("x", "1.0", "initial wealth, > 0"),
    (
        "adjoint_density",
        "theta",
        "theta | sigma_theta: per-step factor of the adjoint density",
    ),
    (
        "grid_points",
        "2001",
        "odd number of drift values for the grid search",
    ),
    (
        "grid_span",
        "0.9",
        "fraction of the equivalence interval covered by the grid",
    ),
    (
        "tolerance",
        "1e-10",
        "Picard stopping tolerance on the transformed value",
    ),
    ("max_iterations", "200", "Picard iteration cap"),
    (
        "budget_tolerance",
        "1e-10",
        "relative budget mismatch accepted by the shooting",
    ),
    (
        "seed",
        "0",
        "seed for random instances (overridden by --seed)",
    ),
    ("instances", "20", "random instances in oracle-compare"),
    (
        "zeta_scale",
        "1.0",
        "random terminal values are drawn from [0, zeta_scale]",
    ),
    (
        "source_scale",
        "0.05",
        "random running utilities are drawn from [0, source_scale]",
    ),
    ("eta", "0.3", "constant drift profile in entropy mode"),
    (
        "n_max",
        "16",
        "largest lattice in convergence mode (powers of two up to it)",
    ),
    ("experimental", "false", "allow 0 < q < 1"),
    ("beta", "2.0", "admissibility exponent, > 1 (recorded only)"),
    (
        "p_moment",
        "-",
        "admissibility moment, > q + 1 (recorded only; unset by default)",
    ),
];

/// Text for `--help`: one line per key with its default.
pub fn key_reference() -> String {
    let mut out = String::from("Config keys (`key = value`, `#` starts a comment):\n");
    for (key, default, about) in KEYS {
        let default = if default.is_empty() {
            "required"
        } else {
            default
        };
        out.push_str(&format!("  {key:<17} [{default}] {about}\n"));
    }
    out
}

/// Parsed and validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub gamma: f64,
    pub q: f64,
    pub horizon: f64,
    pub steps: usize,
    pub sigma: f64,
    pub drift: f64,
    pub p0: f64,
    pub x0: f64,
    pub adjoint_density: DensityConvention,
    pub grid_points: usize,
    pub grid_span: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub budget_tolerance: f64,
    pub seed: u64,
    pub instances: usize,
    pub zeta_scale: f64,
    pub source_scale: f64,
    pub eta: f64,
    pub n_max: usize,
    pub experimental: bool,
    pub beta: f64,
    pub p_moment: Option<f64>,
}

impl ScenarioConfig {
    pub fn model(&self) -> Result<LatticeModel> {
        self.model_with_steps(self.steps)
    }

    pub fn model_with_steps(&self, steps: usize) -> Result<LatticeModel> {
        Ok(build_lattice(self.horizon, steps, self.sigma, self.drift)?
            .with_adjoint_density(self.adjoint_density))
    }

    pub fn qparams(&self) -> Result<QParams> {
        if self.experimental && self.q < 1.0 {
            QParams::experimental(self.q, self.gamma)
        } else {
            QParams::new(self.q, self.gamma)
        }
    }

    pub fn utility(&self) -> Result<UtilitySpec> {
        UtilitySpec::power(self.p0)
    }
}

/// Reads `path` and parses it with [`parse_config_str`].
pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config_str(&text)
}

struct Entries {
    values: BTreeMap<&'static str, (usize, String)>,
}

impl Entries {
    fn line(&self, key: &str) -> usize {
        self.values.get(key).map_or(0, |(line, _)| *line)
    }

    fn fail(&self, key: &'static str, message: impl Into<String>) -> Error {
        let message = message.into();
        match self.line(key) {
            0 => Error::InvalidParameter {
                name: key,
                reason: message,
            },
            line => Error::Config {
                line,
                message: format!("`{key}`: {message}"),
            },
        }
    }

    fn raw(&self, key: &'static str) -> Option<&str> {
        self.values.get(key).map(|(_, v)| v.as_str())
    }

    fn get<T: FromStr>(&self, key: &'static str) -> Result<T> {
        let default = KEYS.iter().find(|(k, _, _)| *k == key).map(|(_, d, _)| *d);
        let text = match (self.raw(key), default) {
            (Some(v), _) => v,
            (None, Some(d)) if !d.is_empty() => d,
            _ => return Err(Error::MissingKey { key }),
        };
        text.parse::<T>().map_err(|_| {
            self.fail(
                key,
                format!("cannot parse `{text}` as {}", std::any::type_name::<T>()),
            )
        })
    }
}

/// Parses `key = value` lines. Unknown and repeated keys are errors, `mode`
/// and `gamma` are required, and every value is range-checked before any
/// solver runs.
pub fn parse_config_str(text: &str) -> Result<ScenarioConfig> {
    let mut entries = Entries {
        values: BTreeMap::new(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Config {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let key = key.trim();
        let Some(&(known, _, _)) = KEYS.iter().find(|(k, _, _)| *k == key) else {
            return Err(Error::Config {
                line,
                message: format!("unknown key `{key}`"),
            });
        };
        if let Some((first, _)) = entries.values.get(known) {
            return Err(Error::Config {
                line,
                message: format!("`{key}` already set on line {first}"),
            });
        }
        entries
            .values
            .insert(known, (line, value.trim().to_string()));
    }

    let mode_text: String = entries.get("mode")?;
    let mode = mode_text
        .parse::<Mode>()
        .map_err(|e| entries.fail("mode", e))?;
    let gamma: f64 = entries.get("gamma")?;
    let adjoint_text: String = entries.get("adjoint_density")?;
    let adjoint_density = match adjoint_text.as_str() {
        "theta" => DensityConvention::Theta,
        "sigma_theta" => DensityConvention::SigmaTheta,
        other => {
            return Err(entries.fail(
                "adjoint_density",
                format!("expected theta or sigma_theta, got `{other}`"),
            ))
        }
    };
    let cfg = ScenarioConfig {
        mode,
        gamma,
        q: entries.get("q")?,
        horizon: entries.get("T")?,
        steps: entries.get("N")?,
        sigma: entries.get("sigma")?,
        drift: entries.get("b")?,
        p0: entries.get("p0")?,
        x0: entries.get("x")?,
        adjoint_density,
        grid_points: entries.get("grid_points")?,
        grid_span: entries.get("grid_span")?,
        tolerance: entries.get("tolerance")?,
        max_iterations: entries.get("max_iterations")?,
        budget_tolerance: entries.get("budget_tolerance")?,
        seed: entries.get("seed")?,
        instances: entries.get("instances")?,
        zeta_scale: entries.get("zeta_scale")?,
        source_scale: entries.get("source_scale")?,
        eta: entries.get("eta")?,
        n_max: entries.get("n_max")?,
        experimental: entries.get("experimental")?,
        beta: entries.get("beta")?,
        p_moment: match entries.raw("p_moment") {
            Some(_) => Some(entries.get("p_moment")?),
            None => None,
        },
    };
    validate(&cfg, &entries)?;
    Ok(cfg)
}

fn validate(cfg: &ScenarioConfig, e: &Entries) -> Result<()> {
    let positive = |key: &'static str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(e.fail(key, format!("must be positive and finite, got {v}")))
        }
    };
    positive("gamma", cfg.gamma)?;
    positive("T", cfg.horizon)?;
    positive("sigma", cfg.sigma)?;
    positive("x", cfg.x0)?;
    positive("tolerance", cfg.tolerance)?;
    positive("budget_tolerance", cfg.budget_tolerance)?;
    if !cfg.drift.is_finite() {
        return Err(e.fail("b", "must be finite"));
    }
    if cfg.q == 1.0 || !(cfg.q > 0.0) || !cfg.q.is_finite() {
        return Err(e.fail("q", format!("must be > 1, got {}", cfg.q)));
    }
    if cfg.q < 1.0 && !cfg.experimental {
        return Err(e.fail("q", format!("q = {} < 1 needs experimental = true", cfg.q)));
    }
    if !(cfg.p0 > 0.0 && cfg.p0 < 1.0) {
        return Err(e.fail("p0", format!("must lie in (0, 1), got {}", cfg.p0)));
    }
    if cfg.steps == 0 || cfg.steps > MAX_PATH_STEPS {
        return Err(e.fail(
            "N",
            format!("must lie in 1..={MAX_PATH_STEPS}, got {}", cfg.steps),
        ));
    }
    if cfg.n_max == 0 || cfg.n_max > MAX_PATH_STEPS {
        return Err(e.fail(
            "n_max",
            format!("must lie in 1..={MAX_PATH_STEPS}, got {}", cfg.n_max),
        ));
    }
    if cfg.grid_points < 3 || cfg.grid_points.is_multiple_of(2) {
        return Err(e.fail("grid_points", "must be odd and at least 3"));
    }
    if !(cfg.grid_span > 0.0 && cfg.grid_span < 1.0) {
        return Err(e.fail("grid_span", "must lie in (0, 1)"));
    }
    if cfg.max_iterations == 0 {
        return Err(e.fail("max_iterations", "must be at least 1"));
    }
    if cfg.instances == 0 {
        return Err(e.fail("instances", "must be at least 1"));
    }
    if !(cfg.zeta_scale >= 0.0 && cfg.zeta_scale.is_finite()) {
        return Err(e.fail("zeta_scale", "must be nonnegative"));
    }
    if !(cfg.source_scale >= 0.0 && cfg.source_scale.is_finite()) {
        return Err(e.fail("source_scale", "must be nonnegative"));
    }
    if !cfg.eta.is_finite() {
        return Err(e.fail("eta", "must be finite"));
    }
    if !(cfg.beta > 1.0) {
        return Err(e.fail("beta", "must be > 1"));
    }
    if let Some(pm) = cfg.p_moment {
        if !(pm > cfg.q + 1.0) {
            return Err(e.fail("p_moment", format!("must exceed q + 1 = {}", cfg.q + 1.0)));
        }
    }
    // lattice-level checks (step size, equivalence) report against N
    let m = cfg.model().map_err(|err| e.fail("N", err.to_string()))?;
    pricing_density(&m).map_err(|err| e.fail("N", err.to_string()))?;
    if cfg.eta.abs() * (cfg.horizon / cfg.steps as f64).sqrt() >= 1.0 {
        return Err(e.fail("eta", "|eta| sqrt(dt) must stay below 1"));
    }
    Ok(())
}
