//! Deformed logarithm and exponential of order `q`, and the coefficient
//! `mu` that appears in the denominator of the quadratic BSDE generator.
//!
//! All evaluations go through `exp((1 - q) * ln x)` so that large and tiny
//! arguments neither overflow nor silently lose the domain boundary.

use crate::error::{invalid, Error, Result};

/// Entropy order `q` and ambiguity aversion `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QParams {
    q: f64,
    gamma: f64,
    experimental: bool,
}

impl QParams {
    /// Parameters for the supported regime `q > 1`, `gamma > 0`.
    pub fn new(q: f64, gamma: f64) -> Result<Self> {
        if !q.is_finite() || q <= 1.0 {
            if q > 0.0 && q < 1.0 {
                return Err(invalid(
                    "q",
                    format!("q = {q} < 1 is only available through QParams::experimental"),
                ));
            }
            return Err(invalid("q", format!("q = {q} must satisfy q > 1")));
        }
        Self::check_gamma(gamma)?;
        Ok(Self {
            q,
            gamma,
            experimental: false,
        })
    }

    /// Parameters for `0 < q < 1`. Uniqueness of the associated BSDE is not
    /// known in this regime, so results carry the `is_experimental` flag.
    pub fn experimental(q: f64, gamma: f64) -> Result<Self> {
        if q > 1.0 {
            return Self::new(q, gamma);
        }
        if !q.is_finite() || q <= 0.0 || q == 1.0 {
            return Err(invalid("q", format!("q = {q} must be positive and != 1")));
        }
        Self::check_gamma(gamma)?;
        Ok(Self {
            q,
            gamma,
            experimental: true,
        })
    }

    fn check_gamma(gamma: f64) -> Result<()> {
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(invalid("gamma", format!("gamma = {gamma} must be > 0")));
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_experimental(&self) -> bool {
        self.experimental
    }

    pub fn ln_q(&self, x: f64) -> Result<f64> {
        ln_q(x, self)
    }

    pub fn exp_q(&self, x: f64) -> Result<f64> {
        exp_q(x, self)
    }

    pub fn mu(&self, y: f64) -> Result<f64> {
        mu(y, self)
    }
}

/// `x^(1-q)` for `x > 0` (and `x = 0` when `q < 1`).
fn pow_one_minus_q(x: f64, q: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        ((1.0 - q) * x.ln()).exp()
    }
}

/// q-logarithm `(x^(1-q) - 1) / (1 - q)`.
pub fn ln_q(x: f64, p: &QParams) -> Result<f64> {
    let q = p.q;
    let valid = if q > 1.0 { x > 0.0 } else { x >= 0.0 };
    if !valid || !x.is_finite() {
        return Err(Error::Domain {
            function: "ln_q",
            argument: x,
            q,
        });
    }
    Ok((1.0 - pow_one_minus_q(x, q)) / (q - 1.0))
}

/// q-exponential `[1 + (1-q) x]^(1/(1-q))`, the inverse of [`ln_q`].
pub fn exp_q(x: f64, p: &QParams) -> Result<f64> {
    let q = p.q;
    let base = 1.0 + (1.0 - q) * x;
    let valid = if q > 1.0 { base > 0.0 } else { base >= 0.0 };
    if !valid || !x.is_finite() {
        return Err(Error::Domain {
            function: "exp_q",
            argument: x,
            q,
        });
    }
    if base == 0.0 {
        return Ok(0.0);
    }
    Ok((base.ln() / (1.0 - q)).exp())
}

/// `mu(y) = (1 - (1-q) gamma y) / q`, equal to `exp_q(-gamma y)^(1-q) / q`.
pub fn mu(y: f64, p: &QParams) -> Result<f64> {
    let bracket = 1.0 - (1.0 - p.q) * p.gamma * y;
    if bracket <= 0.0 || !y.is_finite() {
        return Err(Error::Domain {
            function: "mu",
            argument: y,
            q: p.q,
        });
    }
    Ok(bracket / p.q)
}
