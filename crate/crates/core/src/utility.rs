//! Power utilities `u(x) = h(x) = x^p0` and the derived terminal map
//! `g(x) = exp_q(-gamma h(x))` with the inverses needed by the optimality
//! conditions.

use crate::error::{invalid, Error, Result};
use crate::qcalc::{exp_q, QParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilityKind {
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilitySpec {
    kind: UtilityKind,
    p0: f64,
}

impl UtilitySpec {
    pub fn power(p0: f64) -> Result<Self> {
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(invalid(
                "p0",
                format!("power exponent {p0} must lie in (0, 1)"),
            ));
        }
        Ok(Self {
            kind: UtilityKind::Power,
            p0,
        })
    }

    pub fn kind(&self) -> UtilityKind {
        self.kind
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    /// Consumption utility.
    pub fn u(&self, x: f64) -> f64 {
        x.max(0.0).powf(self.p0)
    }

    pub fn u_prime(&self, x: f64) -> f64 {
        self.p0 * x.powf(self.p0 - 1.0)
    }

    /// `(u')^{-1}`.
    pub fn inv_u_prime(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::Domain {
                function: "inv_u_prime",
                argument: y,
                q: f64::NAN,
            });
        }
        Ok((y / self.p0).powf(1.0 / (self.p0 - 1.0)))
    }

    /// Terminal utility.
    pub fn h(&self, x: f64) -> f64 {
        self.u(x)
    }

    pub fn h_prime(&self, x: f64) -> f64 {
        self.u_prime(x)
    }

    pub fn g(&self, x: f64, p: &QParams) -> Result<f64> {
        exp_q(-p.gamma() * self.h(x), p)
    }

    /// `g'(x) = -gamma g(x)^q h'(x)`, negative and increasing.
    pub fn g_prime(&self, x: f64, p: &QParams) -> Result<f64> {
        Ok(-p.gamma() * self.g(x, p)?.powf(p.q()) * self.h_prime(x))
    }

    /// `ln(-g'(e^t))` and its derivative in `t`; strictly decreasing.
    fn log_neg_g_prime(&self, t: f64, p: &QParams) -> (f64, f64) {
        let (q, gamma, p0) = (p.q(), p.gamma(), self.p0);
        let a = (q - 1.0) * gamma * (p0 * t).exp();
        let value = (gamma * p0).ln() + (p0 - 1.0) * t - q / (q - 1.0) * a.ln_1p();
        let slope = (p0 - 1.0) - q * p0 * a / ((q - 1.0) * (1.0 + a));
        (value, slope)
    }

    /// `(g')^{-1}(target)` for `target < 0`, by safeguarded Newton on
    /// `ln(-g'(e^t)) = ln(-target)` over a bracket in `t = ln x`.
    pub fn inv_g_prime(&self, target: f64, p: &QParams) -> Result<f64> {
        if !(target < 0.0) || !target.is_finite() || p.q() <= 1.0 {
            return Err(Error::Domain {
                function: "inv_g_prime",
                argument: target,
                q: p.q(),
            });
        }
        let goal = (-target).ln();
        let f = |t: f64| {
            let (v, s) = self.log_neg_g_prime(t, p);
            (v - goal, s)
        };
        // bracket: f decreasing, find lo with f > 0 and hi with f < 0
        let (mut lo, mut hi) = (-1.0, 1.0);
        let mut width = 2.0;
        while f(lo).0 < 0.0 {
            lo -= width;
            width *= 2.0;
            if lo < -1e4 {
                return Err(invalid("inv_g_prime", format!("no bracket for {target}")));
            }
        }
        width = 2.0;
        while f(hi).0 > 0.0 {
            hi += width;
            width *= 2.0;
            if hi > 1e4 {
                return Err(invalid("inv_g_prime", format!("no bracket for {target}")));
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (v, s) = f(t);
            if v > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let mut next = t - v / s;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-15 * t.abs().max(1.0) {
                return Ok(next.exp());
            }
            t = next;
        }
        Ok(t.exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_exponent() {
        assert!(UtilitySpec::power(0.0).is_err());
        assert!(UtilitySpec::power(1.0).is_err());
        assert!(UtilitySpec::power(0.5).is_ok());
    }

    #[test]
    fn shape_and_inada() {
        let u = UtilitySpec::power(0.5).unwrap();
        assert_eq!(u.u(0.0), 0.0);
        assert!(u.u_prime(1e-300) > 1e100);
        assert!(u.u_prime(1e300) < 1e-100);
        let mut prev = u.u_prime(0.01);
        for i in 2..100 {
            let cur = u.u_prime(0.01 * i as f64);
            assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn g_prime_matches_difference_quotient() {
        let u = UtilitySpec::power(0.4).unwrap();
        let p = QParams::new(2.0, 1.5).unwrap();
        for x in [0.2, 1.0, 3.0] {
            let h = 1e-6;
            let fd = (u.g(x + h, &p).unwrap() - u.g(x - h, &p).unwrap()) / (2.0 * h);
            assert!((fd - u.g_prime(x, &p).unwrap()).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn inverse_marginal_utility(x in 1e-3f64..1e3, p0 in 0.05f64..0.95) {
            let u = UtilitySpec::power(p0).unwrap();
            let back = u.inv_u_prime(u.u_prime(x)).unwrap();
            prop_assert!((back - x).abs() <= 1e-10 * x);
        }

        #[test]
        fn inverse_terminal_marginal(x in 1e-3f64..1e3, p0 in 0.1f64..0.9, q in 1.1f64..3.5, g in 0.2f64..3.0) {
            let u = UtilitySpec::power(p0).unwrap();
            let p = QParams::new(q, g).unwrap();
            let back = u.inv_g_prime(u.g_prime(x, &p).unwrap(), &p).unwrap();
            prop_assert!((back - x).abs() <= 1e-8 * x);
        }
    }
}
