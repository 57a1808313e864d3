//! Closed-form value function of the (capped) stock loan.
//!
//! Writing `r_tilde = r - gamma` and working on the discounted price
//! `x = e^{-gamma t} S_t`, the value function `h` solves the variational
//! inequality built on the pricing operator
//!
//! ```text
//!   (1/2) sigma^2 x^2 h'' + (r_tilde - delta) x h' - r_tilde h = 0
//! ```
//!
//! in the continuation region, dominates the payoff `(min(x, L) - q)+`
//! everywhere, and satisfies `h <= x`. Because `r_tilde <= 0`, the usual
//! determination `h(0) = 0` is not enough to pin the solution; the boundary
//! behavior `h'(0+) = 0` is what kills the `x^{lambda2}` branch near zero.
//! The resulting solution is a piecewise power function glued by smooth fit
//! at the free boundary `b = q lambda1 / (lambda1 - 1)` and by continuity
//! (with a kink) at the cap.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{self, LoanTerms, MarketParams, Regime};

/// Characteristic exponents of the pricing ODE.
///
/// `lambda1` and `lambda2` are the two roots of
/// `(1/2) sigma^2 l (l - 1) + (r_tilde - delta) l - r_tilde = 0`,
/// computed through the equivalent form
///
/// ```text
///   lambda_{1,2} = (-mu +- sqrt(mu^2 - 2(gamma - r))) / sigma,
///   mu = -(sigma/2 + (gamma - r + delta)/sigma).
/// ```
///
/// In the dividend regime `lambda1 > 1 > lambda2 >= 0` (with `lambda2 > 0`
/// when `gamma > r` strictly); in the zero-dividend regime
/// `lambda1 = 2(gamma - r)/sigma^2 > 1 = lambda2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub mu: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Regime that produced the exponents.
    pub regime: Regime,
}

/// Computes the characteristic exponents for validated parameters.
pub fn exponents(market: &MarketParams, terms: &LoanTerms) -> Result<Exponents> {
    let regime = params::classify(market, terms)?;
    let (r, sigma, delta) = (market.r, market.sigma, market.delta);
    let gamma = terms.gamma;
    let mu = -(sigma / 2.0 + (gamma - r + delta) / sigma);
    // Nonnegative by the discriminant identity
    // mu^2 - 2(gamma - r) = (sigma/2 - (gamma - r + delta)/sigma)^2 + 2 delta.
    let disc = mu * mu - 2.0 * (gamma - r);
    let root = disc.max(0.0).sqrt();
    let lambda1 = (-mu + root) / sigma;
    let lambda2 = (-mu - root) / sigma;
    if lambda1 <= 1.0 {
        // Unreachable after classify; kept as a defensive gate because the
        // free boundary below divides by lambda1 - 1.
        return Err(Error::RegimeViolation(format!(
            "exponent lambda1 must exceed 1, got {lambda1}"
        )));
    }
    Ok(Exponents { mu, lambda1, lambda2, regime })
}

/// Free boundary `b = q lambda1 / (lambda1 - 1)`; always exceeds `q`.
pub fn boundary_b(exp: &Exponents, q: f64) -> Result<f64> {
    if exp.lambda1 <= 1.0 {
        return Err(Error::RegimeViolation(format!(
            "free boundary requires lambda1 > 1, got {}",
            exp.lambda1
        )));
    }
    Ok(q * exp.lambda1 / (exp.lambda1 - 1.0))
}

/// Which piecewise form the value function takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Shape {
    /// Cap at or above the free boundary: power branch, linear band, tail.
    CapAboveB,
    /// Cap below the free boundary: two power branches meeting at the cap.
    CapBelowB,
    /// No cap: power branch up to `b`, then the payoff `x - q`.
    Uncapped,
}

/// Side selector for one-sided derivatives at the cap kink.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Immutable piecewise value function.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    pub exponents: Exponents,
    /// Free boundary level (currency).
    pub b: f64,
    pub shape: Shape,
    /// Loan principal.
    pub q: f64,
    /// Cap level, absent when uncapped.
    pub cap: Option<f64>,
    /// Loan rate, needed to map the initial value into the value process.
    pub gamma: f64,
}

/// Builds the value function, selecting the shape by comparing the cap
/// with the free boundary.
pub fn build(market: &MarketParams, terms: &LoanTerms) -> Result<ValueFunction> {
    let exp = exponents(market, terms)?;
    let b = boundary_b(&exp, terms.q)?;
    let shape = match terms.cap {
        Some(cap) if cap >= b => Shape::CapAboveB,
        Some(_) => Shape::CapBelowB,
        None => Shape::Uncapped,
    };
    Ok(ValueFunction {
        exponents: exp,
        b,
        shape,
        q: terms.q,
        cap: terms.cap,
        gamma: terms.gamma,
    })
}

/// `(x / base)^lambda` via `exp(lambda ln(x / base))`, with the `x = 0`
/// limit short-circuited to zero (valid for the positive exponents used
/// here; avoids `0^lambda` edge cases and precision loss for extreme
/// exponents).
fn power_ratio(x: f64, base: f64, lambda: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        (lambda * (x / base).ln()).exp()
    }
}

impl ValueFunction {
    fn check_point(x: f64) -> Result<()> {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::Domain(format!(
                "stock price must be finite and >= 0, got {x}"
            )));
        }
        Ok(())
    }

    /// Evaluates the value function at a discounted stock price `x >= 0`.
    pub fn value(&self, x: f64) -> Result<f64> {
        Self::check_point(x)?;
        let Exponents { lambda1, lambda2, .. } = self.exponents;
        let (b, q) = (self.b, self.q);
        Ok(match self.shape {
            Shape::CapAboveB => {
                let cap = self.cap.expect("capped shape carries a cap");
                if x <= b {
                    (b - q) * power_ratio(x, b, lambda1)
                } else if x < cap {
                    x - q
                } else {
                    (cap - q) * power_ratio(x, cap, lambda2)
                }
            }
            Shape::CapBelowB => {
                let cap = self.cap.expect("capped shape carries a cap");
                if x < cap {
                    (cap - q) * power_ratio(x, cap, lambda1)
                } else if x == cap {
                    cap - q
                } else {
                    (cap - q) * power_ratio(x, cap, lambda2)
                }
            }
            Shape::Uncapped => {
                if x <= b {
                    (b - q) * power_ratio(x, b, lambda1)
                } else {
                    x - q
                }
            }
        })
    }

    /// Two-sided derivative. Errors at the cap, where the value has a kink;
    /// use [`ValueFunction::derivative_sided`] there.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::Domain(format!(
                "derivative requires x > 0, got {x}"
            )));
        }
        if let Some(cap) = self.cap {
            if x == cap {
                return Err(Error::Domain(format!(
                    "derivative is two-valued at the cap {cap}; request a side"
                )));
            }
        }
        self.derivative_unchecked(x)
    }

    /// One-sided derivative; only the side at the cap differs from the
    /// two-sided value.
    pub fn derivative_sided(&self, x: f64, side: Side) -> Result<f64> {
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::Domain(format!(
                "derivative requires x > 0, got {x}"
            )));
        }
        match self.cap {
            Some(cap) if x == cap => {
                let Exponents { lambda1, lambda2, .. } = self.exponents;
                let q = self.q;
                Ok(match (self.shape, side) {
                    (Shape::CapAboveB, Side::Left) => 1.0,
                    (Shape::CapAboveB, Side::Right) => lambda2 * (cap - q) / cap,
                    (Shape::CapBelowB, Side::Left) => lambda1 * (cap - q) / cap,
                    (Shape::CapBelowB, Side::Right) => lambda2 * (cap - q) / cap,
                    (Shape::Uncapped, _) => unreachable!("uncapped has no cap"),
                })
            }
            _ => self.derivative_unchecked(x),
        }
    }

    fn derivative_unchecked(&self, x: f64) -> Result<f64> {
        let Exponents { lambda1, lambda2, .. } = self.exponents;
        let (b, q) = (self.b, self.q);
        Ok(match self.shape {
            Shape::CapAboveB => {
                let cap = self.cap.expect("capped shape carries a cap");
                if x <= b {
                    // Smooth fit makes this exactly 1 at x = b.
                    lambda1 * (b - q) / b * power_ratio(x, b, lambda1 - 1.0)
                } else if x < cap {
                    1.0
                } else {
                    lambda2 * (cap - q) / cap * power_ratio(x, cap, lambda2 - 1.0)
                }
            }
            Shape::CapBelowB => {
                let cap = self.cap.expect("capped shape carries a cap");
                if x < cap {
                    lambda1 * (cap - q) / cap * power_ratio(x, cap, lambda1 - 1.0)
                } else {
                    lambda2 * (cap - q) / cap * power_ratio(x, cap, lambda2 - 1.0)
                }
            }
            Shape::Uncapped => {
                if x <= b {
                    lambda1 * (b - q) / b * power_ratio(x, b, lambda1 - 1.0)
                } else {
                    1.0
                }
            }
        })
    }

    /// Value process at calendar time `t`: `V_t = e^{gamma t} f(e^{-gamma t} s_t)`.
    pub fn value_process(&self, t: f64, s_t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Domain(format!("time must be >= 0, got {t}")));
        }
        Self::check_point(s_t)?;
        let growth = (self.gamma * t).exp();
        Ok(growth * self.value(s_t / growth)?)
    }

    /// Fixed-schema JSON report:
    /// `{regime, mu, lambda1, lambda2, b, shape, q, cap}`.
    pub fn report_json(&self) -> serde_json::Value {
        serde_json::json!({
            "regime": self.exponents.regime.tag,
            "mu": self.exponents.mu,
            "lambda1": self.exponents.lambda1,
            "lambda2": self.exponents.lambda2,
            "b": self.b,
            "shape": self.shape,
            "q": self.q,
            "cap": self.cap,
        })
    }

    /// Exercise payoff `(min(x, L) - q)+` seen by the borrower.
    pub fn payoff(&self, x: f64) -> f64 {
        let capped = match self.cap {
            Some(cap) => x.min(cap),
            None => x,
        };
        (capped - self.q).max(0.0)
    }
}
