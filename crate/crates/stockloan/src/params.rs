//! Model and contract parameters, their standing assumptions, and the
//! rate/dividend regime classification every other module depends on.
//!
//! The model prices a loan of principal `q` collateralized by one share of
//! stock: the borrower may redeem the share at any time by repaying
//! `q e^{gamma t}`, optionally with the redemption payoff capped at
//! `L e^{gamma t}`. Discounting the payoff turns the contract into a
//! perpetual American claim on the discounted price `e^{-gamma t} S_t`
//! with effective rate `r_tilde = r - gamma <= 0`, which is the regime the
//! closed-form machinery in [`crate::closedform`] is built for.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Black-Scholes market parameters for the underlying stock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Continuously compounded risk-free rate (per year).
    pub r: f64,
    /// Volatility (per square-root year).
    pub sigma: f64,
    /// Continuous dividend yield (per year).
    pub delta: f64,
}

impl MarketParams {
    pub fn new(r: f64, sigma: f64, delta: f64) -> Result<Self> {
        let m = MarketParams { r, sigma, delta };
        m.check()?;
        Ok(m)
    }

    pub(crate) fn check(&self) -> Result<()> {
        require_finite("r", self.r)?;
        require_finite("sigma", self.sigma)?;
        require_finite("delta", self.delta)?;
        if self.r <= 0.0 {
            return Err(Error::Parameter(format!("r must be > 0, got {}", self.r)));
        }
        if self.sigma <= 0.0 {
            return Err(Error::Parameter(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        if self.delta < 0.0 {
            return Err(Error::Parameter(format!(
                "delta must be >= 0, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Contractual terms of a (possibly capped) stock loan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoanTerms {
    /// Loan principal (currency).
    pub q: f64,
    /// Continuously compounded loan interest rate (per year).
    pub gamma: f64,
    /// Up-front service fee charged by the lender (currency).
    pub c: f64,
    /// Optional cap level; `None` means the payoff is uncapped.
    pub cap: Option<f64>,
    /// Initial stock price (currency).
    pub s0: f64,
}

impl LoanTerms {
    pub fn new(q: f64, gamma: f64, c: f64, cap: Option<f64>, s0: f64) -> Result<Self> {
        let t = LoanTerms { q, gamma, c, cap, s0 };
        t.check()?;
        Ok(t)
    }

    pub(crate) fn check(&self) -> Result<()> {
        require_finite("q", self.q)?;
        require_finite("gamma", self.gamma)?;
        require_finite("c", self.c)?;
        require_finite("s0", self.s0)?;
        if self.q <= 0.0 {
            return Err(Error::Parameter(format!("q must be > 0, got {}", self.q)));
        }
        if self.s0 <= 0.0 {
            return Err(Error::Parameter(format!("s0 must be > 0, got {}", self.s0)));
        }
        if let Some(cap) = self.cap {
            require_finite("cap", cap)?;
            // A cap at or below the principal makes the redemption payoff
            // identically zero, outside the contract family priced here.
            if cap <= self.q {
                return Err(Error::Parameter(format!(
                    "cap must exceed the principal q: cap = {cap}, q = {}",
                    self.q
                )));
            }
        }
        Ok(())
    }

    /// The customary fee range is `0 <= c <= q`. Values outside it are not
    /// an error (the fair-terms calculus legitimately produces negative
    /// fees when the spot starts at or above the cap), so callers that want
    /// to surface it do so as a warning.
    pub fn fee_within_customary_range(&self) -> bool {
        self.c >= 0.0 && self.c <= self.q
    }
}

/// Admissible parameter regime.
///
/// Both regimes keep the effective rate `r_tilde = r - gamma` nonpositive
/// and put the characteristic exponents in the band `lambda1 > 1 >= lambda2 >= 0`
/// that the piecewise value function relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeTag {
    /// `delta > 0` and `gamma - r + delta >= 0` (and `gamma >= r`).
    DividendRegime,
    /// `delta = 0` and `gamma - r > sigma^2 / 2`, strictly.
    ZeroDividendRegime,
}

/// Result of regime classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    /// Effective rate `r - gamma` (per year); nonpositive in both regimes.
    pub r_tilde: f64,
}

/// Classifies the regime without the no-arbitrage check on `s0 - q + c`.
///
/// The fair-terms calculus solves *for* the fee, so it validates fields and
/// regime but must not gate on the fee it is about to compute.
pub fn classify(market: &MarketParams, terms: &LoanTerms) -> Result<Regime> {
    market.check()?;
    terms.check()?;
    let r_tilde = market.r - terms.gamma;
    if market.delta > 0.0 {
        // The delta > 0 branch additionally needs gamma >= r: the dominance
        // argument behind optimality and the exponent band lambda2 >= 0 both
        // fail for a positive effective rate.
        if r_tilde > 0.0 {
            return Err(Error::RegimeViolation(format!(
                "effective rate r - gamma must be <= 0, got {} - {} = {r_tilde}",
                market.r, terms.gamma
            )));
        }
        if terms.gamma - market.r + market.delta < 0.0 {
            return Err(Error::RegimeViolation(format!(
                "with delta > 0, gamma - r + delta >= 0 is required, got {}",
                terms.gamma - market.r + market.delta
            )));
        }
        Ok(Regime { tag: RegimeTag::DividendRegime, r_tilde })
    } else {
        // delta == 0: the strict inequality gamma - r > sigma^2 / 2 is
        // checked exactly; at equality the two exponents coincide and every
        // downstream formula degenerates.
        let excess = terms.gamma - market.r;
        let half_var = market.sigma * market.sigma / 2.0;
        if excess > half_var {
            Ok(Regime { tag: RegimeTag::ZeroDividendRegime, r_tilde })
        } else {
            Err(Error::RegimeViolation(format!(
                "with delta = 0, gamma - r > sigma^2/2 is required: gamma - r = {excess}, sigma^2/2 = {half_var}"
            )))
        }
    }
}

/// Full validation: field invariants, regime classification, and the
/// no-arbitrage condition `s0 - q + c > 0`.
pub fn validate(market: &MarketParams, terms: &LoanTerms) -> Result<Regime> {
    let regime = classify(market, terms)?;
    if terms.s0 - terms.q + terms.c <= 0.0 {
        return Err(Error::ArbitrageViolation {
            s0: terms.s0,
            q: terms.q,
            c: terms.c,
        });
    }
    Ok(regime)
}

fn require_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be finite, got {value}")))
    }
}

/// Parses a flat `key = value` configuration.
///
/// Recognized keys: `r`, `sigma`, `delta`, `gamma`, `q`, `c`, `s0`, and the
/// optional `cap`. Lines starting with `#` (and inline `#` comments) are
/// ignored. Errors name the offending key.
pub fn parse_config(text: &str) -> Result<(MarketParams, LoanTerms)> {
    const KEYS: [&str; 8] = ["r", "sigma", "delta", "gamma", "q", "c", "cap", "s0"];
    let mut seen: Vec<(String, f64)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        let key = key.trim();
        let value = value.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown config key `{key}`")));
        }
        if seen.iter().any(|(k, _)| k == key) {
            return Err(Error::Config(format!("duplicate config key `{key}`")));
        }
        let parsed: f64 = value.parse().map_err(|_| {
            Error::Config(format!("config key `{key}`: invalid number `{value}`"))
        })?;
        seen.push((key.to_string(), parsed));
    }

    let get = |key: &str| -> Result<f64> {
        seen.iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Config(format!("missing config key `{key}`")))
    };

    let market = MarketParams {
        r: get("r")?,
        sigma: get("sigma")?,
        delta: get("delta")?,
    };
    let terms = LoanTerms {
        q: get("q")?,
        gamma: get("gamma")?,
        c: get("c")?,
        cap: seen.iter().find(|(k, _)| k == "cap").map(|(_, v)| *v),
        s0: get("s0")?,
    };
    market.check()?;
    terms.check()?;
    Ok((market, terms))
}
