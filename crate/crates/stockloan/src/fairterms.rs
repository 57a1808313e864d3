//! Fair-terms calculus.
//!
//! At inception the fee that makes the deal fair ties the initial value to
//! the money that changes hands: `f(S0) = S0 - q + c`, so
//! `c = f(S0) - S0 + q`. Which side of the free boundary and the cap the
//! spot starts on determines both the fee and the borrower's optimal
//! stopping rule:
//!
//! * spot at or above the cap — the fee is
//!   `(L - q)(S0/L)^{lambda2} + q - S0 <= 0` (the lender effectively buys
//!   the stock by paying `|c|`), and the optimal rule is to stop when the
//!   discounted price falls back to the cap;
//! * spot between the boundary and the cap — the fee is exactly zero and
//!   immediate redemption is optimal;
//! * spot below the boundary — the fee is `f(S0) - S0 + q > 0` and the
//!   optimal rule is to stop at the first hit of the boundary.
//!
//! Negative fees are reported verbatim, not clamped.

use serde::Serialize;

use crate::closedform::{self, Shape, ValueFunction};
use crate::error::{Error, Result};
use crate::params::{LoanTerms, MarketParams};

/// Which side of the boundary/cap the spot starts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PriceCase {
    /// `S0 >= L`.
    HighPrice,
    /// `b <= S0 < L` (or `S0 >= b` when uncapped).
    MidPrice,
    /// `S0 < b` (below the cap when the cap sits under the boundary).
    LowPrice,
}

/// Fair-fee report for one parameter set.
#[derive(Debug, Clone, Serialize)]
pub struct FairTermsReport {
    #[serde(rename = "case")]
    pub price_case: PriceCase,
    /// Fee making `f(S0) = S0 - q + c`; may be negative or zero.
    pub fair_fee: f64,
    /// Text description of the optimal stopping rule for this case.
    pub optimal_rule: String,
    /// Free boundary.
    pub b: f64,
    /// Initial value `f(S0)`.
    pub value_at_s0: f64,
}

/// Computes the fair service fee and classifies the negotiation case.
pub fn fair_fee(
    market: &MarketParams,
    q: f64,
    gamma: f64,
    cap: Option<f64>,
    s0: f64,
) -> Result<FairTermsReport> {
    // The fee is the unknown here, so validation covers fields and regime
    // but not the no-arbitrage inequality on the input fee.
    let terms = LoanTerms { q, gamma, c: 0.0, cap, s0 };
    let vf = closedform::build(market, &terms)?;
    Ok(report_from_value_function(&vf, s0))
}

fn report_from_value_function(vf: &ValueFunction, s0: f64) -> FairTermsReport {
    let value_at_s0 = vf.value(s0).expect("validated spot");
    let price_case = match vf.shape {
        Shape::CapAboveB => {
            let cap = vf.cap.expect("capped");
            if s0 >= cap {
                PriceCase::HighPrice
            } else if s0 >= vf.b {
                PriceCase::MidPrice
            } else {
                PriceCase::LowPrice
            }
        }
        Shape::CapBelowB => {
            let cap = vf.cap.expect("capped");
            if s0 >= cap {
                PriceCase::HighPrice
            } else {
                PriceCase::LowPrice
            }
        }
        Shape::Uncapped => {
            if s0 >= vf.b {
                PriceCase::MidPrice
            } else {
                PriceCase::LowPrice
            }
        }
    };
    // In the mid band f(S0) = S0 - q, so the fee is zero exactly; elsewhere
    // the identity c = f(S0) - S0 + q is evaluated as written.
    let fair_fee = match price_case {
        PriceCase::MidPrice => 0.0,
        _ => value_at_s0 - s0 + vf.q,
    };
    let optimal_rule = match price_case {
        PriceCase::HighPrice => {
            "stop when the discounted price first falls to the cap".to_string()
        }
        PriceCase::MidPrice => {
            "redeem immediately; the spot already sits in the exercise band".to_string()
        }
        PriceCase::LowPrice => match vf.shape {
            Shape::CapBelowB => {
                "stop when the discounted price first reaches the cap".to_string()
            }
            _ => format!(
                "stop when the discounted price first reaches the boundary b = {:.6}",
                vf.b
            ),
        },
    };
    FairTermsReport { price_case, fair_fee, optimal_rule, b: vf.b, value_at_s0 }
}

/// Which loan term to solve for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeParameter {
    Principal,
    LoanRate,
    Cap,
}

/// Solves `fair_fee(param) = target_fee` for one free parameter with the
/// others held fixed: a sign-change scan over the admissible range
/// followed by bisection to `1e-8` absolute on the fee.
pub fn solve_parameter(
    market: &MarketParams,
    terms: &LoanTerms,
    free: FreeParameter,
    target_fee: f64,
) -> Result<f64> {
    const FEE_TOL: f64 = 1e-8;
    const SCAN_POINTS: usize = 512;

    let eval = |p: f64| -> Option<f64> {
        let t = substituted(terms, free, p);
        fair_fee(market, t.q, t.gamma, t.cap, t.s0)
            .ok()
            .map(|rep| rep.fair_fee - target_fee)
    };

    let (lo, hi, geometric) = scan_range(market, terms, free)?;
    let point = |i: usize| -> f64 {
        let w = i as f64 / (SCAN_POINTS - 1) as f64;
        if geometric {
            (lo.ln() + w * (hi.ln() - lo.ln())).exp()
        } else {
            lo + w * (hi - lo)
        }
    };

    let mut prev: Option<(f64, f64)> = None;
    let mut bracket = None;
    for i in 0..SCAN_POINTS {
        let p = point(i);
        let Some(g) = eval(p) else { continue };
        if g == 0.0 {
            bracket = Some((p, p));
            break;
        }
        if let Some((pp, gg)) = prev {
            if gg * g < 0.0 {
                bracket = Some((pp, p));
                break;
            }
        }
        prev = Some((p, g));
    }
    let (mut a, mut b) = bracket.ok_or_else(|| {
        Error::NoBracket(format!(
            "fair fee never crosses {target_fee} for {free:?} in [{lo:.6e}, {hi:.6e}]"
        ))
    })?;

    let mut root = 0.5 * (a + b);
    for _ in 0..200 {
        root = 0.5 * (a + b);
        let Some(g) = eval(root) else { break };
        if g.abs() <= FEE_TOL {
            break;
        }
        let ga = eval(a).unwrap_or(f64::NAN);
        if ga * g <= 0.0 {
            b = root;
        } else {
            a = root;
        }
    }

    // The root must re-validate the regime and field invariants.
    let solved = substituted(terms, free, root);
    crate::params::classify(market, &solved)?;
    Ok(root)
}

fn substituted(terms: &LoanTerms, free: FreeParameter, p: f64) -> LoanTerms {
    match free {
        FreeParameter::Principal => LoanTerms { q: p, ..*terms },
        FreeParameter::LoanRate => LoanTerms { gamma: p, ..*terms },
        FreeParameter::Cap => LoanTerms { cap: Some(p), ..*terms },
    }
}

/// Admissible scan interval for each free parameter, and whether to scan
/// geometrically.
fn scan_range(
    market: &MarketParams,
    terms: &LoanTerms,
    free: FreeParameter,
) -> Result<(f64, f64, bool)> {
    Ok(match free {
        FreeParameter::Principal => {
            let hi = match terms.cap {
                Some(cap) => cap * (1.0 - 1e-9),
                None => 100.0 * terms.s0.max(terms.q),
            };
            (1e-6 * terms.s0.min(hi), hi, true)
        }
        FreeParameter::LoanRate => {
            let lo = if market.delta > 0.0 {
                market.r
            } else {
                market.r + market.sigma * market.sigma / 2.0 + 1e-9
            };
            (lo, lo + 2.0, false)
        }
        FreeParameter::Cap => (terms.q * (1.0 + 1e-9), terms.q * 1e8, true),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Independent 40-digit evaluation of (L-q)(S0/L)^{lambda2} + q - S0
    // at S0 = 300, L = 240.
    const FEE_S0_300: f64 = -40.83265674422698065495;

    fn market() -> MarketParams {
        MarketParams { r: 0.05, sigma: 0.15, delta: 0.01 }
    }

    #[test]
    fn mid_price_fee_is_exactly_zero() {
        let rep = fair_fee(&market(), 100.0, 0.07, Some(240.0), 200.0).unwrap();
        assert_eq!(rep.price_case, PriceCase::MidPrice);
        assert_eq!(rep.fair_fee, 0.0);
        assert_abs_diff_eq!(rep.value_at_s0, 100.0, epsilon = 1e-12);
    }

    #[test]
    fn high_price_fee_matches_formula_and_is_nonpositive() {
        let rep = fair_fee(&market(), 100.0, 0.07, Some(240.0), 300.0).unwrap();
        assert_eq!(rep.price_case, PriceCase::HighPrice);
        assert!(rep.fair_fee <= 0.0);
        assert_abs_diff_eq!(rep.fair_fee, FEE_S0_300, epsilon = 1e-10);
        // Identity c = f(S0) - S0 + q.
        assert_abs_diff_eq!(
            rep.fair_fee,
            rep.value_at_s0 - 300.0 + 100.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn low_price_fee_is_the_initial_value_shift() {
        let rep = fair_fee(&market(), 100.0, 0.07, Some(240.0), 100.0).unwrap();
        assert_eq!(rep.price_case, PriceCase::LowPrice);
        // s0 = q makes the fee equal f(s0) itself.
        assert_abs_diff_eq!(rep.fair_fee, rep.value_at_s0, epsilon = 1e-12);
        assert!(rep.fair_fee > 0.0);
        // No-arbitrage comes out automatically: s0 - q + c = f(s0) > 0.
        assert!(100.0 - 100.0 + rep.fair_fee > 0.0);
    }

    #[test]
    fn fee_continuous_at_case_boundaries() {
        let m = market();
        // Across s0 = b: LowPrice fee -> 0.
        let b = closedform::build(&m, &LoanTerms {
            q: 100.0, gamma: 0.07, c: 0.0, cap: Some(240.0), s0: 150.0,
        })
        .unwrap()
        .b;
        let at_b = fair_fee(&m, 100.0, 0.07, Some(240.0), b).unwrap();
        assert_eq!(at_b.price_case, PriceCase::MidPrice);
        assert_eq!(at_b.fair_fee, 0.0);
        let just_below = fair_fee(&m, 100.0, 0.07, Some(240.0), b * (1.0 - 1e-9)).unwrap();
        assert_eq!(just_below.price_case, PriceCase::LowPrice);
        assert!(just_below.fair_fee.abs() < 1e-6);
        // Across s0 = L: MidPrice 0 -> HighPrice formula, both zero at L.
        let at_cap = fair_fee(&m, 100.0, 0.07, Some(240.0), 240.0).unwrap();
        assert_eq!(at_cap.price_case, PriceCase::HighPrice);
        assert_abs_diff_eq!(at_cap.fair_fee, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cap_below_boundary_uses_same_identity() {
        let rep = fair_fee(&market(), 100.0, 0.07, Some(120.0), 100.0).unwrap();
        assert_eq!(rep.price_case, PriceCase::LowPrice);
        let vf = closedform::build(&market(), &LoanTerms {
            q: 100.0, gamma: 0.07, c: 0.0, cap: Some(120.0), s0: 100.0,
        })
        .unwrap();
        assert_abs_diff_eq!(
            rep.fair_fee,
            vf.value(100.0).unwrap() - 100.0 + 100.0,
            epsilon = 1e-12
        );
        assert!(rep.optimal_rule.contains("cap"));
    }

    #[test]
    fn uncapped_has_no_high_price_case() {
        let rep = fair_fee(&market(), 100.0, 0.07, None, 500.0).unwrap();
        assert_eq!(rep.price_case, PriceCase::MidPrice);
        assert_eq!(rep.fair_fee, 0.0);
    }

    #[test]
    fn solve_parameter_round_trips() {
        let m = market();
        let terms = LoanTerms { q: 100.0, gamma: 0.07, c: 0.0, cap: Some(240.0), s0: 100.0 };
        let target = fair_fee(&m, 100.0, 0.07, Some(240.0), 100.0).unwrap().fair_fee;

        let q = solve_parameter(&m, &terms, FreeParameter::Principal, target).unwrap();
        assert_abs_diff_eq!(q, 100.0, epsilon = 1e-4);

        let gamma = solve_parameter(&m, &terms, FreeParameter::LoanRate, target).unwrap();
        assert_abs_diff_eq!(gamma, 0.07, epsilon = 1e-6);

        let cap = solve_parameter(&m, &terms, FreeParameter::Cap, target).unwrap();
        let back = fair_fee(&m, 100.0, 0.07, Some(cap), 100.0).unwrap().fair_fee;
        assert_abs_diff_eq!(back, target, epsilon = 1e-7);
    }

    #[test]
    fn fee_nondecreasing_in_cap_toward_uncapped() {
        let m = market();
        let uncapped = fair_fee(&m, 100.0, 0.07, None, 100.0).unwrap().fair_fee;
        let mut prev = f64::NEG_INFINITY;
        for cap in [130.0, 150.0, 200.0, 400.0, 1600.0, 1e6] {
            let fee = fair_fee(&m, 100.0, 0.07, Some(cap), 100.0).unwrap().fair_fee;
            assert!(fee >= prev - 1e-12, "cap {cap}: fee {fee} < {prev}");
            assert!(fee <= uncapped + 1e-12);
            prev = fee;
        }
        assert_abs_diff_eq!(prev, uncapped, epsilon = 1e-6);
    }

    #[test]
    fn unreachable_target_reports_no_bracket() {
        let m = market();
        let terms = LoanTerms { q: 100.0, gamma: 0.07, c: 0.0, cap: Some(240.0), s0: 100.0 };
        let uncapped = fair_fee(&m, 100.0, 0.07, None, 100.0).unwrap().fair_fee;
        // No cap can push the fee past the uncapped fee.
        let err =
            solve_parameter(&m, &terms, FreeParameter::Cap, uncapped + 5.0).unwrap_err();
        assert!(matches!(err, Error::NoBracket(_)), "{err:?}");
    }
}
