//! Fair service fees across the negotiation cases, plus parameter
//! inversion.
//!
//! ```bash
//! cargo run --release -p stockloan --example fair_terms
//! ```

use stockloan::fairterms::{self, FreeParameter};
use stockloan::params::{LoanTerms, MarketParams};

fn main() {
    let market = MarketParams { r: 0.05, sigma: 0.15, delta: 0.01 };
    let (q, gamma, cap) = (100.0, 0.07, Some(240.0));

    println!("{:>8}  {:>10}  {:>12}  rule", "spot", "case", "fair fee");
    for s0 in [100.0, 130.0, 147.0, 160.0, 200.0, 240.0, 300.0] {
        let rep = fairterms::fair_fee(&market, q, gamma, cap, s0).unwrap();
        println!(
            "{s0:>8.1}  {:>10}  {:>12.6}  {}",
            format!("{:?}", rep.price_case),
            rep.fair_fee,
            rep.optimal_rule
        );
    }
    println!();
    println!("negative fees above the cap are the lender buying the stock;");
    println!("between the boundary and the cap the fair fee is exactly zero.");
    println!();

    // Invert: what principal would justify a 20-currency fee at spot 100?
    let terms = LoanTerms { q, gamma, c: 0.0, cap, s0: 100.0 };
    let target = 20.0;
    let principal =
        fairterms::solve_parameter(&market, &terms, FreeParameter::Principal, target).unwrap();
    let check = fairterms::fair_fee(&market, principal, gamma, cap, 100.0).unwrap();
    println!("principal with fair fee {target}: q = {principal:.6} (fee back-out {:.8})", check.fair_fee);

    // And which loan rate prices the same fee at the original principal?
    let rate = fairterms::solve_parameter(&market, &terms, FreeParameter::LoanRate, target).unwrap();
    let check = fairterms::fair_fee(&market, q, rate, cap, 100.0).unwrap();
    println!("loan rate with fair fee {target}: gamma = {rate:.6} (fee back-out {:.8})", check.fair_fee);
}
