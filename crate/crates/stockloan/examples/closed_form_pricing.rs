//! Prices a capped stock loan in closed form.
//!
//! Builds the piecewise value function, prints the characteristic
//! exponents and the free boundary, and evaluates the value across the
//! three branches.
//!
//! ```bash
//! cargo run --release -p stockloan --example closed_form_pricing
//! ```

use stockloan::closedform;
use stockloan::params::{LoanTerms, MarketParams};

fn main() {
    let market = MarketParams { r: 0.05, sigma: 0.15, delta: 0.01 };
    let terms = LoanTerms { q: 100.0, gamma: 0.07, c: 0.0, cap: Some(240.0), s0: 150.0 };

    let vf = closedform::build(&market, &terms).unwrap();
    println!("regime        {:?}", vf.exponents.regime.tag);
    println!("r_tilde       {:+.4}", vf.exponents.regime.r_tilde);
    println!("mu            {:+.6}", vf.exponents.mu);
    println!("lambda1       {:.6}", vf.exponents.lambda1);
    println!("lambda2       {:.6}", vf.exponents.lambda2);
    println!("boundary b    {:.4}", vf.b);
    println!("shape         {:?}", vf.shape);
    println!();

    println!("{:>8}  {:>12}  {:>12}  {:>10}", "spot", "value", "payoff", "slope");
    for x in [0.0, 50.0, 100.0, vf.b, 180.0, 240.0, 300.0, 500.0] {
        let value = vf.value(x).unwrap();
        let payoff = vf.payoff(x);
        let slope = if x > 0.0 {
            match vf.derivative(x) {
                Ok(s) => format!("{s:.6}"),
                Err(_) => "kink".to_string(), // two-valued at the cap
            }
        } else {
            "-".to_string()
        };
        println!("{x:>8.2}  {value:>12.6}  {payoff:>12.6}  {slope:>10}");
    }
    println!();

    // The value process compounds the initial value function forward.
    let t = 5.0;
    let s_t = 180.0;
    println!(
        "value process at t = {t}, S_t = {s_t}: {:.6}",
        vf.value_process(t, s_t).unwrap()
    );
    println!("report: {}", vf.report_json());
}
