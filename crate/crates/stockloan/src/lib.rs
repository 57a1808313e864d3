//! Valuation toolkit for stock loans and capped stock loans.
//!
//! A stock loan lends amount `q` against one share of stock; the borrower
//! may redeem the share at any time by repaying `q e^{gamma t}` or walk
//! away. A cap `L` limits the redemption payoff to `L e^{gamma t}`.
//! Discounted, the contract is a perpetual American claim with nonpositive
//! effective rate `r - gamma`, which this crate prices in closed form and
//! re-verifies with three independent numerical engines:
//!
//! * [`closedform`] — characteristic exponents, the free boundary
//!   `b = q lambda1 / (lambda1 - 1)`, and the exact piecewise value function;
//! * [`lcpsolver`] — a finite-difference linear-complementarity solver
//!   (projected SOR) for the same variational inequality;
//! * [`simulate`] — hitting-time Monte Carlo with Brownian-bridge barrier
//!   correction, a parametric threshold-strategy valuer, and a binomial
//!   lattice for the optimal-stopping problem;
//! * [`fairterms`] — the fair service fee and single-parameter inversions;
//! * [`cli`] — the `price` / `curve` / `verify` / `fair` / `regime-check`
//!   command-line front end (see `src/main.rs` for the thin binary).
//!
//! Start with the runnable examples (`cargo run --release -p stockloan
//! --example closed_form_pricing`); each one exercises a single capability.

pub mod cli;
pub mod closedform;
mod error;
pub mod fairterms;
pub mod lcpsolver;
pub mod params;
pub mod simulate;

pub use error::{Error, Result};
