//! Command-line front end.
//!
//! One command per invocation:
//!
//! ```text
//!   stockloan price        <config> --x <price>
//!   stockloan curve        <config> --x-max <price> --points <n> --out <path>
//!   stockloan verify       <config> --x <price> [--mc-paths <n>] [--lattice-steps <n>] [--seed <n>]
//!   stockloan fair         <config>
//!   stockloan regime-check <config>
//! ```
//!
//! Configs are flat `key = value` files with `#` comments and keys
//! `r, sigma, delta, gamma, q, c, s0` plus the optional `cap`.
//!
//! Exit codes: 0 on success, 2 on parameter/regime/config errors, 3 when a
//! `verify` tolerance gate fails. Every error path writes a single line
//! `error: <kind>: <message>` to stderr. All numbers are printed with 12
//! significant digits so outputs are byte-deterministic for fixed inputs.

use std::collections::BTreeMap;
use std::io::Write;

use crate::closedform;
use crate::error::{Error, Result};
use crate::fairterms;
use crate::lcpsolver::{self, PsorSettings};
use crate::params::{self, LoanTerms, MarketParams, RegimeTag};
use crate::simulate::{self, McEstimate, PathConfig};

/// Formats a number with 12 significant digits in scientific notation,
/// the fixed format for all numeric CLI and CSV output.
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.11e}")
}

const USAGE: &str = "usage: stockloan <command> <config> [flags]
commands:
  price        <config> --x <price>
  curve        <config> --x-max <price> --points <n> --out <path>
  verify       <config> --x <price> [--mc-paths <n>] [--lattice-steps <n>] [--seed <n>]
  fair         <config>
  regime-check <config>";

/// Runs the CLI against `args` (program name excluded); returns the exit
/// code and writes to the supplied streams, so tests can drive it
/// directly.
pub fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match dispatch(args, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", e.kind());
            if args.is_empty() {
                let _ = writeln!(err, "{USAGE}");
            }
            2
        }
    }
}

fn dispatch(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let Some(command) = args.first() else {
        return Err(Error::Config("no command given".to_string()));
    };
    let Some(config_path) = args.get(1) else {
        return Err(Error::Config(format!("missing config path for `{command}`")));
    };
    let flags = parse_flags(&args[2..], allowed_flags(command)?)?;
    let (market, terms) = load_config(config_path)?;

    match command.as_str() {
        "price" => cmd_price(&market, &terms, &flags, out),
        "curve" => cmd_curve(&market, &terms, &flags, out),
        "verify" => cmd_verify(&market, &terms, &flags, out, err),
        "fair" => cmd_fair(&market, &terms, out),
        "regime-check" => cmd_regime_check(&market, &terms, out),
        other => Err(Error::Config(format!("unknown command `{other}`"))),
    }
}

fn allowed_flags(command: &str) -> Result<&'static [&'static str]> {
    Ok(match command {
        "price" => &["--x"],
        "curve" => &["--x-max", "--points", "--out"],
        "verify" => &["--x", "--mc-paths", "--lattice-steps", "--seed"],
        "fair" | "regime-check" => &[],
        other => return Err(Error::Config(format!("unknown command `{other}`"))),
    })
}

fn parse_flags(args: &[String], allowed: &[&str]) -> Result<BTreeMap<String, String>> {
    let mut flags = BTreeMap::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let (name, inline_value) = match arg.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (arg.clone(), None),
        };
        if !allowed.contains(&name.as_str()) {
            return Err(Error::Config(format!("unknown flag `{name}`")));
        }
        let value = match inline_value {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| Error::Config(format!("flag `{name}` needs a value")))?
                .clone(),
        };
        if flags.insert(name.clone(), value).is_some() {
            return Err(Error::Config(format!("duplicate flag `{name}`")));
        }
    }
    Ok(flags)
}

fn load_config(path: &str) -> Result<(MarketParams, LoanTerms)> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.to_string(), source })?;
    params::parse_config(&text)
}

fn flag_f64(flags: &BTreeMap<String, String>, name: &str) -> Result<Option<f64>> {
    flags
        .get(name)
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("flag `{name}`: invalid number `{v}`")))
        })
        .transpose()
}

fn flag_usize(flags: &BTreeMap<String, String>, name: &str) -> Result<Option<usize>> {
    flags
        .get(name)
        .map(|v| {
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("flag `{name}`: invalid count `{v}`")))
        })
        .transpose()
}

fn require_f64(flags: &BTreeMap<String, String>, name: &str) -> Result<f64> {
    flag_f64(flags, name)?
        .ok_or_else(|| Error::Config(format!("missing required flag `{name}`")))
}

fn regime_name(tag: RegimeTag) -> &'static str {
    match tag {
        RegimeTag::DividendRegime => "DividendRegime",
        RegimeTag::ZeroDividendRegime => "ZeroDividendRegime",
    }
}

// --------------------------------------------------------------------------
// price
// --------------------------------------------------------------------------

fn cmd_price(
    market: &MarketParams,
    terms: &LoanTerms,
    flags: &BTreeMap<String, String>,
    out: &mut dyn Write,
) -> Result<i32> {
    let x = require_f64(flags, "--x")?;
    params::validate(market, terms)?;
    let vf = closedform::build(market, terms)?;
    let value = vf.value(x)?;
    let _ = writeln!(out, "f = {}", fmt_sig(value));
    let _ = writeln!(out, "b = {}", fmt_sig(vf.b));
    let _ = writeln!(out, "lambda1 = {}", fmt_sig(vf.exponents.lambda1));
    let _ = writeln!(out, "lambda2 = {}", fmt_sig(vf.exponents.lambda2));
    let _ = writeln!(out, "regime = {}", regime_name(vf.exponents.regime.tag));
    let _ = writeln!(out, "shape = {:?}", vf.shape);
    Ok(0)
}

// --------------------------------------------------------------------------
// curve
// --------------------------------------------------------------------------

fn cmd_curve(
    market: &MarketParams,
    terms: &LoanTerms,
    flags: &BTreeMap<String, String>,
    out: &mut dyn Write,
) -> Result<i32> {
    let x_max = require_f64(flags, "--x-max")?;
    let points = flag_usize(flags, "--points")?
        .ok_or_else(|| Error::Config("missing required flag `--points`".to_string()))?;
    let path = flags
        .get("--out")
        .ok_or_else(|| Error::Config("missing required flag `--out`".to_string()))?;
    if !(x_max > 0.0) {
        return Err(Error::Config(format!("--x-max must be > 0, got {x_max}")));
    }
    if points < 2 {
        return Err(Error::Config(format!("--points must be >= 2, got {points}")));
    }
    params::validate(market, terms)?;
    let vf = closedform::build(market, terms)?;
    let uncapped = closedform::build(market, &LoanTerms { cap: None, ..*terms })?;

    let mut csv = String::from("x,value,payoff,uncapped_value\n");
    for i in 0..points {
        let x = x_max * i as f64 / (points - 1) as f64;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            fmt_sig(x),
            fmt_sig(vf.value(x)?),
            fmt_sig(vf.payoff(x)),
            fmt_sig(uncapped.value(x)?),
        ));
    }
    std::fs::write(path, csv)
        .map_err(|source| Error::Io { path: path.to_string(), source })?;
    let _ = writeln!(out, "wrote {points} rows to {path}");
    Ok(0)
}

// --------------------------------------------------------------------------
// verify
// --------------------------------------------------------------------------

/// Outputs of the four engines at one evaluation point.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub closed_form: f64,
    pub lcp: f64,
    pub mc: McEstimate,
    pub lattice: f64,
    pub max_abs_disagreement: f64,
}

/// Tolerance gates: LCP within 1e-3 relative, MC within 3 standard errors,
/// lattice within 1% relative. Returns the failing oracle's name.
pub fn verify_gates(report: &VerifyReport) -> std::result::Result<(), String> {
    let scale = report.closed_form.abs().max(1e-12);
    let lcp_rel = (report.lcp - report.closed_form).abs() / scale;
    if lcp_rel > 1e-3 {
        return Err(format!(
            "lcp gate failed: relative deviation {lcp_rel:.3e} > 1e-3"
        ));
    }
    let mc_dev = (report.mc.mean - report.closed_form).abs();
    if mc_dev > 3.0 * report.mc.stderr + 1e-12 {
        return Err(format!(
            "mc gate failed: |{:.6e} - {:.6e}| = {mc_dev:.3e} > 3 stderr = {:.3e}",
            report.mc.mean,
            report.closed_form,
            3.0 * report.mc.stderr
        ));
    }
    let lattice_rel = (report.lattice - report.closed_form).abs() / scale;
    if lattice_rel > 0.01 {
        return Err(format!(
            "lattice gate failed: relative deviation {lattice_rel:.3e} > 1e-2"
        ));
    }
    Ok(())
}

/// Runs the closed form, the LCP solver, the threshold-at-`b` Monte Carlo,
/// and the lattice at the evaluation price `x`.
pub fn run_verification(
    market: &MarketParams,
    terms: &LoanTerms,
    x: f64,
    mc_paths: usize,
    lattice_steps: usize,
    seed: u64,
) -> Result<VerifyReport> {
    let vf = closedform::build(market, terms)?;
    let closed_form = vf.value(x)?;

    let at_x = LoanTerms { s0: x, ..*terms };
    let grid = lcpsolver::LogGrid::for_terms(market, &at_x, 2048)?;
    let op = lcpsolver::assemble(market, &at_x, &grid)?;
    // The tuned relaxation factor converges orders of magnitude faster
    // than the generic default at this grid size and lands on the same
    // fixed point (both are exercised in the test suite).
    let settings = PsorSettings::tuned(&op, grid.n);
    let sol = lcpsolver::psor_solve(&op, &grid.payoff, &settings)?;
    let lcp = sol.value_at(&grid, x)?;

    let mut cfg = PathConfig::standard(market, &at_x, seed);
    cfg.n_paths = mc_paths;
    let mc = simulate::threshold_strategy_value(market, &at_x, vf.b, &cfg)?;

    let lattice = simulate::lattice_value(market, &at_x, lattice_steps, 100.0)?.value;

    let max_abs_disagreement = (lcp - closed_form)
        .abs()
        .max((mc.mean - closed_form).abs())
        .max((lattice - closed_form).abs());
    Ok(VerifyReport { closed_form, lcp, mc, lattice, max_abs_disagreement })
}

fn cmd_verify(
    market: &MarketParams,
    terms: &LoanTerms,
    flags: &BTreeMap<String, String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    let x = require_f64(flags, "--x")?;
    if !(x > 0.0) {
        return Err(Error::Config(format!("--x must be > 0, got {x}")));
    }
    let mc_paths = flag_usize(flags, "--mc-paths")?.unwrap_or(100_000);
    let lattice_steps = flag_usize(flags, "--lattice-steps")?.unwrap_or(20_000);
    let seed = flag_usize(flags, "--seed")?.unwrap_or(42) as u64;
    params::validate(market, terms)?;

    let report = run_verification(market, terms, x, mc_paths, lattice_steps, seed)?;
    let _ = writeln!(out, "closed_form = {}", fmt_sig(report.closed_form));
    let _ = writeln!(out, "lcp = {}", fmt_sig(report.lcp));
    let _ = writeln!(out, "mc_mean = {}", fmt_sig(report.mc.mean));
    let _ = writeln!(out, "mc_stderr = {}", fmt_sig(report.mc.stderr));
    let _ = writeln!(
        out,
        "mc_truncated_fraction = {}",
        fmt_sig(report.mc.truncated_fraction)
    );
    let _ = writeln!(out, "lattice = {}", fmt_sig(report.lattice));
    let _ = writeln!(
        out,
        "max_abs_disagreement = {}",
        fmt_sig(report.max_abs_disagreement)
    );
    let json = serde_json::json!({
        "closed_form": report.closed_form,
        "lcp": report.lcp,
        "mc": {
            "mean": report.mc.mean,
            "stderr": report.mc.stderr,
            "truncated_fraction": report.mc.truncated_fraction,
        },
        "lattice": report.lattice,
        "max_abs_disagreement": report.max_abs_disagreement,
    });
    let _ = writeln!(out, "{json}");

    match verify_gates(&report) {
        Ok(()) => Ok(0),
        Err(reason) => {
            let _ = writeln!(err, "error: verification: {reason}");
            Ok(3)
        }
    }
}

// --------------------------------------------------------------------------
// fair
// --------------------------------------------------------------------------

fn cmd_fair(market: &MarketParams, terms: &LoanTerms, out: &mut dyn Write) -> Result<i32> {
    params::classify(market, terms)?;
    let report = fairterms::fair_fee(market, terms.q, terms.gamma, terms.cap, terms.s0)?;
    let json = serde_json::to_string(&report).expect("report serializes");
    let _ = writeln!(out, "{json}");
    let _ = writeln!(out, "case          {:?}", report.price_case);
    let _ = writeln!(out, "fair_fee      {}", fmt_sig(report.fair_fee));
    let _ = writeln!(out, "b             {}", fmt_sig(report.b));
    let _ = writeln!(out, "value_at_s0   {}", fmt_sig(report.value_at_s0));
    let _ = writeln!(out, "optimal_rule  {}", report.optimal_rule);
    Ok(0)
}

// --------------------------------------------------------------------------
// regime-check
// --------------------------------------------------------------------------

fn cmd_regime_check(
    market: &MarketParams,
    terms: &LoanTerms,
    out: &mut dyn Write,
) -> Result<i32> {
    let regime = params::validate(market, terms)?;
    let _ = writeln!(out, "regime = {}", regime_name(regime.tag));
    let _ = writeln!(out, "r_tilde = {}", fmt_sig(regime.r_tilde));
    if !terms.fee_within_customary_range() {
        let _ = writeln!(
            out,
            "warning: service fee c = {} outside the customary range [0, q]",
            terms.c
        );
    }
    Ok(0)
}
