//! Finite-difference cross-check of the closed form.
//!
//! The variational inequality for the value function is discretized on a
//! uniform grid in log price `y = ln x`, where the pricing operator has
//! constant coefficients:
//!
//! ```text
//!   A h = (1/2) sigma^2 h_yy + (r_tilde - delta - sigma^2/2) h_y - r_tilde h
//! ```
//!
//! The resulting linear complementarity problem
//! `h >= payoff`, `A h <= 0`, `(h - payoff) . A h = 0` is solved with
//! projected successive over-relaxation (PSOR). The truncated domain is
//! closed with Robin rows built from the characteristic exponents —
//! `h_y = lambda1 h` at the lower edge and `h_y = lambda2 h` at the upper
//! edge — so the solver never consumes closed-form *values*: everything it
//! knows comes from the quadratic, which keeps it an independent oracle for
//! the piecewise solution.

use crate::closedform::{self, Exponents, ValueFunction};
use crate::error::{Error, Result};
use crate::params::{self, LoanTerms, MarketParams};

/// Uniform log-price grid with the per-node obstacle `(min(x, L) - q)+`.
#[derive(Debug, Clone)]
pub struct LogGrid {
    /// Node count.
    pub n: usize,
    pub y_min: f64,
    pub y_max: f64,
    /// Strictly increasing log prices.
    pub nodes: Vec<f64>,
    /// Obstacle values per node.
    pub payoff: Vec<f64>,
}

impl LogGrid {
    /// Builds a grid spanning at least `[q/8, 8 max(L, b)]` in price space
    /// with roughly `n` nodes.
    ///
    /// When a cap is present the spacing is adjusted so `ln L` lands exactly
    /// on a node: the obstacle kinks there, and letting the kink fall
    /// between nodes would degrade the scheme to first order around the cap.
    /// The realized node count can therefore differ from `n` by a node or
    /// two.
    pub fn for_terms(market: &MarketParams, terms: &LoanTerms, n: usize) -> Result<LogGrid> {
        Self::for_terms_widened(market, terms, n, 1.0)
    }

    /// Same as [`LogGrid::for_terms`] with the price span widened by
    /// `widen` on both ends (used by the domain-truncation self-test).
    pub fn for_terms_widened(
        market: &MarketParams,
        terms: &LoanTerms,
        n: usize,
        widen: f64,
    ) -> Result<LogGrid> {
        if n < 64 {
            return Err(Error::Grid(format!("grid needs at least 64 nodes, got {n}")));
        }
        if !(widen >= 1.0) {
            return Err(Error::Grid(format!("widen factor must be >= 1, got {widen}")));
        }
        let exp = closedform::exponents(market, terms)?;
        let b = closedform::boundary_b(&exp, terms.q)?;
        let top = 8.0 * widen * terms.cap.unwrap_or(b).max(b);
        let y_lo = (terms.q / (8.0 * widen)).ln();
        let y_hi = top.ln();

        let (dy, n_total) = match terms.cap {
            Some(cap) => {
                let y_cap = cap.ln();
                let dy0 = (y_hi - y_lo) / (n - 1) as f64;
                let below = (((y_cap - y_lo) / dy0).round() as usize).max(1);
                let dy = (y_cap - y_lo) / below as f64;
                let above = (((y_hi - y_cap) / dy).ceil() as usize).max(1);
                (dy, below + above + 1)
            }
            None => ((y_hi - y_lo) / (n - 1) as f64, n),
        };

        let nodes: Vec<f64> = (0..n_total).map(|i| y_lo + i as f64 * dy).collect();
        let payoff: Vec<f64> = nodes
            .iter()
            .map(|&y| {
                let x = y.exp();
                let capped = terms.cap.map_or(x, |cap| x.min(cap));
                (capped - terms.q).max(0.0)
            })
            .collect();
        Ok(LogGrid {
            n: n_total,
            y_min: y_lo,
            y_max: nodes[n_total - 1],
            nodes,
            payoff,
        })
    }

    pub fn spacing(&self) -> f64 {
        (self.y_max - self.y_min) / (self.n - 1) as f64
    }

    /// Price at node `i`.
    pub fn price(&self, i: usize) -> f64 {
        self.nodes[i].exp()
    }
}

/// Tridiagonal discretization of `M = -A` (positive diagonal), stored row
/// by row. Continuation rows satisfy `M h = 0`; the obstacle makes the
/// complementarity system `M h >= 0`, `h >= payoff`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl DiscreteOperator {
    /// Applies `M` to a vector (used by tests and residual checks).
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        assert_eq!(h.len(), n);
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * h[i];
                if i > 0 {
                    v += self.sub[i] * h[i - 1];
                }
                if i + 1 < n {
                    v += self.sup[i] * h[i + 1];
                }
                v
            })
            .collect()
    }

    /// Applies the pricing operator `A = -M` (tests compare this against
    /// analytic residuals).
    pub fn apply_pricing(&self, h: &[f64]) -> Vec<f64> {
        self.apply(h).into_iter().map(|v| -v).collect()
    }
}

/// Assembles the central-difference discretization of the pricing operator
/// on `grid`, with Robin boundary rows from the characteristic exponents
/// (`h_y = lambda1 h` below, `h_y = lambda2 h` above), eliminated through
/// ghost nodes so the matrix stays tridiagonal and second-order accurate.
pub fn assemble(
    market: &MarketParams,
    terms: &LoanTerms,
    grid: &LogGrid,
) -> Result<DiscreteOperator> {
    let regime = params::classify(market, terms)?;
    let exp = closedform::exponents(market, terms)?;
    let Exponents { lambda1, lambda2, .. } = exp;
    let sigma2 = market.sigma * market.sigma;
    let r_tilde = regime.r_tilde;
    let drift = r_tilde - market.delta - sigma2 / 2.0;
    let dy = grid.spacing();
    let n = grid.n;

    // Interior stencil of A: a h_{i-1} + d h_i + c h_{i+1}.
    let a = 0.5 * sigma2 / (dy * dy) - drift / (2.0 * dy);
    let c = 0.5 * sigma2 / (dy * dy) + drift / (2.0 * dy);
    let d = -sigma2 / (dy * dy) - r_tilde;

    // Safeguards for PSOR: the off-diagonals of M = -A must stay
    // nonpositive (cell Peclet condition) and the diagonal positive
    // (spacing fine enough that diffusion dominates the negative rate).
    if a <= 0.0 || c <= 0.0 {
        return Err(Error::Grid(format!(
            "grid spacing {dy:.3e} violates the cell Peclet condition (|drift| dy > sigma^2); refine the grid"
        )));
    }
    if -d <= 0.0 {
        return Err(Error::Grid(format!(
            "grid spacing {dy:.3e} too coarse for the negative effective rate (sigma^2/dy^2 <= -r_tilde); refine the grid"
        )));
    }

    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for i in 1..n - 1 {
        sub[i] = -a;
        diag[i] = -d;
        sup[i] = -c;
    }
    // Lower Robin row: ghost value h_{-1} = h_1 - 2 dy lambda1 h_0
    // substituted into the interior stencil at node 0.
    diag[0] = -(d - 2.0 * dy * lambda1 * a);
    sup[0] = -(a + c);
    // Upper Robin row: ghost value h_n = h_{n-2} + 2 dy lambda2 h_{n-1}.
    sub[n - 1] = -(a + c);
    diag[n - 1] = -(d + 2.0 * dy * lambda2 * c);
    if diag[0] <= 0.0 || diag[n - 1] <= 0.0 {
        return Err(Error::Grid(
            "boundary row lost its positive diagonal; refine the grid".to_string(),
        ));
    }
    Ok(DiscreteOperator { sub, diag, sup })
}

/// PSOR iteration controls.
#[derive(Debug, Clone, Copy)]
pub struct PsorSettings {
    /// Relaxation factor in (1, 2).
    pub omega: f64,
    /// Convergence tolerance on the complementarity residual, measured in
    /// value units (rows are scaled by their diagonal).
    pub tol: f64,
    pub max_iter: usize,
}

impl PsorSettings {
    /// Defaults: `omega = 1.5`, `tol = 1e-8`, `max_iter = 200 n`.
    pub fn for_grid_size(n: usize) -> Self {
        PsorSettings { omega: 1.5, tol: 1e-8, max_iter: 200 * n }
    }

    /// Near-optimal relaxation factor for the assembled operator, from the
    /// classical SOR theory for consistently ordered tridiagonal systems:
    /// `omega* = 2 / (1 + sqrt(1 - rho_J^2))` with the Jacobi radius
    /// estimated as `2 sqrt(sub sup) / diag` times the lowest-mode cosine.
    pub fn tuned(op: &DiscreteOperator, n: usize) -> Self {
        let mut rho: f64 = 0.0;
        for i in 1..n.saturating_sub(1) {
            let offdiag = (op.sub[i] * op.sup[i]).abs().sqrt();
            rho = rho.max(2.0 * offdiag / op.diag[i]);
        }
        let rho = (rho * (std::f64::consts::PI / n as f64).cos()).min(1.0 - 1e-12);
        let omega = (2.0 / (1.0 + (1.0 - rho * rho).max(0.0).sqrt())).clamp(1.0 + 1e-6, 2.0 - 1e-6);
        PsorSettings { omega, ..Self::for_grid_size(n) }
    }
}

/// Solution of the discretized complementarity problem.
#[derive(Debug, Clone)]
pub struct LcpSolution {
    /// Per-node values.
    pub values: Vec<f64>,
    /// PSOR sweeps performed.
    pub iterations: usize,
    /// Final complementarity residual (value units).
    pub residual: f64,
    /// Relaxation factor used.
    pub omega: f64,
}

/// Scaled complementarity residual: rows are divided by their diagonal so
/// the residual is commensurate with `h - payoff`.
fn complementarity_residual(op: &DiscreteOperator, h: &[f64], payoff: &[f64]) -> f64 {
    let n = h.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut mh = op.diag[i] * h[i];
        if i > 0 {
            mh += op.sub[i] * h[i - 1];
        }
        if i + 1 < n {
            mh += op.sup[i] * h[i + 1];
        }
        let g = mh / op.diag[i];
        let slack = h[i] - payoff[i];
        worst = worst.max(-g).max(g.min(slack));
    }
    worst
}

/// Solves `M h >= 0`, `h >= payoff`, complementarity, by projected SOR
/// sweeps starting from the obstacle.
pub fn psor_solve(
    op: &DiscreteOperator,
    payoff: &[f64],
    settings: &PsorSettings,
) -> Result<LcpSolution> {
    let n = op.diag.len();
    if payoff.len() != n {
        return Err(Error::Config(format!(
            "payoff length {} does not match operator size {n}",
            payoff.len()
        )));
    }
    if !(settings.omega > 1.0 && settings.omega < 2.0) {
        return Err(Error::Config(format!(
            "relaxation factor must lie in (1, 2), got {}",
            settings.omega
        )));
    }
    let omega = settings.omega;
    let inv_diag: Vec<f64> = op.diag.iter().map(|d| 1.0 / d).collect();
    let mut h = payoff.to_vec();

    // The residual pass costs one extra sweep; amortize it.
    const CHECK_EVERY: usize = 32;
    let mut sweeps = 0;
    let mut residual = f64::INFINITY;
    while sweeps < settings.max_iter {
        for _ in 0..CHECK_EVERY.min(settings.max_iter - sweeps) {
            // i = 0 row.
            let gs0 = -op.sup[0] * h[1] * inv_diag[0];
            h[0] = (h[0] + omega * (gs0 - h[0])).max(payoff[0]);
            for i in 1..n - 1 {
                let gs = -(op.sub[i] * h[i - 1] + op.sup[i] * h[i + 1]) * inv_diag[i];
                h[i] = (h[i] + omega * (gs - h[i])).max(payoff[i]);
            }
            let gs_last = -op.sub[n - 1] * h[n - 2] * inv_diag[n - 1];
            h[n - 1] = (h[n - 1] + omega * (gs_last - h[n - 1])).max(payoff[n - 1]);
            sweeps += 1;
        }
        residual = complementarity_residual(op, &h, payoff);
        if residual <= settings.tol {
            return Ok(LcpSolution { values: h, iterations: sweeps, residual, omega });
        }
    }
    Err(Error::NonConvergence { iterations: sweeps, residual })
}

impl LcpSolution {
    /// Piecewise-linear interpolation in log price; errors outside the span.
    pub fn value_at(&self, grid: &LogGrid, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("price must be > 0, got {x}")));
        }
        let y = x.ln();
        if y < grid.y_min || y > grid.y_max {
            return Err(Error::Domain(format!(
                "price {x} outside the grid span [{:.6e}, {:.6e}]",
                grid.y_min.exp(),
                grid.y_max.exp()
            )));
        }
        let dy = grid.spacing();
        let pos = (y - grid.y_min) / dy;
        let i = (pos.floor() as usize).min(grid.n - 2);
        let w = pos - i as f64;
        Ok(self.values[i] * (1.0 - w) + self.values[i + 1] * w)
    }

    /// Smallest grid price (at or below the cap, where the obstacle can
    /// bind) at which the solution touches the obstacle with a positive
    /// payoff — the discrete analogue of the free boundary.
    pub fn exercise_boundary(&self, grid: &LogGrid, cap: Option<f64>) -> Option<f64> {
        let contact_tol = 1e-7 * (1.0 + grid.payoff.iter().cloned().fold(0.0, f64::max));
        for i in 0..grid.n {
            let x = grid.price(i);
            if let Some(cap) = cap {
                if x > cap * (1.0 + 1e-12) {
                    break;
                }
            }
            if grid.payoff[i] > 0.0 && self.values[i] - grid.payoff[i] <= contact_tol {
                return Some(x);
            }
        }
        None
    }

    /// CSV dump `x,h_lcp,h_closed,payoff` for diffing against a closed form.
    pub fn to_csv(&self, grid: &LogGrid, vf: &ValueFunction) -> String {
        let mut out = String::from("x,h_lcp,h_closed,payoff\n");
        for i in 0..grid.n {
            let x = grid.price(i);
            let closed = vf.value(x).unwrap_or(f64::NAN);
            out.push_str(&format!(
                "{},{},{},{}\n",
                crate::cli::fmt_sig(x),
                crate::cli::fmt_sig(self.values[i]),
                crate::cli::fmt_sig(closed),
                crate::cli::fmt_sig(grid.payoff[i])
            ));
        }
        out
    }
}

/// Convenience wrapper: grid + assemble + solve with given settings.
pub fn solve_for_terms(
    market: &MarketParams,
    terms: &LoanTerms,
    n: usize,
    settings: Option<PsorSettings>,
) -> Result<(LogGrid, LcpSolution)> {
    let grid = LogGrid::for_terms(market, terms, n)?;
    let op = assemble(market, terms, &grid)?;
    let settings = settings.unwrap_or_else(|| PsorSettings::for_grid_size(grid.n));
    let sol = psor_solve(&op, &grid.payoff, &settings)?;
    Ok((grid, sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn market() -> MarketParams {
        MarketParams { r: 0.05, sigma: 0.15, delta: 0.01 }
    }

    fn terms(cap: Option<f64>) -> LoanTerms {
        LoanTerms { q: 100.0, gamma: 0.07, c: 0.0, cap, s0: 150.0 }
    }

    #[test]
    fn grid_spans_and_aligns_cap() {
        let t = terms(Some(240.0));
        let grid = LogGrid::for_terms(&market(), &t, 256).unwrap();
        assert!(grid.y_min <= (100.0f64 / 8.0).ln() + 1e-12);
        assert!(grid.y_max >= (8.0f64 * 240.0).ln() - 1e-12);
        assert!(grid.n >= 64);
        // ln(cap) must be a node.
        let dy = grid.spacing();
        let pos = (240.0f64.ln() - grid.y_min) / dy;
        assert!((pos - pos.round()).abs() < 1e-9, "cap off-node by {}", pos - pos.round());
        // Uniform spacing.
        for w in grid.nodes.windows(2) {
            assert_abs_diff_eq!(w[1] - w[0], dy, epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_rejects_tiny_node_count() {
        assert!(LogGrid::for_terms(&market(), &terms(None), 32).is_err());
    }

    #[test]
    fn operator_on_constant_gives_negative_rate() {
        let t = terms(Some(240.0));
        let grid = LogGrid::for_terms(&market(), &t, 256).unwrap();
        let op = assemble(&market(), &t, &grid).unwrap();
        let ones = vec![1.0; grid.n];
        let a_one = op.apply_pricing(&ones);
        let r_tilde = -0.02;
        for i in 1..grid.n - 1 {
            assert_abs_diff_eq!(a_one[i], -r_tilde, epsilon = 1e-9);
        }
    }

    #[test]
    fn operator_annihilates_characteristic_powers_at_second_order() {
        // A e^{lambda y} -> 0 with O(dy^2) residual; halving dy quarters it.
        let t = terms(Some(240.0));
        let exp = closedform::exponents(&market(), &t).unwrap();
        let mut worst = Vec::new();
        for n in [257usize, 513] {
            let grid = LogGrid::for_terms(&market(), &t, n).unwrap();
            let op = assemble(&market(), &t, &grid).unwrap();
            let mut here: f64 = 0.0;
            for lambda in [exp.lambda1, exp.lambda2] {
                let h: Vec<f64> = grid.nodes.iter().map(|&y| (lambda * y).exp()).collect();
                let res = op.apply_pricing(&h);
                for i in 1..grid.n - 1 {
                    here = here.max((res[i] / h[i]).abs());
                }
            }
            worst.push(here);
        }
        let ratio = worst[0] / worst[1];
        assert!(
            (2.5..6.0).contains(&ratio),
            "expected ~4x residual drop on refinement, got {ratio} ({worst:?})"
        );
    }

    #[test]
    fn zero_payoff_solves_to_zero() {
        let t = terms(Some(240.0));
        let grid = LogGrid::for_terms(&market(), &t, 128).unwrap();
        let op = assemble(&market(), &t, &grid).unwrap();
        let zero = vec![0.0; grid.n];
        let sol = psor_solve(&op, &zero, &PsorSettings::for_grid_size(grid.n)).unwrap();
        assert!(sol.values.iter().all(|&v| v == 0.0));
        assert!(sol.residual <= 1e-8);
    }

    #[test]
    fn omega_outside_range_rejected() {
        let t = terms(Some(240.0));
        let grid = LogGrid::for_terms(&market(), &t, 128).unwrap();
        let op = assemble(&market(), &t, &grid).unwrap();
        for omega in [0.5, 1.0, 2.0] {
            let s = PsorSettings { omega, ..PsorSettings::for_grid_size(grid.n) };
            assert!(psor_solve(&op, &grid.payoff, &s).is_err(), "omega {omega}");
        }
    }

    #[test]
    fn solution_matches_closed_form_coarse() {
        for cap in [Some(240.0), Some(120.0)] {
            let t = terms(cap);
            let (grid, sol) = solve_for_terms(&market(), &t, 512, None).unwrap();
            let vf = closedform::build(&market(), &t).unwrap();
            let mut worst: f64 = 0.0;
            for i in 1..grid.n - 1 {
                let x = grid.price(i);
                let exact = vf.value(x).unwrap();
                worst = worst.max((sol.values[i] - exact).abs() / exact.max(1e-12));
            }
            assert!(worst < 5e-3, "cap {cap:?}: relative deviation {worst}");
            // Obstacle respected exactly as stored.
            for i in 0..grid.n {
                assert!(sol.values[i] >= grid.payoff[i]);
            }
        }
    }

    #[test]
    fn interpolation_at_knots_and_midpoints() {
        let t = terms(Some(240.0));
        let (grid, sol) = solve_for_terms(&market(), &t, 256, None).unwrap();
        let i = grid.n / 2;
        assert_abs_diff_eq!(sol.value_at(&grid, grid.price(i)).unwrap(), sol.values[i]);
        // Geometric midpoint of adjacent nodes averages the node values.
        let mid = (grid.price(i) * grid.price(i + 1)).sqrt();
        assert_abs_diff_eq!(
            sol.value_at(&grid, mid).unwrap(),
            0.5 * (sol.values[i] + sol.values[i + 1]),
            epsilon = 1e-9
        );
        // The free boundary is off-grid; the interpolated value there must
        // match the smooth-fit value b - q.
        let vf = closedform::build(&market(), &t).unwrap();
        let at_b = sol.value_at(&grid, vf.b).unwrap();
        assert!(
            (at_b - (vf.b - 100.0)).abs() / (vf.b - 100.0) < 1e-3,
            "value at b: {at_b} vs {}",
            vf.b - 100.0
        );
        assert!(sol.value_at(&grid, 1e-9).is_err());
        assert!(sol.value_at(&grid, 1e12).is_err());
    }

    #[test]
    fn free_boundary_recovery_refines_toward_b() {
        let t = terms(Some(240.0));
        let vf = closedform::build(&market(), &t).unwrap();
        let mut errs = Vec::new();
        for n in [256usize, 512, 1024] {
            let (grid, sol) = solve_for_terms(&market(), &t, n, None).unwrap();
            let found = sol.exercise_boundary(&grid, t.cap).expect("contact set nonempty");
            errs.push((found - vf.b).abs());
        }
        // O(dy) convergence up to grid-snap noise: the finest grid must
        // beat the coarsest, and land within two cells.
        assert!(errs[2] <= errs[0] + 1e-9, "{errs:?}");
        let (grid, _) = solve_for_terms(&market(), &t, 1024, None).unwrap();
        let cell = vf.b * (grid.spacing().exp_m1());
        assert!(errs[2] <= 2.0 * cell, "boundary error {} vs cell {cell}", errs[2]);
    }

    #[test]
    fn widened_domain_changes_little() {
        let t = terms(Some(240.0));
        let vf = closedform::build(&market(), &t).unwrap();
        let (grid1, sol1) = solve_for_terms(&market(), &t, 512, None).unwrap();
        let grid2 = LogGrid::for_terms_widened(&market(), &t, 1024, 2.0).unwrap();
        let op2 = assemble(&market(), &t, &grid2).unwrap();
        let sol2 = psor_solve(&op2, &grid2.payoff, &PsorSettings::for_grid_size(grid2.n)).unwrap();
        // Compare on probe prices interior to the narrow grid.
        for frac in [0.3, 0.6, 0.9, 1.2, 1.5] {
            let x = vf.b * frac;
            let v1 = sol1.value_at(&grid1, x).unwrap();
            let v2 = sol2.value_at(&grid2, x).unwrap();
            let rel = (v1 - v2).abs() / v1.abs().max(1e-12);
            assert!(rel < 5e-4, "x = {x}: {v1} vs {v2} (rel {rel})");
        }
    }

    #[test]
    fn coarse_spacing_triggers_grid_error() {
        // Very wide domain with the minimum node count drives dy past the
        // diagonal safeguard.
        let t = terms(None);
        let grid = LogGrid::for_terms_widened(&market(), &t, 64, 1e40).unwrap();
        let err = assemble(&market(), &t, &grid).unwrap_err();
        assert!(matches!(err, Error::Grid(_)), "{err:?}");
    }
}
