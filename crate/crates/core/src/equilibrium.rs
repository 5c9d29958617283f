//! Single-firm utility maximisation.
//!
//! Without governance a firm maximises `-x^-k - a x` over FLOP usage `x`.
//! Under cap-and-trade it also chooses a trade `y` (positive = sold) at price
//! `b`, maximising `-x^-k - a x + b y` subject to `x + y <= F` and `x >= 0`.
//! Both problems have closed-form optima; [`GridOracle`] recovers them by
//! brute force so the closed forms can be checked independently.

use crate::grid::{linear_grid, log_grid};
use crate::model::{
    require_finite, require_nonnegative, require_positive, EquilibriumSolution, Error, Result,
    SolveMethod,
};
use serde::Serialize;

fn check_loss_params(k: f64, a: f64) -> Result<()> {
    require_positive("loss_exponent", k)?;
    require_positive("cost_per_flop", a)?;
    Ok(())
}

fn require_usage(x: f64) -> Result<f64> {
    require_finite("x", x)?;
    if x > 0.0 {
        Ok(x)
    } else {
        // -x^-k diverges to -inf at zero usage
        Err(Error::validation(
            "x",
            "x must be > 0 (utility is -inf at x = 0)",
        ))
    }
}

/// Unconstrained optimum of `-x^-k - c x`.
#[inline]
fn optimal_usage(k: f64, marginal_cost: f64) -> f64 {
    (k / marginal_cost).powf(1.0 / (k + 1.0))
}

#[inline]
fn raw_utility(x: f64, y: f64, k: f64, a: f64, b: f64) -> f64 {
    -x.powf(-k) - a * x + b * y
}

pub fn utility_no_governance(x: f64, k: f64, a: f64) -> Result<f64> {
    require_usage(x)?;
    check_loss_params(k, a)?;
    Ok(raw_utility(x, 0.0, k, a, 0.0))
}

pub fn utility_cap_and_trade(x: f64, y: f64, k: f64, a: f64, b: f64) -> Result<f64> {
    require_usage(x)?;
    require_finite("y", y)?;
    check_loss_params(k, a)?;
    require_positive("price", b)?;
    Ok(raw_utility(x, y, k, a, b))
}

/// Analytic gradient `(du/dx, du/dy)` of the cap-and-trade utility.
pub fn utility_gradient(x: f64, y: f64, k: f64, a: f64, b: f64) -> Result<(f64, f64)> {
    utility_cap_and_trade(x, y, k, a, b)?;
    Ok((k * x.powf(-(k + 1.0)) - a, b))
}

pub fn solve_no_governance(k: f64, a: f64) -> Result<EquilibriumSolution> {
    check_loss_params(k, a)?;
    let x = optimal_usage(k, a);
    Ok(EquilibriumSolution {
        x_star: x,
        y_star: 0.0,
        utility: raw_utility(x, 0.0, k, a, 0.0),
        mu1: 0.0,
        mu2: 0.0,
        method: SolveMethod::ClosedForm,
    })
}

/// Cap-and-trade optimum. The cap is always binding because the multiplier
/// on `x + y <= F` equals the price `b > 0`.
pub fn solve_cap_and_trade(k: f64, a: f64, b: f64, allowed: f64) -> Result<EquilibriumSolution> {
    check_loss_params(k, a)?;
    require_positive("price", b)?;
    require_nonnegative("flops_allowed", allowed)?;
    let x = optimal_usage(k, a + b);
    let y = allowed - x;
    Ok(EquilibriumSolution {
        x_star: x,
        y_star: y,
        utility: raw_utility(x, y, k, a, b),
        mu1: b,
        mu2: 0.0,
        method: SolveMethod::ClosedForm,
    })
}

/// Optimum under a per-FLOP tax `t`. The tax paid is deducted from utility.
pub fn solve_pigouvian(k: f64, a: f64, t: f64) -> Result<EquilibriumSolution> {
    check_loss_params(k, a)?;
    require_nonnegative("tax", t)?;
    let x = optimal_usage(k, a + t);
    Ok(EquilibriumSolution {
        x_star: x,
        y_star: 0.0,
        utility: raw_utility(x, 0.0, k, a + t, 0.0),
        mu1: 0.0,
        mu2: 0.0,
        method: SolveMethod::ClosedForm,
    })
}

/// Absolute residuals of the KKT system for the cap-and-trade problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktResiduals {
    pub stationarity_x: f64,
    pub stationarity_y: f64,
    pub primal_cap: f64,
    pub primal_nonneg: f64,
    pub comp_slack_1: f64,
    pub comp_slack_2: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        [
            self.stationarity_x,
            self.stationarity_y,
            self.primal_cap,
            self.primal_nonneg,
            self.comp_slack_1,
            self.comp_slack_2,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.max() < tol
    }
}

/// Residuals of the first-order conditions of the Lagrangian
/// `x^-k + a x - b y + mu1 (x + y - F) - mu2 x` (the minimisation form).
pub fn kkt_residuals(
    sol: &EquilibriumSolution,
    k: f64,
    a: f64,
    b: f64,
    allowed: f64,
) -> KktResiduals {
    let (x, y) = (sol.x_star, sol.y_star);
    let cap_gap = x + y - allowed;
    KktResiduals {
        stationarity_x: (-k * x.powf(-(k + 1.0)) + a + sol.mu1 - sol.mu2).abs(),
        stationarity_y: (sol.mu1 - b).abs(),
        primal_cap: cap_gap.max(0.0),
        primal_nonneg: (-x).max(0.0),
        comp_slack_1: (sol.mu1 * cap_gap).abs(),
        comp_slack_2: (sol.mu2 * x).abs(),
    }
}

/// Allowance level at which cap-and-trade utility equals no-governance
/// utility. Cap-and-trade utility is affine in `F` with slope `b`, so the
/// crossing is unique.
pub fn breakeven_allowance(k: f64, a: f64, b: f64) -> Result<f64> {
    let base = solve_no_governance(k, a)?;
    let x_c = solve_cap_and_trade(k, a, b, 0.0)?.x_star;
    Ok((base.utility + x_c.powf(-k) + a * x_c + b * x_c) / b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    NoGovernance,
    CapAndTrade,
}

/// Brute-force maximiser: a log-spaced scan over the bracket followed by
/// rounds of linear zoom around the incumbent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOracle {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub zoom_rounds: usize,
}

impl Default for GridOracle {
    fn default() -> Self {
        GridOracle {
            lo: 1e-3,
            hi: 1e4,
            points: 1001,
            zoom_rounds: 3,
        }
    }
}

/// Outcome of scanning points strictly inside the cap (`x + y < F`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlackScan {
    pub binding_utility: f64,
    pub best_slack_utility: f64,
    pub best_slack_x: f64,
    pub best_slack: f64,
    pub points_checked: usize,
}

impl SlackScan {
    pub fn slack_beats_binding(&self) -> bool {
        self.best_slack_utility > self.binding_utility
    }
}

impl GridOracle {
    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo > 0.0 && self.lo < self.hi)
            || self.points < 3
        {
            return Err(Error::validation(
                "bracket",
                format!(
                    "oracle bracket must satisfy 0 < lo < hi with >= 3 points (got [{}, {}], {})",
                    self.lo, self.hi, self.points
                ),
            ));
        }
        Ok(())
    }

    fn argmax(grid: &[f64], f: impl Fn(f64) -> f64) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &x) in grid.iter().enumerate() {
            let v = f(x);
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }

    pub fn solve(
        &self,
        k: f64,
        a: f64,
        b: f64,
        allowed: f64,
        objective: Objective,
    ) -> Result<EquilibriumSolution> {
        self.validate()?;
        check_loss_params(k, a)?;
        let (price, allowed) = match objective {
            Objective::NoGovernance => (0.0, 0.0),
            Objective::CapAndTrade => (
                require_positive("price", b)?,
                require_nonnegative("flops_allowed", allowed)?,
            ),
        };
        // y is pinned to F - x: the cap binds whenever price > 0
        let f = |x: f64| raw_utility(x, allowed - x, k, a, price);

        let mut grid = log_grid(self.lo, self.hi, self.points)?;
        let mut idx = Self::argmax(&grid, f).0;
        if idx == 0 || idx == grid.len() - 1 {
            return Err(Error::validation(
                "bracket",
                format!(
                    "optimum lies on the oracle bracket edge [{}, {}]",
                    self.lo, self.hi
                ),
            ));
        }
        for _ in 0..self.zoom_rounds {
            grid = linear_grid(grid[idx - 1], grid[idx + 1], self.points);
            // an incumbent on the zoom edge stays inside the next bracket
            idx = Self::argmax(&grid, f).0.clamp(1, grid.len() - 2);
        }
        let x = grid[Self::argmax(&grid, f).0];
        let (y, mu1) = match objective {
            Objective::NoGovernance => (0.0, 0.0),
            Objective::CapAndTrade => (allowed - x, price),
        };
        Ok(EquilibriumSolution {
            x_star: x,
            y_star: y,
            utility: f(x),
            mu1,
            mu2: 0.0,
            method: SolveMethod::GridOracle,
        })
    }

    /// Coarse 2-D scan over `(x, s)` with `y = F - x - s` and slack `s > 0`,
    /// compared against `binding`.
    pub fn slack_scan(
        &self,
        k: f64,
        a: f64,
        b: f64,
        allowed: f64,
        binding: &EquilibriumSolution,
    ) -> Result<SlackScan> {
        self.validate()?;
        check_loss_params(k, a)?;
        require_positive("price", b)?;
        require_nonnegative("flops_allowed", allowed)?;
        let xs = log_grid(self.lo, self.hi, 201)?;
        let max_slack = allowed + binding.x_star.abs() + 1.0;
        let slacks = linear_grid(0.0, max_slack, 51);
        let mut scan = SlackScan {
            binding_utility: raw_utility(binding.x_star, binding.y_star, k, a, b),
            best_slack_utility: f64::NEG_INFINITY,
            best_slack_x: f64::NAN,
            best_slack: f64::NAN,
            points_checked: 0,
        };
        for &x in &xs {
            for &s in slacks.iter().skip(1) {
                let u = raw_utility(x, allowed - x - s, k, a, b);
                scan.points_checked += 1;
                if u > scan.best_slack_utility {
                    scan.best_slack_utility = u;
                    scan.best_slack_x = x;
                    scan.best_slack = s;
                }
            }
        }
        Ok(scan)
    }
}

pub fn grid_oracle(
    k: f64,
    a: f64,
    b: f64,
    allowed: f64,
    objective: Objective,
) -> Result<EquilibriumSolution> {
    GridOracle::default().solve(k, a, b, allowed, objective)
}
