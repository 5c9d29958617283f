//! Single-firm parameter sweeps comparing no governance with cap-and-trade
//! at an exogenous price.

use serde::Serialize;

use crate::equilibrium::{breakeven_allowance, solve_cap_and_trade, solve_no_governance};
use crate::grid::{insert_anchor, is_strictly_increasing, log_grid};
use crate::model::{require_positive, Error, Result};

pub const DEFAULT_GRID_POINTS: usize = 50;
pub const DEFAULT_COST_RANGE: (f64, f64) = (1e-3, 1e-1);
pub const DEFAULT_ALLOWANCE_RANGE: (f64, f64) = (0.5, 20.0);

/// Log-spaced grid with extra points inserted at `anchors` that fall inside
/// the range.
pub fn anchored_grid(min: f64, max: f64, points: usize, anchors: &[f64]) -> Result<Vec<f64>> {
    let mut grid = log_grid(min, max, points)?;
    for &a in anchors {
        insert_anchor(&mut grid, a);
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Figure1Price {
    /// The same price at every cost.
    Fixed(f64),
    /// `b = sqrt(a)` at each cost.
    SqrtA,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Figure2Variant {
    /// Vary allowed FLOPs at a fixed cost.
    VaryAllowance { cost: f64 },
    /// Vary cost at fixed allowed FLOPs.
    VaryCost { allowance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Cost,
    Allowance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub x_base: f64,
    pub x_ct: f64,
    pub u_base: f64,
    pub u_ct: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    /// Allowance at which the two utilities cross, when the axis is
    /// allowance. A row at this value is included if it lies in the grid.
    pub crossover: Option<f64>,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::validation("grid", "grid must be non-empty"));
    }
    for &g in grid {
        require_positive("grid", g)?;
    }
    if !is_strictly_increasing(grid) {
        return Err(Error::validation(
            "grid",
            "grid must be strictly increasing",
        ));
    }
    Ok(())
}

fn row(axis_value: f64, k: f64, a: f64, b: f64, allowance: f64) -> Result<SweepRow> {
    let base = solve_no_governance(k, a)?;
    let ct = solve_cap_and_trade(k, a, b, allowance)?;
    if ct.x_star >= base.x_star {
        return Err(Error::validation(
            "sweep",
            format!(
                "cap-and-trade usage {} not below baseline {} at {axis_value}",
                ct.x_star, base.x_star
            ),
        ));
    }
    Ok(SweepRow {
        axis_value,
        x_base: base.x_star,
        x_ct: ct.x_star,
        u_base: base.utility,
        u_ct: ct.utility,
        price: b,
    })
}

/// FLOP usage with and without cap-and-trade across costs. Utilities are
/// evaluated at `allowance` allowed FLOPs.
pub fn sweep_figure1(
    cost_grid: &[f64],
    price: Figure1Price,
    k: f64,
    allowance: f64,
) -> Result<SweepResult> {
    check_grid(cost_grid)?;
    let rows = cost_grid
        .iter()
        .map(|&a| {
            let b = match price {
                Figure1Price::Fixed(b) => b,
                Figure1Price::SqrtA => a.sqrt(),
            };
            row(a, k, a, b, allowance)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        axis: SweepAxis::Cost,
        rows,
        crossover: None,
    })
}

/// Utility with and without cap-and-trade across allowed FLOPs or costs.
pub fn sweep_figure2(variant: Figure2Variant, grid: &[f64], k: f64, b: f64) -> Result<SweepResult> {
    check_grid(grid)?;
    match variant {
        Figure2Variant::VaryAllowance { cost } => {
            let crossover = breakeven_allowance(k, cost, b)?;
            let mut axis = grid.to_vec();
            insert_anchor(&mut axis, crossover);
            let rows = axis
                .iter()
                .map(|&f| row(f, k, cost, b, f))
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepResult {
                axis: SweepAxis::Allowance,
                rows,
                crossover: Some(crossover),
            })
        }
        Figure2Variant::VaryCost { allowance } => {
            let rows = grid
                .iter()
                .map(|&a| row(a, k, a, b, allowance))
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepResult {
                axis: SweepAxis::Cost,
                rows,
                crossover: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cost_grid() -> Vec<f64> {
        anchored_grid(1e-3, 1e-1, 50, &[0.01]).unwrap()
    }

    #[test]
    fn figure1_fixed_price_row() {
        let res = sweep_figure1(&cost_grid(), Figure1Price::Fixed(0.01), 1.0, 10.0).unwrap();
        let r = res.rows.iter().find(|r| r.axis_value == 0.01).unwrap();
        assert_relative_eq!(r.x_base, 10.0, epsilon = 1e-9);
        assert_relative_eq!(r.x_ct, 7.0710678118654755, epsilon = 1e-9);
        assert!(res.rows.iter().all(|r| r.x_ct < r.x_base));
        assert_eq!(res.rows.len(), 51);
    }

    #[test]
    fn figure1_sqrt_price_row() {
        let res = sweep_figure1(&cost_grid(), Figure1Price::SqrtA, 1.0, 10.0).unwrap();
        let r = res.rows.iter().find(|r| r.axis_value == 0.01).unwrap();
        assert_relative_eq!(r.x_ct, (1.0f64 / 0.11).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(r.x_ct, 3.0151134, epsilon = 1e-7);
        for r in &res.rows {
            assert_eq!(r.price, r.axis_value.sqrt());
        }
    }

    #[test]
    fn figure2_vary_allowance_crossover() {
        let grid = anchored_grid(0.5, 20.0, 50, &[10.0]).unwrap();
        let res = sweep_figure2(
            Figure2Variant::VaryAllowance { cost: 0.01 },
            &grid,
            1.0,
            0.01,
        )
        .unwrap();
        let f_hat = res.crossover.unwrap();
        assert_relative_eq!(f_hat, 8.2842712, epsilon = 1e-6);
        assert!(res.rows.iter().any(|r| r.axis_value == f_hat));
        for r in res.rows.iter().filter(|r| r.axis_value != f_hat) {
            if r.axis_value < f_hat {
                assert!(r.u_ct < r.u_base);
            } else {
                assert!(r.u_ct > r.u_base);
            }
        }
        let at10 = res.rows.iter().find(|r| r.axis_value == 10.0).unwrap();
        assert!(at10.u_ct > at10.u_base);
    }

    #[test]
    fn figure2_vary_cost_row() {
        let res = sweep_figure2(
            Figure2Variant::VaryCost { allowance: 10.0 },
            &cost_grid(),
            1.0,
            0.01,
        )
        .unwrap();
        let r = res.rows.iter().find(|r| r.axis_value == 0.01).unwrap();
        assert_relative_eq!(r.u_ct, -0.1828427, epsilon = 1e-7);
        assert_relative_eq!(r.u_base, -0.2, epsilon = 1e-12);
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(sweep_figure1(&[], Figure1Price::SqrtA, 1.0, 10.0).is_err());
        assert!(sweep_figure1(&[0.1, 0.01], Figure1Price::SqrtA, 1.0, 10.0).is_err());
        assert!(sweep_figure1(&[-0.1, 0.01], Figure1Price::SqrtA, 1.0, 10.0).is_err());
    }
}
