use crate::model::{Error, Result};

/// `points` log-spaced values from `min` to `max` inclusive.
pub fn log_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && min > 0.0 && min < max) {
        return Err(Error::validation(
            "grid",
            format!("grid bounds must satisfy 0 < min < max (got {min}, {max})"),
        ));
    }
    if points < 2 {
        return Err(Error::validation(
            "grid",
            "grid must have at least 2 points",
        ));
    }
    let (lo, hi) = (min.ln(), max.ln());
    let step = (hi - lo) / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|i| (lo + step * i as f64).exp()).collect();
    // pin the endpoints exactly
    grid[0] = min;
    grid[points - 1] = max;
    Ok(grid)
}

/// `points` evenly spaced values from `min` to `max` inclusive.
pub(crate) fn linear_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    debug_assert!(points >= 2);
    let step = (max - min) / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|i| min + step * i as f64).collect();
    grid[points - 1] = max;
    grid
}

/// Insert `value` into an ascending grid unless it is outside the range or
/// already present.
pub(crate) fn insert_anchor(grid: &mut Vec<f64>, value: f64) {
    let (Some(&first), Some(&last)) = (grid.first(), grid.last()) else {
        return;
    };
    if value < first || value > last {
        return;
    }
    match grid.binary_search_by(|g| g.total_cmp(&value)) {
        Ok(_) => {}
        Err(pos) => grid.insert(pos, value),
    }
}

pub(crate) fn is_strictly_increasing(grid: &[f64]) -> bool {
    grid.windows(2).all(|w| w[0] < w[1])
}
