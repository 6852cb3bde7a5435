use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// One real-valued sample `x ↦ u(t, x, ω)` on the spatial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRealization {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl FieldRealization {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.size()
            )));
        }
        Ok(Self { grid, values, time })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.size()],
            time: 0.0,
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f(x)` at every grid point (`x[1]` is 0 in d = 1).
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.size()).map(|i| f(grid.position(i))).collect();
        Self {
            grid,
            values,
            time: 0.0,
        }
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            time: self.time,
        }
    }

    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.values) / self.values.len() as f64
    }

    /// Spatial average of `|u|^p`.
    pub fn abs_moment(&self, p: f64) -> f64 {
        let powered: Vec<f64> = if p == 2.0 {
            self.values.iter().map(|v| v * v).collect()
        } else {
            self.values.iter().map(|v| v.abs().powf(p)).collect()
        };
        pairwise_sum(&powered) / self.values.len() as f64
    }

    /// Root mean square over the grid.
    pub fn rms(&self) -> f64 {
        self.abs_moment(2.0).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Root mean square of the pointwise difference.
    pub fn rms_distance(&self, other: &Self) -> f64 {
        let sq: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        (pairwise_sum(&sq) / sq.len() as f64).sqrt()
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NumericOverflow {
                context: context.to_string(),
            })
        }
    }
}

/// Pairwise (cascade) summation. The order depends only on the slice
/// length, so results are reproducible for a fixed element order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}
