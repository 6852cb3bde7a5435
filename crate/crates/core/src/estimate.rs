//! Member-level Monte Carlo summaries.

use serde::{Deserialize, Serialize};

use crate::field::pairwise_sum;

/// Sample mean of per-member values with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub members: usize,
}

impl Estimate {
    /// `stderr` is the sample standard deviation over `√N`; it is 0 for a
    /// single member.
    pub fn from_members(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                value: f64::NAN,
                stderr: f64::NAN,
                members: 0,
            };
        }
        let mean = pairwise_sum(xs) / n as f64;
        let stderr = if n > 1 {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            value: mean,
            stderr,
            members: n,
        }
    }

    /// `|value - target| / stderr`, with the standard error floored at
    /// `floor` so that roundoff-level quantities do not produce spurious
    /// scores.
    pub fn z_score(&self, target: f64, floor: f64) -> f64 {
        let diff = self.value - target;
        let scale = self.stderr.max(floor);
        if scale == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY * diff.signum()
            }
        } else {
            diff / scale
        }
    }
}
