//! Periodic grid geometry and its dual (wavenumber) lattice.
//!
//! Fields live on `n^d` equispaced points of a torus of period `len` in each
//! axis, stored row-major with axis 0 outermost. The dual lattice uses the
//! FFT ordering: index `m < n/2` carries wavenumber `m`, index `m >= n/2`
//! carries `m - n`, all scaled by `2π/len`. The Nyquist index `n/2` thus maps
//! to `-n/2`, which has no positive partner on the grid.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{config, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    len: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, len: f64) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return config(format!("grid dimension must be 1 or 2, got {dim}"));
        }
        if n < 8 || !n.is_power_of_two() {
            return config(format!("points per axis must be a power of two >= 8, got {n}"));
        }
        if !(len > 0.0 && len.is_finite()) {
            return config(format!("period must be positive and finite, got {len}"));
        }
        Ok(Self { dim, n, len })
    }

    /// One-dimensional grid on `[0, 2π)`, so wavenumbers are integers.
    pub fn periodic_1d(n: usize) -> Result<Self> {
        Self::new(1, n, 2.0 * PI)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> f64 {
        self.len
    }

    /// Total number of grid points, `n^d`.
    pub fn size(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn spacing(&self) -> f64 {
        self.len / self.n as f64
    }

    /// Volume element `Δx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Fundamental wavenumber `2π/len`.
    pub fn dk(&self) -> f64 {
        2.0 * PI / self.len
    }

    /// Signed integer mode number of an axis index.
    pub fn mode_number(&self, m: usize) -> i64 {
        if m < self.n / 2 {
            m as i64
        } else {
            m as i64 - self.n as i64
        }
    }

    /// Axis indices of a flat index (length `dim`).
    pub fn axis_indices(&self, flat: usize) -> [usize; 2] {
        match self.dim {
            1 => [flat, 0],
            _ => [flat / self.n, flat % self.n],
        }
    }

    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] * self.n + idx[1],
        }
    }

    /// Wavenumber vector of a flat dual index (second component 0 in d = 1).
    pub fn wavevector(&self, flat: usize) -> [f64; 2] {
        let idx = self.axis_indices(flat);
        let dk = self.dk();
        let k0 = self.mode_number(idx[0]) as f64 * dk;
        let k1 = if self.dim == 2 {
            self.mode_number(idx[1]) as f64 * dk
        } else {
            0.0
        };
        [k0, k1]
    }

    pub fn wavenumber_norm(&self, flat: usize) -> f64 {
        let [k0, k1] = self.wavevector(flat);
        k0.hypot(k1)
    }

    /// All `|k|` in flat dual order.
    pub fn wavenumber_norms(&self) -> Vec<f64> {
        (0..self.size()).map(|i| self.wavenumber_norm(i)).collect()
    }

    /// Flat index of `-k`.
    pub fn negate(&self, flat: usize) -> usize {
        let idx = self.axis_indices(flat);
        let neg = |m: usize| (self.n - m) % self.n;
        match self.dim {
            1 => neg(idx[0]),
            _ => self.flat_index([neg(idx[0]), neg(idx[1])]),
        }
    }

    /// Modes equal to their own negation: the zero mode and the Nyquist
    /// combinations. A real field has real coefficients there.
    pub fn is_self_conjugate(&self, flat: usize) -> bool {
        self.negate(flat) == flat
    }

    /// True if any component sits on the Nyquist index.
    pub fn touches_nyquist(&self, flat: usize) -> bool {
        let idx = self.axis_indices(flat);
        let h = self.n / 2;
        idx[0] == h || (self.dim == 2 && idx[1] == h)
    }

    /// Inside the 2/3-rule band: every |mode number| < n/3.
    pub fn in_dealias_band(&self, flat: usize) -> bool {
        let idx = self.axis_indices(flat);
        let cut = self.n as i64 / 3;
        let ok = |m: usize| self.mode_number(m).abs() < cut;
        ok(idx[0]) && (self.dim == 1 || ok(idx[1]))
    }

    /// Physical coordinates of a flat spatial index.
    pub fn position(&self, flat: usize) -> [f64; 2] {
        let idx = self.axis_indices(flat);
        let h = self.spacing();
        [idx[0] as f64 * h, if self.dim == 2 { idx[1] as f64 * h } else { 0.0 }]
    }

    /// Flat index of the point shifted by `offset` grid steps (periodic).
    pub fn shift_index(&self, flat: usize, offset: [i64; 2]) -> usize {
        let idx = self.axis_indices(flat);
        let n = self.n as i64;
        let wrap = |m: usize, o: i64| (m as i64 + o).rem_euclid(n) as usize;
        match self.dim {
            1 => wrap(idx[0], offset[0]),
            _ => self.flat_index([wrap(idx[0], offset[0]), wrap(idx[1], offset[1])]),
        }
    }

    /// Unit direction of dimension `dim`; d = 1 accepts only the sign.
    pub fn normalize_direction(&self, z: [f64; 2]) -> Result<[f64; 2]> {
        let z = if self.dim == 1 { [z[0], 0.0] } else { z };
        let norm = z[0].hypot(z[1]);
        if !(norm > 0.0 && norm.is_finite()) {
            return config("direction z must be nonzero and finite");
        }
        Ok([z[0] / norm, z[1] / norm])
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(crate::Error::GridMismatch(format!(
                "{self:?} vs {other:?}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid::new(3, 16, 1.0).is_err());
        assert!(Grid::new(1, 4, 1.0).is_err());
        assert!(Grid::new(1, 24, 1.0).is_err());
        assert!(Grid::new(1, 16, 0.0).is_err());
        assert!(Grid::new(2, 16, 1.0).is_ok());
    }

    #[test]
    fn dual_lattice_is_symmetric_off_nyquist() {
        for g in [Grid::new(1, 16, 3.0).unwrap(), Grid::new(2, 8, 2.0).unwrap()] {
            for i in 0..g.size() {
                let j = g.negate(i);
                assert_eq!(g.negate(j), i);
                if !g.touches_nyquist(i) {
                    let (a, b) = (g.wavevector(i), g.wavevector(j));
                    assert_eq!(a[0], -b[0]);
                    assert_eq!(a[1], -b[1]);
                }
            }
        }
    }

    #[test]
    fn self_conjugate_modes() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let count = (0..g.size()).filter(|&i| g.is_self_conjugate(i)).count();
        assert_eq!(count, 4);
        let g = Grid::new(1, 8, 1.0).unwrap();
        let sc: Vec<_> = (0..8).filter(|&i| g.is_self_conjugate(i)).collect();
        assert_eq!(sc, vec![0, 4]);
        assert_eq!(g.mode_number(4), -4);
    }

    #[test]
    fn shift_wraps() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let i = g.flat_index([7, 0]);
        assert_eq!(g.shift_index(i, [1, -1]), g.flat_index([0, 7]));
    }
}
