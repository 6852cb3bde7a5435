//! Thin d-dimensional wrapper over `rustfft`.
//!
//! Plans are immutable and cached process-wide; scratch buffers are allocated
//! per call, so concurrent use from several workers needs no coordination.
//!
//! Conventions: `forward` computes `û(k) = Σ_x u(x) e^{-ik·x}` and
//! `inverse` computes `u(x) = n^{-d} Σ_k û(k) e^{ik·x}`, so that
//! `inverse(forward(u)) = u`.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::grid::Grid;

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> PlanPair {
    static CACHE: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

fn transform(grid: &Grid, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
    let n = grid.n();
    debug_assert_eq!(data.len(), grid.size());
    let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
    // rows (contiguous), then columns through a gather buffer
    plan.process_with_scratch(data, &mut scratch);
    if grid.dim() == 2 {
        let mut col = vec![Complex64::default(); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            plan.process_with_scratch(&mut col, &mut scratch);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    }
}

pub fn forward_in_place(grid: &Grid, data: &mut [Complex64]) {
    let (fwd, _) = plans(grid.n());
    transform(grid, data, &fwd);
}

/// Normalized inverse transform.
pub fn inverse_in_place(grid: &Grid, data: &mut [Complex64]) {
    let (_, inv) = plans(grid.n());
    transform(grid, data, &inv);
    let scale = 1.0 / grid.size() as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

pub fn forward_real(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward_in_place(grid, &mut data);
    data
}

/// Inverse transform returning the real part together with the largest
/// imaginary residue.
pub fn inverse_real(grid: &Grid, mut spectrum: Vec<Complex64>) -> (Vec<f64>, f64) {
    inverse_in_place(grid, &mut spectrum);
    let mut residue = 0.0f64;
    let values = spectrum
        .into_iter()
        .map(|c| {
            residue = residue.max(c.im.abs());
            c.re
        })
        .collect();
    (values, residue)
}
