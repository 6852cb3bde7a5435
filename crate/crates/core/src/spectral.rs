//! Fourier-multiplier operators on the periodic grid: the fractional
//! Laplacian `(-Δ)^s`, the semigroup `P_t = e^{-t(-Δ)^s}`, the smoothed
//! directional derivative `∇_z P_t`, and the heat kernel `p_t`.
//!
//! Every operator is a pointwise product in Fourier space. At self-conjugate
//! modes (zero and Nyquist) multiplier values are reduced to their real part
//! so that real fields stay real.

use num_complex::Complex64;

use crate::error::{config, Error, Result};
use crate::fft;
use crate::field::{pairwise_sum, FieldRealization};
use crate::grid::Grid;

/// Relative size of the imaginary residue tolerated after an inverse
/// transform of a Hermitian spectrum.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierOp {
    pub grid: Grid,
    pub values: Vec<Complex64>,
    pub label: String,
}

impl MultiplierOp {
    /// Builds a multiplier from its symbol evaluated at each wavevector.
    pub fn from_symbol(
        grid: Grid,
        label: impl Into<String>,
        symbol: impl Fn([f64; 2]) -> Complex64,
    ) -> Self {
        let values = (0..grid.size())
            .map(|i| {
                let v = symbol(grid.wavevector(i));
                if grid.is_self_conjugate(i) {
                    Complex64::new(v.re, 0.0)
                } else {
                    v
                }
            })
            .collect();
        Self {
            grid,
            values,
            label: label.into(),
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self::from_symbol(grid, format!("const({c})"), |_| Complex64::new(c, 0.0))
    }

    pub fn fractional_laplacian(grid: Grid, s: f64) -> Result<Self> {
        check_order(s)?;
        Ok(Self::from_symbol(grid, format!("(-Δ)^{s}"), |k| {
            Complex64::new(symbol_power(k, s), 0.0)
        }))
    }

    pub fn semigroup(grid: Grid, t: f64, s: f64) -> Result<Self> {
        check_order(s)?;
        if !(t >= 0.0 && t.is_finite()) {
            return config(format!("semigroup time must be >= 0, got {t}"));
        }
        Ok(Self::from_symbol(grid, format!("P_{t}"), |k| {
            Complex64::new((-t * symbol_power(k, s)).exp(), 0.0)
        }))
    }

    /// `i (z·k)`; the Nyquist entries vanish.
    pub fn directional_derivative(grid: Grid, z: [f64; 2]) -> Result<Self> {
        let z = grid.normalize_direction(z)?;
        Ok(Self::from_symbol(grid, "∇_z", |k| {
            Complex64::new(0.0, z[0] * k[0] + z[1] * k[1])
        }))
    }

    pub fn grad_semigroup(grid: Grid, t: f64, s: f64, z: [f64; 2]) -> Result<Self> {
        check_order(s)?;
        if !(t > 0.0 && t.is_finite()) {
            return config(format!("∇_z P_t needs t > 0, got {t}"));
        }
        let z = grid.normalize_direction(z)?;
        Ok(Self::from_symbol(grid, format!("∇_z P_{t}"), |k| {
            let decay = (-t * symbol_power(k, s)).exp();
            Complex64::new(0.0, (z[0] * k[0] + z[1] * k[1]) * decay)
        }))
    }

    /// Operator norm on discrete L², i.e. `max_k |m(k)|`.
    pub fn l2_operator_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    /// `m(-k) = conj(m(k))` on every mode off the Nyquist lines.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.grid.size())
            .filter(|&i| !self.grid.touches_nyquist(i))
            .all(|i| (self.values[self.grid.negate(i)] - self.values[i].conj()).norm() <= tol)
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
            label: format!("{}∘{}", self.label, other.label),
        })
    }
}

/// `|k|^{2s}`, zero at `k = 0`.
fn symbol_power(k: [f64; 2], s: f64) -> f64 {
    let r2 = k[0] * k[0] + k[1] * k[1];
    if r2 == 0.0 {
        0.0
    } else {
        r2.powf(s)
    }
}

pub(crate) fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return config(format!("fractional order s must lie in (0, 1], got {s}"));
    }
    Ok(())
}

/// Multiplies the spectrum of `field` by `op` and transforms back.
pub fn apply_multiplier(field: &FieldRealization, op: &MultiplierOp) -> Result<FieldRealization> {
    field.grid.ensure_same(&op.grid)?;
    let mut spectrum = fft::forward_real(&field.grid, &field.values);
    for (c, m) in spectrum.iter_mut().zip(&op.values) {
        *c *= m;
    }
    let (values, residue) = fft::inverse_real(&field.grid, spectrum);
    let out = FieldRealization {
        grid: field.grid,
        values,
        time: field.time,
    };
    out.ensure_finite(&op.label)?;
    let scale = out.sup_norm().max(field.sup_norm() * op.l2_operator_norm());
    if residue > IMAG_RESIDUE_TOL * scale {
        return Err(Error::Config(format!(
            "multiplier {} is not Hermitian: imaginary residue {residue:.3e}",
            op.label
        )));
    }
    Ok(out)
}

pub fn fractional_laplacian(field: &FieldRealization, s: f64) -> Result<FieldRealization> {
    apply_multiplier(field, &MultiplierOp::fractional_laplacian(field.grid, s)?)
}

/// `P_t u`; the returned field carries time `field.time + t`.
pub fn semigroup_apply(field: &FieldRealization, t: f64, s: f64) -> Result<FieldRealization> {
    let mut out = apply_multiplier(field, &MultiplierOp::semigroup(field.grid, t, s)?)?;
    out.time = field.time + t;
    Ok(out)
}

pub fn grad_semigroup_apply(
    field: &FieldRealization,
    t: f64,
    s: f64,
    z: [f64; 2],
) -> Result<FieldRealization> {
    apply_multiplier(field, &MultiplierOp::grad_semigroup(field.grid, t, s, z)?)
}

/// Spectral directional derivative `∇_z u`.
pub fn directional_derivative(field: &FieldRealization, z: [f64; 2]) -> Result<FieldRealization> {
    apply_multiplier(field, &MultiplierOp::directional_derivative(field.grid, z)?)
}

/// Samples of the periodized kernel of `P_t`, normalized to unit mass:
/// `p_t(x) = len^{-d} Σ_k e^{ik·x - t|k|^{2s}}`.
pub fn kernel_values(t: f64, s: f64, grid: Grid) -> Result<FieldRealization> {
    check_order(s)?;
    if !(t > 0.0 && t.is_finite()) {
        return config(format!("kernel needs t > 0, got {t}"));
    }
    let op = MultiplierOp::semigroup(grid, t, s)?;
    let (values, _) = fft::inverse_real(&grid, op.values);
    let inv_cell = 1.0 / grid.cell_volume();
    let values: Vec<f64> = values.into_iter().map(|v| v * inv_cell).collect();
    let peak = values.iter().fold(f64::MIN, |m, &v| m.max(v));
    if peak * grid.cell_volume() > 0.5 {
        return Err(Error::Resolution(format!(
            "kernel at t = {t}, s = {s} is under-resolved: peak mass per cell {:.3}",
            peak * grid.cell_volume()
        )));
    }
    FieldRealization::new(grid, values, t)
}

/// Riemann sum `Σ p Δx^d`.
pub fn kernel_mass(kernel: &FieldRealization) -> f64 {
    pairwise_sum(&kernel.values) * kernel.grid.cell_volume()
}

/// `c_s = sup_{r≥0} r e^{-r^{2s}} = (2s)^{-1/2s} e^{-1/2s}`, the constant in
/// `‖∇_z P_t‖_{L²→L²} ≤ c_s t^{-1/2s}`.
pub fn gradient_constant(s: f64) -> Result<f64> {
    check_order(s)?;
    let e = 1.0 / (2.0 * s);
    Ok((2.0 * s).powf(-e) * (-e).exp())
}

/// `‖∇_z p_1‖_{L¹(ℝ^d)} = (2/π) Γ(1 + 1/2s)` for a unit `z`, in both
/// `d = 1` and `d = 2`. The kernel is radially decreasing, so the integral
/// reduces to twice the one-dimensional marginal at the origin.
pub fn kernel_gradient_constant(s: f64) -> Result<f64> {
    check_order(s)?;
    Ok(2.0 / std::f64::consts::PI * statrs::function::gamma::gamma(1.0 + 1.0 / (2.0 * s)))
}

/// `c_{s,α} = (sup_r r^{2α} e^{-r^{2s}})^{1/2} 2^{-α/2s}`.
///
/// With `β = α/s` the supremum is `β^β e^{-β}` (attained at `r^{2s} = β`).
pub fn smoothing_constant(s: f64, alpha: f64) -> Result<f64> {
    check_order(s)?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return config(format!("smoothing order must be >= 0, got {alpha}"));
    }
    let beta = alpha / s;
    if beta == 0.0 {
        return Ok(1.0);
    }
    let log_sup = beta * beta.ln() - beta;
    Ok((0.5 * log_sup - 0.5 * beta * std::f64::consts::LN_2).exp())
}
