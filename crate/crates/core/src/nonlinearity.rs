use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::field::FieldRealization;
use crate::fft;
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearityKind {
    Zero,
    /// `f(x) = L tanh(x)`.
    LipschitzTanh { lipschitz: f64 },
    /// `f(x) = x²/2`.
    BurgersQuadratic,
    /// `f(x) = C sgn(x) |x|^{q+1} / (q+1)`, so `|f'(x)| = C|x|^q`.
    Polynomial { c: f64, q: f64 },
}

/// The flux `f`, optionally composed with the cut-off `h_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub kind: NonlinearityKind,
    pub cutoff_level: Option<f64>,
}

/// `h_n(x) = min(|x|, n) sgn(x)`.
pub fn cutoff(x: f64, level: f64) -> f64 {
    x.clamp(-level, level)
}

impl NonlinearitySpec {
    pub fn new(kind: NonlinearityKind, cutoff_level: Option<f64>) -> Result<Self> {
        let spec = Self { kind, cutoff_level };
        spec.validate()?;
        Ok(spec)
    }

    pub fn zero() -> Self {
        Self {
            kind: NonlinearityKind::Zero,
            cutoff_level: None,
        }
    }

    pub fn tanh(lipschitz: f64) -> Self {
        Self {
            kind: NonlinearityKind::LipschitzTanh { lipschitz },
            cutoff_level: None,
        }
    }

    pub fn burgers() -> Self {
        Self {
            kind: NonlinearityKind::BurgersQuadratic,
            cutoff_level: None,
        }
    }

    pub fn with_cutoff(mut self, level: f64) -> Self {
        self.cutoff_level = Some(level);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            NonlinearityKind::LipschitzTanh { lipschitz } if !(lipschitz >= 0.0 && lipschitz.is_finite()) => {
                return config(format!("tanh Lipschitz constant must be >= 0, got {lipschitz}"))
            }
            NonlinearityKind::Polynomial { c, q } if !(c >= 0.0 && q > 0.0 && c.is_finite() && q.is_finite()) => {
                return config(format!("polynomial growth needs C >= 0 and q > 0, got C = {c}, q = {q}"))
            }
            _ => {}
        }
        if let Some(n) = self.cutoff_level {
            if !(n > 0.0 && n.is_finite()) {
                return config(format!("cut-off level must be positive, got {n}"));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = match self.cutoff_level {
            Some(n) => cutoff(x, n),
            None => x,
        };
        match self.kind {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::LipschitzTanh { lipschitz } => lipschitz * x.tanh(),
            NonlinearityKind::BurgersQuadratic => 0.5 * x * x,
            NonlinearityKind::Polynomial { c, q } => c * x.signum() * x.abs().powf(q + 1.0) / (q + 1.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NonlinearityKind::Zero)
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(
            self.kind,
            NonlinearityKind::BurgersQuadratic | NonlinearityKind::Polynomial { .. }
        )
    }

    /// Global Lipschitz constant `sup |f'|` of the (cut-off) flux; `None`
    /// for polynomial kinds without a cut-off.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        match (self.kind, self.cutoff_level) {
            (NonlinearityKind::Zero, _) => Some(0.0),
            (NonlinearityKind::LipschitzTanh { lipschitz }, _) => Some(lipschitz),
            (NonlinearityKind::BurgersQuadratic, Some(n)) => Some(n),
            (NonlinearityKind::Polynomial { c, q }, Some(n)) => Some(c * n.powf(q)),
            _ => None,
        }
    }

    /// Growth constants `(C, q)` with `|f(x)-f(y)| ≤ C|x-y|(|x|^q+|y|^q)`.
    pub fn growth(&self) -> Option<(f64, f64)> {
        match self.kind {
            NonlinearityKind::BurgersQuadratic => Some((0.5, 1.0)),
            NonlinearityKind::Polynomial { c, q } => Some((c, q)),
            _ => None,
        }
    }
}

/// Pointwise `f(u)`. With `dealias`, the result is additionally truncated
/// to the 2/3-rule band in Fourier space.
pub fn eval_nonlinearity(
    spec: &NonlinearitySpec,
    field: &FieldRealization,
    dealias: bool,
) -> Result<FieldRealization> {
    let out = field.map(|x| spec.eval(x));
    out.ensure_finite(&format!("nonlinearity at t = {}", field.time))?;
    if !dealias {
        return Ok(out);
    }
    let grid = field.grid;
    let mut spectrum = fft::forward_real(&grid, &out.values);
    truncate_to_band(&grid, &mut spectrum);
    let (values, _) = fft::inverse_real(&grid, spectrum);
    Ok(FieldRealization { values, ..out })
}

pub(crate) fn dealias_mask(grid: &Grid) -> Vec<bool> {
    (0..grid.size()).map(|i| grid.in_dealias_band(i)).collect()
}

fn truncate_to_band(grid: &Grid, spectrum: &mut [num_complex::Complex64]) {
    for (i, c) in spectrum.iter_mut().enumerate() {
        if !grid.in_dealias_band(i) {
            *c = Default::default();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::periodic_1d(32).unwrap()
    }

    #[test]
    fn zero_at_zero() {
        for spec in [
            NonlinearitySpec::zero(),
            NonlinearitySpec::tanh(0.3),
            NonlinearitySpec::burgers(),
            NonlinearitySpec::new(NonlinearityKind::Polynomial { c: 2.0, q: 1.5 }, Some(3.0)).unwrap(),
        ] {
            assert_eq!(spec.eval(0.0), 0.0);
        }
    }

    #[test]
    fn examples() {
        let g = grid();
        let two = FieldRealization::constant(g, 2.0);
        let z = eval_nonlinearity(&NonlinearitySpec::zero(), &two, false).unwrap();
        assert_eq!(z.sup_norm(), 0.0);
        let b = eval_nonlinearity(&NonlinearitySpec::burgers(), &two, true).unwrap();
        assert!(b.values.iter().all(|&v| (v - 2.0).abs() < 1e-14));
        let three = FieldRealization::constant(g, 3.0);
        let c = eval_nonlinearity(&NonlinearitySpec::burgers().with_cutoff(1.0), &three, false).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn non_finite_is_reported() {
        let g = grid();
        let big = FieldRealization::constant(g, 1e200);
        assert!(eval_nonlinearity(&NonlinearitySpec::burgers(), &big, false).is_err());
    }

    #[test]
    fn lipschitz_constants() {
        assert_eq!(NonlinearitySpec::burgers().lipschitz_constant(), None);
        assert_eq!(NonlinearitySpec::burgers().with_cutoff(4.0).lipschitz_constant(), Some(4.0));
        let p = NonlinearitySpec::new(NonlinearityKind::Polynomial { c: 2.0, q: 2.0 }, Some(3.0)).unwrap();
        assert_eq!(p.lipschitz_constant(), Some(18.0));
        assert!(NonlinearitySpec::new(NonlinearityKind::LipschitzTanh { lipschitz: -1.0 }, None).is_err());
        assert!(NonlinearitySpec::new(NonlinearityKind::Zero, Some(0.0)).is_err());
    }

    #[test]
    fn dealiasing_removes_high_band() {
        let g = grid();
        // cos(10x)^2/2 = 1/4 + cos(20x)/4; mode 20 aliases to -12, outside |m| < 10
        let u = FieldRealization::from_fn(g, |x| (10.0 * x[0]).cos());
        let f = eval_nonlinearity(&NonlinearitySpec::burgers(), &u, true).unwrap();
        assert!(f.values.iter().all(|&v| (v - 0.25).abs() < 1e-14));
    }
}
