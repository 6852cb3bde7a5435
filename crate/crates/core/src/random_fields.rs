//! Homogeneous Gaussian random fields on the torus and their empirical
//! second-order statistics.
//!
//! A field is synthesized as `u(x) = m + Σ_k Z_k e^{ik·x}` where the complex
//! Gaussian coefficients satisfy `Z_{-k} = conj(Z_k)` and `E|Z_k|² = σ_k`.
//! The law is exactly invariant under grid translations and axis
//! reflections whenever `σ` is symmetric.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{config, Error, Result};
use crate::estimate::Estimate;
use crate::fft;
use crate::field::{pairwise_sum, FieldRealization};
use crate::grid::Grid;
use crate::seed;
use crate::spectral::MultiplierOp;

/// Discrete spectral measure: nonnegative mass per dual grid point plus the
/// deterministic mean `E u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    pub grid: Grid,
    pub weights: Vec<f64>,
    pub mean: f64,
}

impl SpectralMeasure {
    pub fn new(grid: Grid, weights: Vec<f64>, mean: f64) -> Result<Self> {
        if weights.len() != grid.size() {
            return Err(Error::GridMismatch(format!(
                "{} weights for {} modes",
                weights.len(),
                grid.size()
            )));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return config(format!("spectral weight at mode {i} is {w}; weights must be finite and >= 0"));
        }
        if !mean.is_finite() {
            return config("spectral measure mean must be finite");
        }
        for i in 0..grid.size() {
            let j = grid.negate(i);
            let (a, b) = (weights[i], weights[j]);
            if (a - b).abs() > 1e-12 * a.max(b) {
                return config(format!("weights not symmetric under k -> -k at mode {i}"));
            }
        }
        Ok(Self { grid, weights, mean })
    }

    pub fn zero(grid: Grid, mean: f64) -> Self {
        Self {
            grid,
            weights: vec![0.0; grid.size()],
            mean,
        }
    }

    /// `σ(X)`, the variance of the field.
    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// `E u² = m² + σ(X)`.
    pub fn second_moment(&self) -> f64 {
        self.mean * self.mean + self.total_mass()
    }

    /// Weights depend only on `|k|` (up to relative `tol` within each shell).
    pub fn is_isotropic(&self, tol: f64) -> bool {
        let norms = self.grid.wavenumber_norms();
        let mut shells: Vec<(f64, f64)> = Vec::new();
        for (i, &r) in norms.iter().enumerate() {
            if self.grid.touches_nyquist(i) {
                continue;
            }
            let w = self.weights[i];
            match shells.iter().find(|(sr, _)| (sr - r).abs() <= 1e-9 * r.max(1.0)) {
                Some(&(_, sw)) => {
                    if (sw - w).abs() > tol * sw.max(w).max(f64::MIN_POSITIVE) {
                        return false;
                    }
                }
                None => shells.push((r, w)),
            }
        }
        true
    }

    /// Mass concentrated on the pair `±κ`, where `modes` are integer mode
    /// numbers (second entry ignored in d = 1).
    pub fn two_mode(grid: Grid, modes: [i64; 2], mass: f64, mean: f64) -> Result<Self> {
        check_mass(mass)?;
        let n = grid.n() as i64;
        let idx = |m: i64| -> Result<usize> {
            if m.abs() >= n / 2 {
                return config(format!("mode number {m} is at or beyond Nyquist for n = {n}"));
            }
            Ok(m.rem_euclid(n) as usize)
        };
        let i = grid.flat_index([idx(modes[0])?, if grid.dim() == 2 { idx(modes[1])? } else { 0 }]);
        if i == 0 {
            return config("two-mode measure needs a nonzero mode");
        }
        let mut weights = vec![0.0; grid.size()];
        weights[i] = 0.5 * mass;
        weights[grid.negate(i)] = 0.5 * mass;
        Self::new(grid, weights, mean)
    }

    /// `σ_k ∝ e^{-|k|²/2w²}`, zero and Nyquist modes excluded.
    pub fn gaussian_bump(grid: Grid, width: f64, mass: f64, mean: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return config(format!("bump width must be positive, got {width}"));
        }
        Self::family(grid, mass, mean, |r| (-r * r / (2.0 * width * width)).exp())
    }

    /// `σ_k ∝ (1 + |k|²)^{-ν}`, zero and Nyquist modes excluded.
    pub fn power_law(grid: Grid, nu: f64, mass: f64, mean: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return config(format!("power-law exponent must be positive, got {nu}"));
        }
        Self::family(grid, mass, mean, |r| (1.0 + r * r).powf(-nu))
    }

    fn family(grid: Grid, mass: f64, mean: f64, profile: impl Fn(f64) -> f64) -> Result<Self> {
        check_mass(mass)?;
        let mut weights: Vec<f64> = (0..grid.size())
            .map(|i| {
                if i == 0 || grid.touches_nyquist(i) {
                    0.0
                } else {
                    profile(grid.wavenumber_norm(i))
                }
            })
            .collect();
        let total = pairwise_sum(&weights);
        if mass > 0.0 {
            if !(total > 0.0) {
                return config("measure profile has no mass on the grid");
            }
            for w in &mut weights {
                *w *= mass / total;
            }
        } else {
            weights.iter_mut().for_each(|w| *w = 0.0);
        }
        Self::new(grid, weights, mean)
    }

    /// Spectrum of `P_t u`: `e^{-2t|k|^{2s}} σ`.
    pub fn evolved(&self, t: f64, s: f64) -> Result<Self> {
        let op = MultiplierOp::semigroup(self.grid, t, s)?;
        let weights = self
            .weights
            .iter()
            .zip(&op.values)
            .map(|(w, m)| w * m.re * m.re)
            .collect();
        Ok(Self {
            grid: self.grid,
            weights,
            mean: self.mean,
        })
    }

    /// `Σ_k σ_k cos(k·y)`, the covariance at physical lag `y`.
    pub fn covariance_at(&self, lag: [f64; 2]) -> f64 {
        let terms: Vec<f64> = (0..self.grid.size())
            .filter(|&i| self.weights[i] != 0.0)
            .map(|i| {
                let k = self.grid.wavevector(i);
                self.weights[i] * (k[0] * lag[0] + k[1] * lag[1]).cos()
            })
            .collect();
        pairwise_sum(&terms)
    }

    /// `Σ_k |k|^{2a} σ_k`.
    pub fn spectral_moment(&self, a: f64) -> f64 {
        let terms: Vec<f64> = (0..self.grid.size())
            .map(|i| {
                let r = self.grid.wavenumber_norm(i);
                if r == 0.0 {
                    0.0
                } else {
                    r.powf(2.0 * a) * self.weights[i]
                }
            })
            .collect();
        pairwise_sum(&terms)
    }
}

fn check_mass(mass: f64) -> Result<()> {
    if !(mass >= 0.0 && mass.is_finite()) {
        return config(format!("total mass must be >= 0, got {mass}"));
    }
    Ok(())
}

/// Serializable description of a built-in measure family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    TwoMode {
        modes: [i64; 2],
        mass: f64,
        #[serde(default)]
        mean: f64,
    },
    GaussianBump {
        width: f64,
        mass: f64,
        #[serde(default)]
        mean: f64,
    },
    PowerLaw {
        nu: f64,
        mass: f64,
        #[serde(default)]
        mean: f64,
    },
}

impl MeasureSpec {
    pub fn build(&self, grid: Grid) -> Result<SpectralMeasure> {
        match *self {
            MeasureSpec::TwoMode { modes, mass, mean } => SpectralMeasure::two_mode(grid, modes, mass, mean),
            MeasureSpec::GaussianBump { width, mass, mean } => {
                SpectralMeasure::gaussian_bump(grid, width, mass, mean)
            }
            MeasureSpec::PowerLaw { nu, mass, mean } => SpectralMeasure::power_law(grid, nu, mass, mean),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MeasureSpec::TwoMode { .. } => "two_mode",
            MeasureSpec::GaussianBump { .. } => "gaussian_bump",
            MeasureSpec::PowerLaw { .. } => "power_law",
        }
    }
}

/// Reads a [`MeasureSpec`] from a TOML file and builds it on `grid`.
pub fn load_measure(path: &Path, grid: Grid) -> Result<SpectralMeasure> {
    let text = std::fs::read_to_string(path)?;
    let spec: MeasureSpec = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    spec.build(grid)
}

/// Hermitian Gaussian coefficients standing in for the orthogonal random
/// measure `Z(dξ)`.
#[derive(Debug, Clone)]
pub struct SpectralNoise {
    pub coeffs: Vec<Complex64>,
    pub seed: u64,
    /// Number of standard normals consumed.
    pub counter: u64,
}

impl SpectralNoise {
    /// Draws two normals per conjugate pair and one per self-conjugate mode,
    /// in flat index order, regardless of the weights. The stream layout
    /// therefore does not depend on the measure.
    pub fn draw(measure: &SpectralMeasure, seed: u64) -> Self {
        let grid = measure.grid;
        let mut rng = seed::rng(seed);
        let mut coeffs = vec![Complex64::default(); grid.size()];
        let mut counter = 0u64;
        for i in 0..grid.size() {
            let j = grid.negate(i);
            if j < i {
                continue;
            }
            let w = measure.weights[i];
            if i == j {
                let a: f64 = StandardNormal.sample(&mut rng);
                counter += 1;
                coeffs[i] = Complex64::new(w.sqrt() * a, 0.0);
            } else {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                counter += 2;
                let amp = (0.5 * w).sqrt();
                coeffs[i] = Complex64::new(amp * a, amp * b);
                coeffs[j] = coeffs[i].conj();
            }
        }
        coeffs[0] += measure.mean;
        Self {
            coeffs,
            seed,
            counter,
        }
    }

    pub fn is_hermitian(&self, grid: &Grid) -> bool {
        (0..grid.size()).all(|i| self.coeffs[grid.negate(i)] == self.coeffs[i].conj())
    }
}

/// One realization of the field with spectral measure `measure`.
pub fn sample_field(measure: &SpectralMeasure, seed: u64) -> FieldRealization {
    let grid = measure.grid;
    let noise = SpectralNoise::draw(measure, seed);
    let scale = grid.size() as f64;
    let spectrum = noise.coeffs.into_iter().map(|c| c * scale).collect();
    let (values, _) = fft::inverse_real(&grid, spectrum);
    FieldRealization {
        grid,
        values,
        time: 0.0,
    }
}

/// Realizations sharing a grid and a timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub members: Vec<FieldRealization>,
    pub time: f64,
    pub seeds: Vec<u64>,
}

impl Ensemble {
    pub fn new(members: Vec<FieldRealization>, seeds: Vec<u64>) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyEnsemble)?;
        let (grid, time) = (first.grid, first.time);
        for m in &members {
            m.grid.ensure_same(&grid)?;
            if m.time != time {
                return config(format!("ensemble members at times {} and {}", time, m.time));
            }
        }
        if seeds.len() != members.len() {
            return config("one seed per ensemble member is required");
        }
        Ok(Self {
            members,
            time,
            seeds,
        })
    }

    /// `count` members with seeds split from `master`.
    pub fn sample(measure: &SpectralMeasure, master: u64, count: usize) -> Result<Self> {
        let seeds = seed::member_seeds(master, count);
        let members = seeds.iter().map(|&s| sample_field(measure, s)).collect();
        Self::new(members, seeds)
    }

    pub fn grid(&self) -> Grid {
        self.members[0].grid
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn map(&self, f: impl Fn(&FieldRealization) -> Result<FieldRealization>) -> Result<Self> {
        let members = self.members.iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(members, self.seeds.clone())
    }

    /// Grand mean over members and space.
    pub fn mean(&self) -> f64 {
        let means: Vec<f64> = self.members.iter().map(|m| m.mean()).collect();
        pairwise_sum(&means) / means.len() as f64
    }

    /// Member-level estimate of a spatially averaged statistic.
    pub fn estimate(&self, stat: impl Fn(&FieldRealization) -> f64) -> Estimate {
        let values: Vec<f64> = self.members.iter().map(stat).collect();
        Estimate::from_members(&values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    /// Lag in grid steps.
    pub lag: [i64; 2],
    pub value: f64,
    pub stderr: f64,
}

fn check_lag(grid: &Grid, lag: [i64; 2]) -> Result<()> {
    let n = grid.n() as i64;
    let inside = |o: i64| o.abs() < n;
    if !inside(lag[0]) || !inside(lag[1]) || (grid.dim() == 1 && lag[1] != 0) {
        return config(format!("lag {lag:?} outside the grid"));
    }
    Ok(())
}

/// `B̂(y) = E (u(x) - m̂)(u(x+y) - m̂)` averaged over members and `x`.
pub fn estimate_covariance(ens: &Ensemble, lags: &[[i64; 2]]) -> Result<Vec<CovarianceEstimate>> {
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let grid = ens.grid();
    for &lag in lags {
        check_lag(&grid, lag)?;
    }
    let m = ens.mean();
    Ok(lags
        .iter()
        .map(|&lag| {
            let est = ens.estimate(|f| {
                let prods: Vec<f64> = (0..grid.size())
                    .map(|i| (f.values[i] - m) * (f.values[grid.shift_index(i, lag)] - m))
                    .collect();
                pairwise_sum(&prods) / prods.len() as f64
            });
            CovarianceEstimate {
                lag,
                value: est.value,
                stderr: est.stderr,
            }
        })
        .collect())
}

/// Averaged periodogram with per-mode standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    pub measure: SpectralMeasure,
    pub stderr: Vec<f64>,
    pub members: usize,
}

/// Normalized Fourier coefficients `Z_k = û(k) / n^d` of one realization.
pub fn coefficients(field: &FieldRealization) -> Vec<Complex64> {
    let scale = 1.0 / field.grid.size() as f64;
    fft::forward_real(&field.grid, &field.values)
        .into_iter()
        .map(|c| c * scale)
        .collect()
}

/// Per-mode average of `|Z_k|²` over members (zero mode taken about the
/// grand mean), symmetrized under `k → -k`. By Parseval the total mass
/// equals the pooled empirical variance.
pub fn estimate_spectrum(ens: &Ensemble) -> Result<SpectrumEstimate> {
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let coeffs: Vec<Vec<Complex64>> = ens.members.iter().map(coefficients).collect();
    Ok(spectrum_from_coefficients(ens.grid(), &coeffs))
}

pub fn spectrum_from_coefficients(grid: Grid, coeffs: &[Vec<Complex64>]) -> SpectrumEstimate {
    let n_members = coeffs.len();
    let zero_modes: Vec<f64> = coeffs.iter().map(|c| c[0].re).collect();
    let mean = pairwise_sum(&zero_modes) / n_members as f64;
    let mut weights = vec![0.0; grid.size()];
    let mut stderr = vec![0.0; grid.size()];
    let mut column = vec![0.0; n_members];
    for i in 0..grid.size() {
        let j = grid.negate(i);
        if j < i {
            continue;
        }
        for (slot, c) in column.iter_mut().zip(coeffs) {
            *slot = if i == 0 {
                (c[0].re - mean).powi(2)
            } else {
                0.5 * (c[i].norm_sqr() + c[j].norm_sqr())
            };
        }
        let est = Estimate::from_members(&column);
        weights[i] = est.value;
        weights[j] = est.value;
        stderr[i] = est.stderr;
        stderr[j] = est.stderr;
    }
    SpectrumEstimate {
        measure: SpectralMeasure {
            grid,
            weights,
            mean,
        },
        stderr,
        members: n_members,
    }
}

/// `‖u‖_{α,2} = (Σ_k (1 + |k|^{2α}) σ_k)^{1/2}`.
pub fn sobolev_norm(measure: &SpectralMeasure, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return config(format!("Sobolev order must be >= 0, got {alpha}"));
    }
    let terms: Vec<f64> = (0..measure.grid.size())
        .map(|i| (1.0 + measure.grid.wavenumber_norm(i).powf(2.0 * alpha)) * measure.weights[i])
        .collect();
    Ok(pairwise_sum(&terms).sqrt())
}

/// Upper bound on `‖u‖_{β,2}` from `‖u‖_{α,2}` (`α ≥ β`) by Jensen's
/// inequality for the concave map `r ↦ r^{β/α}`:
/// `Σ|k|^{2β}σ ≤ M^{1-β/α} (Σ|k|^{2α}σ)^{β/α}` with `M = σ(X)`.
pub fn jensen_bound(measure: &SpectralMeasure, beta: f64, alpha: f64) -> Result<f64> {
    if !(alpha >= beta && beta >= 0.0) {
        return config(format!("need alpha >= beta >= 0, got alpha = {alpha}, beta = {beta}"));
    }
    let mass = measure.total_mass();
    if alpha == 0.0 || mass == 0.0 {
        return sobolev_norm(measure, beta);
    }
    let high = measure.spectral_moment(alpha);
    let theta = beta / alpha;
    Ok((mass + mass.powf(1.0 - theta) * high.powf(theta)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityStat {
    pub estimate: f64,
    pub stderr: f64,
    pub z_score: f64,
}

/// Relative floor applied to standard errors of quantities that vanish
/// identically up to roundoff.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// Monte Carlo estimate of `E[(∇_z f(u))(x) g(u(x))]`, averaged over `x` and
/// members. With `f` the identity this is the plain `E[∇_z u · g(u)]`.
pub fn directional_orthogonality_stat(
    ens: &Ensemble,
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    z: [f64; 2],
) -> Result<OrthogonalityStat> {
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let op = MultiplierOp::directional_derivative(ens.grid(), z)?;
    let mut values = Vec::with_capacity(ens.len());
    let mut grad_sq = Vec::with_capacity(ens.len());
    let mut g_sq = Vec::with_capacity(ens.len());
    for member in &ens.members {
        let df = crate::spectral::apply_multiplier(&member.map(&f), &op)?;
        let gu = member.map(&g);
        let prods: Vec<f64> = df.values.iter().zip(&gu.values).map(|(a, b)| a * b).collect();
        values.push(pairwise_sum(&prods) / prods.len() as f64);
        grad_sq.push(df.abs_moment(2.0));
        g_sq.push(gu.abs_moment(2.0));
    }
    let est = Estimate::from_members(&values);
    let scale = (pairwise_sum(&grad_sq) / ens.len() as f64).sqrt()
        * (pairwise_sum(&g_sq) / ens.len() as f64).sqrt();
    Ok(OrthogonalityStat {
        estimate: est.value,
        stderr: est.stderr,
        z_score: est.z_score(0.0, ROUNDOFF_FLOOR * scale),
    })
}

/// One shift/reflection comparison in a stationarity report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityEntry {
    pub shift: [i64; 2],
    pub kind: String,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub entries: Vec<StationarityEntry>,
    /// Largest `|z|` over all entries.
    pub max_discrepancy: f64,
}

impl StationarityReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_discrepancy <= threshold
    }
}

/// Compares first and second moments at the grid origin with those at each
/// shifted location, and at each shifted location with its reflection. Each
/// comparison is a paired difference over members, scored in units of its
/// standard error.
pub fn stationarity_test(ens: &Ensemble, shifts: &[[i64; 2]]) -> Result<StationarityReport> {
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let grid = ens.grid();
    for &s in shifts {
        check_lag(&grid, s)?;
    }
    let scale = ens.estimate(|f| f.abs_moment(2.0)).value;
    let mut entries = Vec::new();
    let mut push = |shift: [i64; 2], kind: &str, a: usize, b: usize, power: i32| {
        let diffs: Vec<f64> = ens
            .members
            .iter()
            .map(|f| f.values[b].powi(power) - f.values[a].powi(power))
            .collect();
        let z = Estimate::from_members(&diffs).z_score(0.0, ROUNDOFF_FLOOR * scale.max(f64::MIN_POSITIVE));
        entries.push(StationarityEntry {
            shift,
            kind: kind.to_string(),
            z_score: z,
        });
    };
    for &s in shifts {
        let shifted = grid.shift_index(0, s);
        let reflected = grid.shift_index(0, [-s[0], -s[1]]);
        push(s, "translation/mean", 0, shifted, 1);
        push(s, "translation/second", 0, shifted, 2);
        push(s, "reflection/mean", reflected, shifted, 1);
        push(s, "reflection/second", reflected, shifted, 2);
    }
    let max_discrepancy = entries.iter().fold(0.0f64, |m, e| m.max(e.z_score.abs()));
    Ok(StationarityReport {
        entries,
        max_discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::periodic_1d(64).unwrap()
    }

    #[test]
    fn rejects_negative_or_asymmetric_weights() {
        let g = grid();
        let mut w = vec![0.0; 64];
        w[3] = -1.0;
        w[61] = -1.0;
        assert!(SpectralMeasure::new(g, w.clone(), 0.0).is_err());
        w[3] = 1.0;
        w[61] = 0.5;
        assert!(SpectralMeasure::new(g, w, 0.0).is_err());
    }

    #[test]
    fn zero_measure_gives_constant_field() {
        let m = SpectralMeasure::zero(grid(), 1.7);
        let f = sample_field(&m, 9);
        assert!(f.values.iter().all(|&v| (v - 1.7).abs() < 1e-14));
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = SpectralMeasure::power_law(grid(), 1.0, 2.0, 0.3).unwrap();
        let a = sample_field(&m, 1234);
        let b = sample_field(&m, 1234);
        assert_eq!(a, b);
        assert_ne!(a, sample_field(&m, 1235));
    }

    #[test]
    fn noise_is_hermitian_and_layout_fixed() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let m = SpectralMeasure::gaussian_bump(g, 10.0, 1.0, 0.0).unwrap();
        let noise = SpectralNoise::draw(&m, 5);
        assert!(noise.is_hermitian(&g));
        // 4 self-conjugate modes, 30 conjugate pairs
        assert_eq!(noise.counter, 4 + 2 * 30);
        let zero = SpectralNoise::draw(&SpectralMeasure::zero(g, 0.0), 5);
        assert_eq!(zero.counter, noise.counter);
    }

    #[test]
    fn families_are_normalized_and_isotropic() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        for m in [
            SpectralMeasure::gaussian_bump(g, 2.0, 3.0, 0.0).unwrap(),
            SpectralMeasure::power_law(g, 1.5, 3.0, 0.0).unwrap(),
        ] {
            assert!((m.total_mass() - 3.0).abs() < 1e-12);
            assert!(m.is_isotropic(1e-12));
            assert_eq!(m.weights[0], 0.0);
        }
        let two = SpectralMeasure::two_mode(g, [1, 2], 1.0, 0.0).unwrap();
        assert!(!two.is_isotropic(1e-12));
        assert!(SpectralMeasure::two_mode(g, [8, 0], 1.0, 0.0).is_err());
    }

    #[test]
    fn sobolev_examples() {
        let g = grid();
        let m = SpectralMeasure::two_mode(g, [2, 0], 1.0, 0.0).unwrap();
        assert!((sobolev_norm(&m, 1.0).unwrap() - 5f64.sqrt()).abs() < 1e-14);
        let p = SpectralMeasure::power_law(g, 1.0, 2.5, 0.0).unwrap();
        assert!((sobolev_norm(&p, 0.0).unwrap() - (2.0 * 2.5f64).sqrt()).abs() < 1e-12);
        let mut last = 0.0;
        for a in [0.0, 0.25, 0.5, 1.0, 1.5, 2.0] {
            let v = sobolev_norm(&p, a).unwrap();
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn jensen_ordering_holds() {
        let g = grid();
        for m in [
            SpectralMeasure::power_law(g, 0.8, 1.0, 0.0).unwrap(),
            SpectralMeasure::gaussian_bump(g, 3.0, 2.0, 0.0).unwrap(),
            SpectralMeasure::two_mode(g, [5, 0], 0.5, 0.0).unwrap(),
        ] {
            for (beta, alpha) in [(0.0, 1.0), (0.3, 0.9), (0.5, 2.0), (1.0, 1.0)] {
                let lo = sobolev_norm(&m, beta).unwrap();
                let bound = jensen_bound(&m, beta, alpha).unwrap();
                let hi = sobolev_norm(&m, alpha).unwrap();
                assert!(lo <= bound * (1.0 + 1e-12));
                assert!(bound <= 2f64.sqrt() * hi * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn constant_ensemble_statistics() {
        let g = grid();
        let m = SpectralMeasure::zero(g, 2.0);
        let ens = Ensemble::sample(&m, 1, 20).unwrap();
        for c in estimate_covariance(&ens, &[[0, 0], [3, 0]]).unwrap() {
            assert!(c.value.abs() < 1e-24);
        }
        let spec = estimate_spectrum(&ens).unwrap();
        assert!(spec.measure.weights.iter().all(|w| w.abs() < 1e-24));
        assert!((spec.measure.mean - 2.0).abs() < 1e-14);
        let report = stationarity_test(&ens, &[[5, 0], [17, 0]]).unwrap();
        assert_eq!(report.max_discrepancy, 0.0);
        let stat = directional_orthogonality_stat(&ens, |u| u, |u| u, [1.0, 0.0]).unwrap();
        assert_eq!(stat.z_score, 0.0);
    }

    #[test]
    fn covariance_lag_checks() {
        let ens = Ensemble::sample(&SpectralMeasure::zero(grid(), 0.0), 1, 2).unwrap();
        assert!(estimate_covariance(&ens, &[[64, 0]]).is_err());
        assert!(estimate_covariance(&ens, &[[1, 1]]).is_err());
    }

    #[test]
    fn zero_lag_covariance_is_variance() {
        let m = SpectralMeasure::gaussian_bump(grid(), 4.0, 1.0, 0.5).unwrap();
        let ens = Ensemble::sample(&m, 3, 50).unwrap();
        let b0 = estimate_covariance(&ens, &[[0, 0]]).unwrap()[0].value;
        let mean = ens.mean();
        let var = ens.estimate(|f| f.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 64.0);
        assert!((b0 - var.value).abs() < 1e-13);
        assert!(b0 >= 0.0);
        let spec = estimate_spectrum(&ens).unwrap();
        assert!((spec.measure.total_mass() - b0).abs() < 1e-12);
    }

    #[test]
    fn derivative_of_constant_is_orthogonal() {
        let m = SpectralMeasure::power_law(grid(), 1.0, 1.0, 0.0).unwrap();
        let ens = Ensemble::sample(&m, 8, 10).unwrap();
        let stat = directional_orthogonality_stat(&ens, |u| u, |_| 1.0, [1.0, 0.0]).unwrap();
        assert!(stat.estimate.abs() < 1e-14);
    }

    #[test]
    fn load_measure_from_toml() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.toml");
        std::fs::write(&path, "family = \"gaussian_bump\"\nwidth = 2.0\nmass = 1.5\n").unwrap();
        let m = load_measure(&path, grid()).unwrap();
        assert!((m.total_mass() - 1.5).abs() < 1e-12);
        std::fs::write(&path, "family = \"nope\"\nmass = 1.0\n").unwrap();
        assert!(matches!(load_measure(&path, grid()), Err(Error::Parse(_))));
    }
}
