//! Mild solutions of `∂t u + (-Δ)^s u = ∇_z f(u)`.
//!
//! The Duhamel map
//!
//! ```text
//! F(u)(t) = P_t u(0) + ∫_0^t ∇_z P_{t-τ} f(u(τ)) dτ
//! ```
//!
//! is discretized on a time grid by product integration: on each
//! subinterval `f(u(τ))` is replaced by the linear interpolant of its
//! endpoint values and the time integral against `e^{-(t-τ)|k|^{2s}}` is
//! evaluated exactly for every Fourier mode. The integral then obeys the
//! one-step recursion
//!
//! ```text
//! F̂_{j+1} = e^{-λh} F̂_j + i(z·k) (w₀ ĝ_j + w₁ ĝ_{j+1}),   λ = |k|^{2s},
//! ```
//!
//! so a global Picard sweep costs one forward and one inverse transform per
//! node. The same recursion, solved node by node, gives the marching solver
//! [`step_solve`]; both converge to the same discrete fixed point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{config, Error, Result};
use crate::fft;
use crate::field::{pairwise_sum, FieldRealization};
use crate::grid::Grid;
use crate::nonlinearity::{cutoff, dealias_mask, NonlinearitySpec};
use crate::spectral::{gradient_constant, kernel_gradient_constant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Dealias {
    /// On for polynomial fluxes, off otherwise.
    #[default]
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub s: f64,
    pub z: [f64; 2],
    pub time_grid: Vec<f64>,
    /// Bielecki weight `K` in `sup_t e^{-tK} ‖u(t)‖`.
    pub bielecki_k: f64,
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub dealias: Dealias,
    /// Inner fixed-point iterations per step of [`step_solve`].
    #[serde(default = "default_max_inner")]
    pub max_inner: usize,
    /// Number of subintervals per Picard window in [`solve_mild`]; `None`
    /// runs one global iteration over the whole grid.
    #[serde(default)]
    pub window: Option<usize>,
}

fn default_max_inner() -> usize {
    5
}

impl SolverConfig {
    /// Uniform grid `0, T/steps, …, T` with defaults for everything else.
    pub fn uniform(s: f64, t_final: f64, steps: usize) -> Self {
        Self {
            s,
            z: [1.0, 0.0],
            time_grid: uniform_grid(t_final, steps),
            bielecki_k: 1.0,
            tol: 1e-8,
            max_iter: 50,
            dealias: Dealias::Auto,
            max_inner: default_max_inner(),
            window: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.5 && self.s <= 1.0) {
            return config(format!("solver needs s in (1/2, 1], got {}", self.s));
        }
        if self.time_grid.len() < 2 || self.time_grid[0] != 0.0 {
            return config("time grid must start at 0 and contain at least two nodes");
        }
        if self
            .time_grid
            .windows(2)
            .any(|w| !(w[1] > w[0] && w[1].is_finite()))
        {
            return config("time grid must be strictly increasing and finite");
        }
        if !(self.bielecki_k >= 0.0 && self.bielecki_k.is_finite()) {
            return config(format!("Bielecki weight must be >= 0, got {}", self.bielecki_k));
        }
        if !(self.tol > 0.0) {
            return config(format!("tolerance must be > 0, got {}", self.tol));
        }
        if self.max_iter == 0 || self.max_inner == 0 {
            return config("iteration caps must be >= 1");
        }
        if self.window == Some(0) {
            return config("Picard window must contain at least one interval");
        }
        if !(self.z[0].is_finite() && self.z[1].is_finite()) || (self.z[0] == 0.0 && self.z[1] == 0.0) {
            return config("direction z must be nonzero and finite");
        }
        Ok(())
    }

    pub fn dealias_for(&self, spec: &NonlinearitySpec) -> bool {
        match self.dealias {
            Dealias::Auto => spec.is_polynomial(),
            Dealias::On => true,
            Dealias::Off => false,
        }
    }

    pub fn final_time(&self) -> f64 {
        *self.time_grid.last().unwrap_or(&0.0)
    }
}

pub fn uniform_grid(t_final: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|j| t_final * j as f64 / steps as f64)
        .collect()
}

/// One realization sampled at the nodes of a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<FieldRealization>,
}

impl Trajectory {
    pub fn new(states: Vec<FieldRealization>) -> Result<Self> {
        let first = states.first().ok_or_else(|| Error::Config("empty trajectory".into()))?;
        for st in &states {
            st.grid.ensure_same(&first.grid)?;
        }
        if states.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return config("trajectory times must be strictly increasing");
        }
        Ok(Self { states })
    }

    pub fn grid(&self) -> Grid {
        self.states[0].grid
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.time).collect()
    }

    pub fn initial(&self) -> &FieldRealization {
        &self.states[0]
    }

    pub fn final_state(&self) -> &FieldRealization {
        self.states.last().expect("trajectory is nonempty")
    }

    /// `sup_j` of the root-mean-square distance between matching nodes.
    pub fn sup_rms_distance(&self, other: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .fold(0.0f64, |m, (a, b)| m.max(a.rms_distance(b)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardDiagnostics {
    /// Discrete Bielecki norm (p = 2, spatial averaging) of `u_{m+1} - u_m`.
    pub residuals: Vec<f64>,
    /// `residuals[m] / residuals[m-1]`; empty slot for the first iteration.
    pub ratios: Vec<Option<f64>>,
    /// `ρ(K)` with the L² multiplier constant.
    pub bound: Option<f64>,
    /// The same bound with the L¹ kernel-gradient constant.
    pub kernel_bound: Option<f64>,
    pub bielecki_k: f64,
    pub converged: bool,
}

impl PicardDiagnostics {
    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }

    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().unwrap_or(&f64::NAN)
    }

    /// Largest ratio among iterations whose previous residual exceeded
    /// `floor`; ratios below roundoff carry no information.
    pub fn max_ratio_above(&self, floor: f64) -> Option<f64> {
        self.ratios
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(m, _)| self.residuals[m - 1] > floor)
            .filter_map(|(_, r)| *r)
            .reduce(f64::max)
    }

    /// Residuals nonincreasing after the first iteration, with relative
    /// `slack`, as long as they stay above `floor`.
    pub fn is_monotone(&self, slack: f64, floor: f64) -> bool {
        self.residuals
            .windows(2)
            .skip(1)
            .all(|w| w[0] <= floor || w[1] <= w[0] * (1.0 + slack))
    }

    /// One line per iteration: `index residual ratio`.
    pub fn to_records(&self) -> String {
        let mut out = String::from("iteration\tresidual\tratio\n");
        for (m, (r, q)) in self.residuals.iter().zip(&self.ratios).enumerate() {
            let q = q.map_or("-".to_string(), |q| format!("{q:.6e}"));
            let _ = writeln!(out, "{}\t{r:.6e}\t{q}", m + 1);
        }
        out
    }
}

/// `ρ(K) = c_s L K^{-1+1/2s} Γ(1 - 1/2s)` with the L² constant
/// `c_s = sup_r r e^{-r^{2s}}`.
pub fn contraction_bound(s: f64, lipschitz: f64, k: f64) -> Result<f64> {
    contraction_bound_with(gradient_constant_checked(s)?, s, lipschitz, k)
}

/// [`contraction_bound`] with the kernel constant `‖∇_z p_1‖_{L¹}`.
pub fn kernel_contraction_bound(s: f64, lipschitz: f64, k: f64) -> Result<f64> {
    gradient_constant_checked(s)?;
    contraction_bound_with(kernel_gradient_constant(s)?, s, lipschitz, k)
}

fn gradient_constant_checked(s: f64) -> Result<f64> {
    if !(s > 0.5 && s <= 1.0) {
        return config(format!("contraction estimate needs s in (1/2, 1], got {s}"));
    }
    gradient_constant(s)
}

fn contraction_bound_with(c: f64, s: f64, lipschitz: f64, k: f64) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return config(format!("Bielecki weight must be > 0, got {k}"));
    }
    if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
        return config(format!("Lipschitz constant must be >= 0, got {lipschitz}"));
    }
    let e = 1.0 / (2.0 * s);
    Ok(c * lipschitz * k.powf(-1.0 + e) * gamma(1.0 - e))
}

/// Threshold `K₀ = (c_s L Γ(1-1/2s))^{2s/(2s-1)}` at which `ρ(K₀) = 1`,
/// evaluated in log space.
pub fn minimal_k(s: f64, lipschitz: f64) -> Result<f64> {
    let c = gradient_constant_checked(s)?;
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return config(format!("minimal K needs L > 0, got {lipschitz}"));
    }
    let e = 1.0 / (2.0 * s);
    let log_a = c.ln() + lipschitz.ln() + gamma(1.0 - e).ln();
    let k0 = (log_a * (2.0 * s) / (2.0 * s - 1.0)).exp();
    if !(k0.is_finite() && k0 > 0.0) {
        return Err(Error::NumericOverflow {
            context: format!("minimal K for s = {s}, L = {lipschitz}"),
        });
    }
    Ok(k0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentOrder {
    Finite(f64),
    Infinity,
}

/// `sup_j e^{-t_j K} (E_x,ω |u(t_j)|^p)^{1/p}` over one or more
/// trajectories on a common time grid; `p = ∞` takes the grid maximum.
pub fn bielecki_norm(trajs: &[Trajectory], k: f64, p: MomentOrder) -> Result<f64> {
    let first = trajs.first().ok_or(Error::EmptyEnsemble)?;
    let nodes = first.states.len();
    if trajs.iter().any(|t| t.states.len() != nodes) {
        return config("trajectories must share the time grid");
    }
    if let MomentOrder::Finite(p) = p {
        if !(p >= 1.0) {
            return config(format!("moment order must be >= 1, got {p}"));
        }
    }
    let mut best = 0.0f64;
    for j in 0..nodes {
        let t = first.states[j].time;
        let size = match p {
            MomentOrder::Infinity => trajs.iter().fold(0.0f64, |m, tr| m.max(tr.states[j].sup_norm())),
            MomentOrder::Finite(p) => {
                let per: Vec<f64> = trajs.iter().map(|tr| tr.states[j].abs_moment(p)).collect();
                (pairwise_sum(&per) / per.len() as f64).powf(1.0 / p)
            }
        };
        best = best.max((-t * k).exp() * size);
    }
    Ok(best)
}

/// Product-integration coefficients for one step length.
#[derive(Debug)]
struct StepCoeffs {
    decay: Vec<f64>,
    w_left: Vec<f64>,
    w_right: Vec<f64>,
}

/// `φ(a) = (1 - e^{-a})/a` and `ψ(a) = (1 - e^{-a}(1+a))/a²`, the integrals
/// `h⁻¹∫_0^h e^{-λσ}dσ` and `h⁻²∫_0^h σ e^{-λσ}dσ` with `a = λh`.
pub(crate) fn phi_psi(a: f64) -> (f64, f64) {
    if a < 0.1 {
        // alternating series, 14 terms are far below roundoff for a < 0.1
        let (mut phi, mut psi) = (0.0, 0.0);
        let mut term = 1.0; // (-a)^m / m!
        for m in 0..14 {
            let mf = m as f64;
            phi += term / (mf + 1.0);
            psi += term / ((mf + 1.0) * (mf + 2.0)) * (mf + 1.0);
            term *= -a / (mf + 1.0);
        }
        (phi, psi)
    } else {
        let one_minus = -(-a).exp_m1();
        let phi = one_minus / a;
        let psi = (one_minus - a * (-a).exp()) / (a * a);
        (phi, psi)
    }
}

impl StepCoeffs {
    fn new(lambda: &[f64], h: f64) -> Self {
        let mut decay = Vec::with_capacity(lambda.len());
        let mut w_left = Vec::with_capacity(lambda.len());
        let mut w_right = Vec::with_capacity(lambda.len());
        for &l in lambda {
            let a = l * h;
            let (phi, psi) = phi_psi(a);
            decay.push((-a).exp());
            w_left.push(h * psi);
            w_right.push(h * (phi - psi));
        }
        Self {
            decay,
            w_left,
            w_right,
        }
    }
}

/// Per-mode data shared by the Duhamel sweep and the marching solver.
struct Propagator {
    grid: Grid,
    /// `z·k`, zero on self-conjugate modes.
    deriv: Vec<f64>,
    mask: Option<Vec<bool>>,
    steps: Vec<Arc<StepCoeffs>>,
}

impl Propagator {
    fn new(grid: Grid, cfg: &SolverConfig, spec: &NonlinearitySpec) -> Result<Self> {
        cfg.validate()?;
        spec.validate()?;
        let z = grid.normalize_direction(cfg.z)?;
        let lambda: Vec<f64> = (0..grid.size())
            .map(|i| {
                let r = grid.wavenumber_norm(i);
                if r == 0.0 {
                    0.0
                } else {
                    r.powf(2.0 * cfg.s)
                }
            })
            .collect();
        let deriv = (0..grid.size())
            .map(|i| {
                if grid.is_self_conjugate(i) {
                    0.0
                } else {
                    let k = grid.wavevector(i);
                    z[0] * k[0] + z[1] * k[1]
                }
            })
            .collect();
        let mut cache: HashMap<u64, Arc<StepCoeffs>> = HashMap::new();
        let steps = cfg
            .time_grid
            .windows(2)
            .map(|w| {
                let h = w[1] - w[0];
                cache
                    .entry(h.to_bits())
                    .or_insert_with(|| Arc::new(StepCoeffs::new(&lambda, h)))
                    .clone()
            })
            .collect();
        let mask = cfg.dealias_for(spec).then(|| dealias_mask(&grid));
        Ok(Self {
            grid,
            deriv,
            mask,
            steps,
        })
    }

    fn nonlinear_hat(&self, spec: &NonlinearitySpec, field: &FieldRealization) -> Result<Vec<Complex64>> {
        let mut g = Vec::with_capacity(field.values.len());
        for &v in &field.values {
            let y = spec.eval(v);
            if !y.is_finite() {
                return Err(Error::NumericOverflow {
                    context: format!("nonlinearity at t = {}", field.time),
                });
            }
            g.push(Complex64::new(y, 0.0));
        }
        fft::forward_in_place(&self.grid, &mut g);
        if let Some(mask) = &self.mask {
            for (c, keep) in g.iter_mut().zip(mask) {
                if !keep {
                    *c = Complex64::default();
                }
            }
        }
        Ok(g)
    }

    /// `e^{-λh} û + i(z·k) w₀ ĝ_left` for step `j`.
    fn step_base(&self, j: usize, u_hat: &[Complex64], g_left: &[Complex64]) -> Vec<Complex64> {
        let c = &self.steps[j];
        (0..u_hat.len())
            .map(|i| u_hat[i] * c.decay[i] + Complex64::new(0.0, self.deriv[i] * c.w_left[i]) * g_left[i])
            .collect()
    }

    fn add_right(&self, j: usize, base: &[Complex64], g_right: &[Complex64]) -> Vec<Complex64> {
        let c = &self.steps[j];
        (0..base.len())
            .map(|i| base[i] + Complex64::new(0.0, self.deriv[i] * c.w_right[i]) * g_right[i])
            .collect()
    }

    /// Full sweep of the discrete Duhamel map; `g_hats = None` gives the
    /// linear flow.
    fn sweep(&self, u0_hat: &[Complex64], g_hats: Option<&[Vec<Complex64>]>) -> Vec<Vec<Complex64>> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(u0_hat.to_vec());
        for j in 0..self.steps.len() {
            let prev = &out[j];
            let next = match g_hats {
                Some(g) => {
                    let base = self.step_base(j, prev, &g[j]);
                    self.add_right(j, &base, &g[j + 1])
                }
                None => {
                    let c = &self.steps[j];
                    prev.iter().zip(&c.decay).map(|(u, d)| u * d).collect()
                }
            };
            out.push(next);
        }
        out
    }

    fn to_field(&self, hat: &[Complex64], time: f64) -> FieldRealization {
        let (values, _) = fft::inverse_real(&self.grid, hat.to_vec());
        FieldRealization {
            grid: self.grid,
            values,
            time,
        }
    }

    /// Root-mean-square of the field with spectrum `a - b` (Parseval).
    fn rms_diff(&self, a: &[Complex64], b: &[Complex64]) -> f64 {
        let terms: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).collect();
        pairwise_sum(&terms).sqrt() / self.grid.size() as f64
    }
}

fn check_initial(u0: &FieldRealization) -> Result<()> {
    u0.ensure_finite("initial data")
}

/// Applies the discrete Duhamel map to a trajectory given on the solver's
/// time grid.
pub fn duhamel_apply(traj: &Trajectory, spec: &NonlinearitySpec, cfg: &SolverConfig) -> Result<Trajectory> {
    let grid = traj.grid();
    let prop = Propagator::new(grid, cfg, spec)?;
    let times = traj.times();
    if times.len() != cfg.time_grid.len()
        || times
            .iter()
            .zip(&cfg.time_grid)
            .any(|(a, b)| (a - b).abs() > 1e-12 * b.abs().max(1.0))
    {
        return config("trajectory is not sampled on the solver time grid");
    }
    let u0_hat = fft::forward_real(&grid, &traj.states[0].values);
    let g_hats = traj
        .states
        .iter()
        .map(|st| prop.nonlinear_hat(spec, st))
        .collect::<Result<Vec<_>>>()?;
    let hats = prop.sweep(&u0_hat, Some(&g_hats));
    Trajectory::new(
        hats.iter()
            .zip(&cfg.time_grid)
            .map(|(h, &t)| prop.to_field(h, t))
            .collect(),
    )
}

fn diagnostics_shell(spec: &NonlinearitySpec, cfg: &SolverConfig) -> PicardDiagnostics {
    let lip = spec.lipschitz_constant();
    let k = cfg.bielecki_k;
    let bound = lip.and_then(|l| contraction_bound(cfg.s, l, k).ok());
    let kernel_bound = lip.and_then(|l| kernel_contraction_bound(cfg.s, l, k).ok());
    PicardDiagnostics {
        residuals: Vec::new(),
        ratios: Vec::new(),
        bound,
        kernel_bound,
        bielecki_k: k,
        converged: false,
    }
}

/// Global Picard iteration `u₁ = P_t u₀`, `u_{m+1} = F(u_m)` on the whole
/// time grid, stopped when the Bielecki residual drops below `tol`.
pub fn picard_solve(
    u0: &FieldRealization,
    spec: &NonlinearitySpec,
    cfg: &SolverConfig,
) -> Result<(Trajectory, PicardDiagnostics)> {
    check_initial(u0)?;
    if spec.lipschitz_constant().is_none() {
        return config("Picard iteration needs a Lipschitz flux; set a cut-off level for polynomial kinds");
    }
    let prop = Propagator::new(u0.grid, cfg, spec)?;
    let u0_hat = fft::forward_real(&u0.grid, &u0.values);
    let mut diag = diagnostics_shell(spec, cfg);

    let mut hats = prop.sweep(&u0_hat, None);
    let to_fields = |hats: &[Vec<Complex64>]| -> Vec<FieldRealization> {
        hats.iter()
            .zip(&cfg.time_grid)
            .map(|(h, &t)| prop.to_field(h, t))
            .collect()
    };
    let mut fields = to_fields(&hats);

    for _ in 0..cfg.max_iter {
        let g_hats = fields
            .iter()
            .map(|f| prop.nonlinear_hat(spec, f))
            .collect::<Result<Vec<_>>>()?;
        let next = prop.sweep(&u0_hat, Some(&g_hats));
        let residual = next
            .iter()
            .zip(&hats)
            .zip(&cfg.time_grid)
            .fold(0.0f64, |m, ((a, b), &t)| m.max((-t * cfg.bielecki_k).exp() * prop.rms_diff(a, b)));
        if !residual.is_finite() {
            return Err(Error::NumericOverflow {
                context: "Picard residual".into(),
            });
        }
        let ratio = diag
            .residuals
            .last()
            .and_then(|&prev| (prev > 0.0).then(|| residual / prev));
        diag.residuals.push(residual);
        diag.ratios.push(ratio);
        hats = next;
        fields = to_fields(&hats);
        if residual <= cfg.tol {
            diag.converged = true;
            break;
        }
    }

    if !diag.converged {
        if let Some(Some(r)) = diag.ratios.last() {
            if *r >= 1.0 {
                return Err(Error::NonContraction {
                    measured: *r,
                    bound: diag.bound.unwrap_or(f64::NAN),
                    iterations: diag.iterations(),
                });
            }
        }
    }
    Ok((Trajectory::new(fields)?, diag))
}

/// Picard iteration on consecutive windows of `window` subintervals, each
/// restarted from the last state of the previous one.
pub fn picard_solve_windowed(
    u0: &FieldRealization,
    spec: &NonlinearitySpec,
    cfg: &SolverConfig,
    window: usize,
) -> Result<(Trajectory, Vec<PicardDiagnostics>)> {
    cfg.validate()?;
    if window == 0 {
        return config("Picard window must contain at least one interval");
    }
    let nodes = cfg.time_grid.len();
    let mut states = vec![u0.clone().with_time(0.0)];
    let mut diags = Vec::new();
    let mut start = 0;
    while start + 1 < nodes {
        let end = (start + window).min(nodes - 1);
        let t0 = cfg.time_grid[start];
        let mut sub = cfg.clone();
        sub.time_grid = cfg.time_grid[start..=end].iter().map(|t| t - t0).collect();
        sub.time_grid[0] = 0.0;
        sub.window = None;
        let init = states.last().expect("nonempty").clone().with_time(0.0);
        let (traj, diag) = picard_solve(&init, spec, &sub)?;
        for (st, &t) in traj.states.into_iter().zip(&cfg.time_grid[start..=end]).skip(1) {
            states.push(st.with_time(t));
        }
        diags.push(diag);
        start = end;
    }
    Ok((Trajectory::new(states)?, diags))
}

/// Dispatches to [`picard_solve`] or [`picard_solve_windowed`] according to
/// `cfg.window`.
pub fn solve_mild(
    u0: &FieldRealization,
    spec: &NonlinearitySpec,
    cfg: &SolverConfig,
) -> Result<(Trajectory, Vec<PicardDiagnostics>)> {
    match cfg.window {
        Some(w) => picard_solve_windowed(u0, spec, cfg, w),
        None => picard_solve(u0, spec, cfg).map(|(t, d)| (t, vec![d])),
    }
}

/// Marches node to node with the restart identity
/// `u(t+h) = P_h u(t) + ∫_t^{t+h} ∇_z P_{t+h-τ} f(u(τ)) dτ`, resolving the
/// implicit right endpoint by at most `max_inner` fixed-point iterations
/// started from a linear extrapolation of the flux.
pub fn step_solve(u0: &FieldRealization, spec: &NonlinearitySpec, cfg: &SolverConfig) -> Result<Trajectory> {
    check_initial(u0)?;
    let prop = Propagator::new(u0.grid, cfg, spec)?;
    let inner_tol = 0.1 * cfg.tol;
    let mut u_hat = fft::forward_real(&u0.grid, &u0.values);
    let mut g_prev: Option<Vec<Complex64>> = None;
    let mut g_cur = prop.nonlinear_hat(spec, u0)?;
    let mut states = vec![u0.clone().with_time(0.0)];

    for j in 0..prop.steps.len() {
        let t_next = cfg.time_grid[j + 1];
        let base = prop.step_base(j, &u_hat, &g_cur);
        let mut guess: Vec<Complex64> = match &g_prev {
            Some(gp) => g_cur.iter().zip(gp).map(|(c, p)| 2.0 * c - p).collect(),
            None => g_cur.clone(),
        };
        let mut next_hat = prop.add_right(j, &base, &guess);
        let mut field = prop.to_field(&next_hat, t_next);
        let mut converged = spec.is_zero();
        let mut increment = 0.0;
        let mut last_increment = f64::INFINITY;
        let mut iterations = 0;
        while !converged {
            if iterations == cfg.max_inner {
                return Err(Error::StepSize {
                    time: t_next,
                    increment,
                    iterations,
                });
            }
            iterations += 1;
            let g_new = prop.nonlinear_hat(spec, &field)?;
            let candidate = prop.add_right(j, &base, &g_new);
            increment = prop.rms_diff(&candidate, &next_hat);
            if !increment.is_finite() || (iterations > 1 && increment > last_increment) {
                return Err(Error::StepSize {
                    time: t_next,
                    increment,
                    iterations,
                });
            }
            last_increment = increment;
            guess = g_new;
            next_hat = candidate;
            field = prop.to_field(&next_hat, t_next);
            converged = increment <= inner_tol;
        }
        field.ensure_finite(&format!("state at t = {t_next}"))?;
        states.push(field);
        u_hat = next_hat;
        g_prev = Some(std::mem::replace(&mut g_cur, guess));
    }
    Trajectory::new(states)
}

/// Cut-off ladder output: every rung's solution and the Cauchy diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub levels: Vec<f64>,
    /// `(i, j, sup_t rms distance)` for every pair `i < j`.
    pub distances: Vec<(usize, usize, f64)>,
    /// Human-readable descriptions of non-Cauchy behavior.
    pub warnings: Vec<String>,
    pub solutions: Vec<Trajectory>,
    pub diagnostics: Vec<Vec<PicardDiagnostics>>,
}

impl LadderReport {
    pub fn distance(&self, i: usize, j: usize) -> Option<f64> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.distances
            .iter()
            .find(|(x, y, _)| *x == a && *y == b)
            .map(|(_, _, d)| *d)
    }
}

/// Checks that `d(n_i, n_j)` is nonincreasing in `i` for every fixed `j`
/// (which includes the distances to the top rung). Returns one message per
/// violation.
pub fn ladder_violations(levels: &[f64], distances: &[(usize, usize, f64)]) -> Vec<String> {
    let find = |i: usize, j: usize| distances.iter().find(|(a, b, _)| *a == i && *b == j).map(|x| x.2);
    let mut out = Vec::new();
    for j in 0..levels.len() {
        for i in 1..j {
            if let (Some(lo), Some(hi)) = (find(i - 1, j), find(i, j)) {
                if hi > lo * (1.0 + 1e-9) + 1e-14 {
                    out.push(format!(
                        "d(n={}, n={}) = {hi:.4e} exceeds d(n={}, n={}) = {lo:.4e}",
                        levels[i], levels[j], levels[i - 1], levels[j]
                    ));
                }
            }
        }
    }
    out
}

/// Solves with `f∘h_n` and initial data `h_n(u₀)` for each rung of the
/// ladder and returns the top-rung trajectory.
pub fn solve_polynomial(
    u0: &FieldRealization,
    spec: &NonlinearitySpec,
    cfg: &SolverConfig,
    ladder: &[f64],
) -> Result<(Trajectory, LadderReport)> {
    if !spec.is_polynomial() {
        return config("cut-off ladder requires a polynomial flux");
    }
    if ladder.is_empty() {
        return config("cut-off ladder is empty");
    }
    if ladder.windows(2).any(|w| !(w[1] > w[0])) || !(ladder[0] > 0.0) {
        return config("cut-off levels must be positive and strictly increasing");
    }
    let mut solutions = Vec::with_capacity(ladder.len());
    let mut diagnostics = Vec::with_capacity(ladder.len());
    for &n in ladder {
        let rung = spec.with_cutoff(n);
        let init = u0.map(|x| cutoff(x, n));
        let (traj, diag) = solve_mild(&init, &rung, cfg)?;
        solutions.push(traj);
        diagnostics.push(diag);
    }
    let mut distances = Vec::new();
    for i in 0..ladder.len() {
        for j in i + 1..ladder.len() {
            distances.push((i, j, solutions[i].sup_rms_distance(&solutions[j])));
        }
    }
    let warnings = ladder_violations(ladder, &distances);
    let top = solutions.last().expect("nonempty ladder").clone();
    Ok((
        top,
        LadderReport {
            levels: ladder.to_vec(),
            distances,
            warnings,
            solutions,
            diagnostics,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random_fields::{sample_field, SpectralMeasure};
    use crate::spectral::semigroup_apply;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::periodic_1d(64).unwrap()
    }

    fn smooth_field(seed: u64) -> FieldRealization {
        let m = SpectralMeasure::gaussian_bump(grid(), 3.0, 1.0, 0.2).unwrap();
        sample_field(&m, seed)
    }

    /// Composite Simpson on a fine grid, independent of the closed forms.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn product_weights_match_quadrature() {
        for &(lambda, h) in &[(0.0, 0.1), (1e-6, 0.3), (2.0, 0.01), (3.0, 0.05), (40.0, 0.1), (900.0, 0.02)] {
            let c = StepCoeffs::new(&[lambda], h);
            // ∫_0^h e^{-λ(h-τ)} (1 - τ/h) dτ and ∫ e^{-λ(h-τ)} τ/h dτ
            let left = simpson(|t: f64| (-lambda * (h - t)).exp() * (1.0 - t / h), 0.0, h, 40000);
            let right = simpson(|t: f64| (-lambda * (h - t)).exp() * t / h, 0.0, h, 40000);
            assert!((c.w_left[0] - left).abs() <= 1e-12 * h.max(left), "{lambda} {h}");
            assert!((c.w_right[0] - right).abs() <= 1e-12 * h.max(right), "{lambda} {h}");
        }
    }

    #[test]
    fn series_and_direct_branches_agree() {
        for a in [0.0999999, 0.1] {
            let (p1, q1) = phi_psi(a);
            let one = -(-a).exp_m1();
            assert!((p1 - one / a).abs() < 1e-15);
            assert!((q1 - (one - a * (-a).exp()) / (a * a)).abs() < 1e-14);
        }
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::uniform(0.75, 1.0, 10);
        assert!(c.validate().is_ok());
        c.s = 0.5;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::uniform(0.75, 1.0, 10);
        c.time_grid[3] = c.time_grid[2];
        assert!(c.validate().is_err());
        let mut c = SolverConfig::uniform(0.75, 1.0, 10);
        c.tol = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn duhamel_with_zero_flux_is_linear_flow() {
        let cfg = SolverConfig::uniform(0.8, 1.0, 8);
        let u0 = smooth_field(1);
        let traj = Trajectory::new(cfg.time_grid.iter().map(|&t| u0.clone().with_time(t)).collect()).unwrap();
        let out = duhamel_apply(&traj, &NonlinearitySpec::zero(), &cfg).unwrap();
        for st in &out.states {
            let exact = semigroup_apply(&u0, st.time, 0.8).unwrap();
            assert!(st.sup_distance(&exact) < 1e-12);
        }
    }

    #[test]
    fn duhamel_preserves_constants() {
        let g = grid();
        let cfg = SolverConfig::uniform(0.9, 0.5, 5);
        let c = FieldRealization::constant(g, 1.3);
        let traj = Trajectory::new(cfg.time_grid.iter().map(|&t| c.clone().with_time(t)).collect()).unwrap();
        for spec in [NonlinearitySpec::tanh(2.0), NonlinearitySpec::burgers()] {
            let out = duhamel_apply(&traj, &spec, &cfg).unwrap();
            for st in &out.states {
                assert!(st.sup_distance(&c) < 1e-14);
            }
        }
    }

    #[test]
    fn duhamel_frozen_single_mode_closed_form() {
        // f = L tanh with L tiny is effectively L·u; freeze u(τ) = cos(κx)
        // and compare with L ∫_0^t ∂_x P_{t-τ} cos(κx) dτ
        //   = -L κ (1 - e^{-tκ^{2s}})/κ^{2s} sin(κx)
        let g = Grid::new(1, 32, 2.0 * PI).unwrap();
        let (s, kappa, lip, amp) = (0.75, 3.0, 1.0, 1e-6);
        let cfg = SolverConfig::uniform(s, 0.7, 7);
        let u = FieldRealization::from_fn(g, |x| amp * (kappa * x[0]).cos());
        let traj = Trajectory::new(cfg.time_grid.iter().map(|&t| u.clone().with_time(t)).collect()).unwrap();
        let out = duhamel_apply(&traj, &NonlinearitySpec::tanh(lip), &cfg).unwrap();
        let lam = kappa.powf(2.0 * s);
        for st in &out.states {
            let t = st.time;
            let decay = (-t * lam).exp();
            let exact = FieldRealization::from_fn(g, |x| {
                amp * decay * (kappa * x[0]).cos() - lip * amp * kappa * (1.0 - decay) / lam * (kappa * x[0]).sin()
            });
            // tanh(ε) = ε - ε³/3 contributes ~1e-18
            assert!(st.sup_distance(&exact) < 1e-8 * amp, "t = {t}");
        }
    }

    #[test]
    fn duhamel_rejects_foreign_time_grid() {
        let cfg = SolverConfig::uniform(0.8, 1.0, 4);
        let u0 = smooth_field(1);
        let traj = Trajectory::new((0..5).map(|j| u0.clone().with_time(j as f64 * 0.3)).collect()).unwrap();
        assert!(duhamel_apply(&traj, &NonlinearitySpec::zero(), &cfg).is_err());
    }

    #[test]
    fn picard_zero_flux_one_iteration() {
        let cfg = SolverConfig::uniform(0.75, 1.0, 10);
        let u0 = smooth_field(2);
        let (traj, diag) = picard_solve(&u0, &NonlinearitySpec::zero(), &cfg).unwrap();
        assert!(diag.converged);
        assert_eq!(diag.iterations(), 1);
        for st in &traj.states {
            assert!(st.sup_distance(&semigroup_apply(&u0, st.time, 0.75).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn picard_constant_fixed_point() {
        let g = grid();
        let c = FieldRealization::constant(g, -0.7);
        let cfg = SolverConfig::uniform(0.9, 1.0, 10);
        let (traj, diag) = picard_solve(&c, &NonlinearitySpec::tanh(1.0), &cfg).unwrap();
        assert!(diag.converged);
        for st in &traj.states {
            assert!(st.sup_distance(&c) < 1e-14);
        }
    }

    #[test]
    fn picard_requires_lipschitz_flux() {
        let cfg = SolverConfig::uniform(0.9, 1.0, 10);
        assert!(picard_solve(&smooth_field(3), &NonlinearitySpec::burgers(), &cfg).is_err());
    }

    #[test]
    fn picard_reports_non_contraction() {
        // a huge Lipschitz constant on a coarse grid cannot converge in 3 sweeps
        let g = grid();
        let u0 = FieldRealization::from_fn(g, |x| 3.0 * x[0].sin() + 2.0 * (5.0 * x[0]).cos());
        let mut cfg = SolverConfig::uniform(0.55, 4.0, 8);
        cfg.max_iter = 3;
        cfg.bielecki_k = 0.0;
        match picard_solve(&u0, &NonlinearitySpec::tanh(500.0), &cfg) {
            Err(Error::NonContraction { measured, .. }) => assert!(measured >= 1.0),
            other => panic!("expected non-contraction, got {other:?}"),
        }
    }

    #[test]
    fn step_solve_zero_and_constant() {
        let cfg = SolverConfig::uniform(0.75, 1.0, 20);
        let u0 = smooth_field(4);
        let traj = step_solve(&u0, &NonlinearitySpec::zero(), &cfg).unwrap();
        for st in &traj.states {
            assert!(st.sup_distance(&semigroup_apply(&u0, st.time, 0.75).unwrap()) < 1e-10);
        }
        let c = FieldRealization::constant(grid(), 0.4);
        let traj = step_solve(&c, &NonlinearitySpec::burgers().with_cutoff(2.0), &cfg).unwrap();
        assert!(traj.states.iter().all(|st| st.sup_distance(&c) < 1e-14));
    }

    #[test]
    fn step_solve_flags_large_steps() {
        let g = grid();
        let u0 = FieldRealization::from_fn(g, |x| 4.0 * x[0].sin());
        let mut cfg = SolverConfig::uniform(0.55, 2.0, 2);
        cfg.max_inner = 2;
        assert!(matches!(
            step_solve(&u0, &NonlinearitySpec::tanh(50.0), &cfg),
            Err(Error::StepSize { .. })
        ));
    }

    #[test]
    fn contraction_bound_examples() {
        assert_eq!(contraction_bound(0.8, 0.0, 2.0).unwrap(), 0.0);
        let c1 = gradient_constant(1.0).unwrap();
        let rho = contraction_bound(1.0, 0.3, 7.0).unwrap();
        assert!((rho - c1 * 0.3 * (PI / 7.0).sqrt()).abs() < 1e-14);
        assert!(contraction_bound(0.5, 1.0, 1.0).is_err());
        assert!(contraction_bound(0.7, 1.0, 0.0).is_err());
        let mut prev = f64::INFINITY;
        for e in -3..=6 {
            let r = contraction_bound(0.7, 1.0, 10f64.powi(e)).unwrap();
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn minimal_k_examples() {
        for &(s, l) in &[(0.6, 0.1), (0.75, 2.0), (1.0, 0.5)] {
            let k0 = minimal_k(s, l).unwrap();
            let eps = 1e-6;
            assert!(contraction_bound(s, l, k0 * (1.0 + eps)).unwrap() < 1.0);
            assert!(contraction_bound(s, l, k0 * (1.0 - eps)).unwrap() > 1.0);
            let ratio = minimal_k(s, 2.0 * l).unwrap() / k0;
            let expect = 2f64.powf(2.0 * s / (2.0 * s - 1.0));
            assert!((ratio / expect - 1.0).abs() < 1e-12);
        }
        let c1 = gradient_constant(1.0).unwrap();
        let l = 1.0 / (c1 * PI.sqrt());
        assert!((minimal_k(1.0, l).unwrap() - 1.0).abs() < 1e-12);
        assert!(minimal_k(0.5, 1.0).is_err());
        assert!(minimal_k(0.8, 0.0).is_err());
    }

    #[test]
    fn bielecki_examples() {
        let g = grid();
        let cfg = SolverConfig::uniform(0.75, 1.0, 4);
        let c = Trajectory::new(
            cfg.time_grid
                .iter()
                .map(|&t| FieldRealization::constant(g, -3.0).with_time(t))
                .collect(),
        )
        .unwrap();
        assert_eq!(bielecki_norm(&[c.clone()], 0.0, MomentOrder::Finite(2.0)).unwrap(), 3.0);
        assert_eq!(bielecki_norm(&[c], 0.0, MomentOrder::Infinity).unwrap(), 3.0);

        let (traj, _) = picard_solve(&smooth_field(5), &NonlinearitySpec::tanh(0.2), &cfg).unwrap();
        let big = bielecki_norm(&[traj.clone()], 1e3, MomentOrder::Finite(2.0)).unwrap();
        assert_eq!(big, traj.initial().rms());
        let doubled = Trajectory::new(traj.states.iter().map(|s| s.map(|v| 2.0 * v)).collect()).unwrap();
        for p in [MomentOrder::Finite(2.0), MomentOrder::Finite(4.0), MomentOrder::Infinity] {
            let a = bielecki_norm(&[traj.clone()], 0.7, p).unwrap();
            let b = bielecki_norm(&[doubled.clone()], 0.7, p).unwrap();
            assert!((b - 2.0 * a).abs() < 1e-13 * a);
        }
    }

    #[test]
    fn ladder_inactive_when_data_bounded() {
        let g = grid();
        let u0 = FieldRealization::from_fn(g, |x| 0.4 * x[0].sin() + 0.3 * (2.0 * x[0]).cos());
        let mut cfg = SolverConfig::uniform(0.8, 0.5, 10);
        cfg.bielecki_k = 0.0;
        let (top, report) = solve_polynomial(&u0, &NonlinearitySpec::burgers(), &cfg, &[1.0, 2.0, 4.0]).unwrap();
        for (_, _, d) in &report.distances {
            assert!(*d < 1e-12);
        }
        assert!(report.warnings.is_empty());
        assert_eq!(&top, report.solutions.last().unwrap());
        assert!(solve_polynomial(&u0, &NonlinearitySpec::tanh(1.0), &cfg, &[1.0]).is_err());
        assert!(solve_polynomial(&u0, &NonlinearitySpec::burgers(), &cfg, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn ladder_violation_detection() {
        let levels = [1.0, 2.0, 4.0];
        let ok = [(0, 1, 0.5), (0, 2, 0.6), (1, 2, 0.1)];
        assert!(ladder_violations(&levels, &ok).is_empty());
        let bad = [(0, 1, 0.5), (0, 2, 0.1), (1, 2, 0.3)];
        assert_eq!(ladder_violations(&levels, &bad).len(), 1);
    }

    #[test]
    fn diagnostics_records() {
        let d = PicardDiagnostics {
            residuals: vec![1.0, 0.1, 0.01],
            ratios: vec![None, Some(0.1), Some(0.1)],
            bound: Some(0.5),
            kernel_bound: None,
            bielecki_k: 1.0,
            converged: true,
        };
        let rec = d.to_records();
        assert_eq!(rec.lines().count(), 4);
        assert!(rec.lines().nth(1).unwrap().starts_with("1\t1.000000e0\t-"));
        assert!(d.is_monotone(0.1, 0.0));
        assert_eq!(d.max_ratio_above(0.0), Some(0.1));
    }
}
