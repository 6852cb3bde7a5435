//! Monte Carlo estimators for moment decay, energy dissipation, covariance
//! dynamics and the Stroock–Varopoulos inequality.
//!
//! Long runs do not keep whole trajectories: each member is reduced to a
//! few numbers per time node ([`member_moments`], [`EnergySeries`]) and the
//! reports are built from those, in member order.

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::estimate::Estimate;
use crate::field::{pairwise_sum, FieldRealization};
use crate::grid::Grid;
use crate::mild_solver::{MomentOrder, Trajectory};
use crate::random_fields::{coefficients, estimate_covariance, CovarianceEstimate, Ensemble, ROUNDOFF_FLOOR};
use crate::spectral::{check_order, semigroup_apply};

/// `E |u|^p` over members and space. For `p = ∞` the value is the grid
/// maximum over all members and the standard error is `NaN`.
pub fn moment(ens: &Ensemble, p: MomentOrder) -> Result<Estimate> {
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    match p {
        MomentOrder::Finite(p) => {
            check_moment_order(p)?;
            Ok(ens.estimate(|f| f.abs_moment(p)))
        }
        MomentOrder::Infinity => Ok(Estimate {
            value: ens.members.iter().fold(0.0f64, |m, f| m.max(f.sup_norm())),
            stderr: f64::NAN,
            members: ens.len(),
        }),
    }
}

fn check_moment_order(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return config(format!("moment order must be a finite p >= 1, got {p}"));
    }
    Ok(())
}

/// Spatial average of `|u(t_j)|^p` at every node of one trajectory.
pub fn member_moments(traj: &Trajectory, p: f64) -> Vec<f64> {
    traj.states.iter().map(|st| st.abs_moment(p)).collect()
}

/// Node-wise `E|u(t_j)|^p` with member-level standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub p: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub members: usize,
    /// Mean and standard error of the per-member increments
    /// `M_i(t_{j+1}) - M_i(t_j)`, one entry per interval.
    pub increments: Vec<Estimate>,
}

/// A node at which a moment series rises by more than the allowance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityViolation {
    pub node: usize,
    pub time: f64,
    /// Rise over the reference value in units of the node's standard error.
    pub excess_stderr: f64,
    /// `"step"` compares with the previous node, `"initial"` with `t₀`.
    pub reference: String,
}

impl MomentSeries {
    /// `per_member[i][j]` is member `i`'s spatial `|u|^p` average at node `j`.
    pub fn from_member_values(p: f64, times: &[f64], per_member: &[Vec<f64>]) -> Result<Self> {
        check_moment_order(p)?;
        if per_member.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if per_member.iter().any(|m| m.len() != times.len()) {
            return Err(Error::GridMismatch("members sampled on different time grids".into()));
        }
        let column = |j: usize| -> Vec<f64> { per_member.iter().map(|m| m[j]).collect() };
        let nodes: Vec<Estimate> = (0..times.len()).map(|j| Estimate::from_members(&column(j))).collect();
        let increments = (1..times.len())
            .map(|j| {
                let d: Vec<f64> = per_member.iter().map(|m| m[j] - m[j - 1]).collect();
                Estimate::from_members(&d)
            })
            .collect();
        Ok(Self {
            p,
            times: times.to_vec(),
            values: nodes.iter().map(|e| e.value).collect(),
            stderr: nodes.iter().map(|e| e.stderr).collect(),
            members: per_member.len(),
            increments,
        })
    }

    /// Nodes where `E|u(t_j)|^p` exceeds the previous node's value or the
    /// initial value by more than `sigmas` standard errors of node `j`.
    pub fn violations(&self, sigmas: f64) -> Vec<MonotonicityViolation> {
        let mut out = Vec::new();
        let floor = ROUNDOFF_FLOOR * self.values.first().copied().unwrap_or(0.0).abs();
        for j in 1..self.values.len() {
            let se = self.stderr[j].max(floor);
            for (reference, base) in [("step", self.values[j - 1]), ("initial", self.values[0])] {
                let rise = self.values[j] - base;
                if rise > sigmas * se {
                    out.push(MonotonicityViolation {
                        node: j,
                        time: self.times[j],
                        excess_stderr: if se > 0.0 { rise / se } else { f64::INFINITY },
                        reference: reference.into(),
                    });
                }
            }
        }
        out
    }

    /// Largest rise between consecutive nodes in units of the node standard
    /// error; negative when the series decreases throughout.
    pub fn max_rise_stderr(&self) -> f64 {
        (1..self.values.len())
            .map(|j| {
                let rise = self.values[j] - self.values[j - 1];
                let se = self.stderr[j].max(ROUNDOFF_FLOOR * self.values[0].abs());
                if se > 0.0 {
                    rise / se
                } else if rise > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// [`MomentSeries`] over trajectories that share a time grid.
pub fn moment_series(trajs: &[Trajectory], p: f64) -> Result<MomentSeries> {
    let first = trajs.first().ok_or(Error::EmptyEnsemble)?;
    let times = first.times();
    for t in trajs {
        t.grid().ensure_same(&first.grid())?;
        if t.times() != times {
            return Err(Error::GridMismatch("trajectories on different time grids".into()));
        }
    }
    let per: Vec<Vec<f64>> = trajs.iter().map(|t| member_moments(t, p)).collect();
    MomentSeries::from_member_values(p, &times, &per)
}

/// `Σ_k |k|^{2s} |Z_k|²`, the spatial average of `|(-Δ)^{s/2}u|²`.
pub fn fractional_energy(field: &FieldRealization, s: f64) -> f64 {
    let grid = field.grid;
    let z = coefficients(field);
    let terms: Vec<f64> = z
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let r = grid.wavenumber_norm(i);
            if r == 0.0 {
                0.0
            } else {
                r.powf(2.0 * s) * c.norm_sqr()
            }
        })
        .collect();
    pairwise_sum(&terms)
}

/// Per-member node data for the energy identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySeries {
    pub times: Vec<f64>,
    /// Spatial average of `u²`.
    pub energy: Vec<f64>,
    /// Spatial average of `|(-Δ)^{s/2}u|²`.
    pub dissipation: Vec<f64>,
    /// Spatial mean of `u(t₀)`.
    pub mean: f64,
}

impl EnergySeries {
    pub fn from_trajectory(traj: &Trajectory, s: f64) -> Result<Self> {
        check_order(s)?;
        Ok(Self {
            times: traj.times(),
            energy: member_moments(traj, 2.0),
            dissipation: traj.states.iter().map(|st| fractional_energy(st, s)).collect(),
            mean: traj.initial().mean(),
        })
    }
}

/// Second-order derivative weights at node `j` of a possibly nonuniform
/// grid: three-point centered in the interior, three-point one-sided at the
/// ends.
fn derivative_weights(times: &[f64], j: usize) -> ([usize; 3], [f64; 3]) {
    let last = times.len() - 1;
    if j == 0 {
        let (h1, h2) = (times[1] - times[0], times[2] - times[1]);
        (
            [0, 1, 2],
            [
                -(2.0 * h1 + h2) / (h1 * (h1 + h2)),
                (h1 + h2) / (h1 * h2),
                -h1 / (h2 * (h1 + h2)),
            ],
        )
    } else if j == last {
        let (h1, h2) = (times[j - 1] - times[j - 2], times[j] - times[j - 1]);
        (
            [j - 2, j - 1, j],
            [
                h2 / (h1 * (h1 + h2)),
                -(h1 + h2) / (h1 * h2),
                (h1 + 2.0 * h2) / (h2 * (h1 + h2)),
            ],
        )
    } else {
        let (h1, h2) = (times[j] - times[j - 1], times[j + 1] - times[j]);
        (
            [j - 1, j, j + 1],
            [-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))],
        )
    }
}

/// Finite-difference derivative of a node series at every node.
pub fn node_derivative(times: &[f64], values: &[f64]) -> Vec<f64> {
    (0..times.len())
        .map(|j| {
            let (idx, w) = derivative_weights(times, j);
            w[0] * values[idx[0]] + w[1] * values[idx[1]] + w[2] * values[idx[2]]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationRow {
    pub time: f64,
    /// `d/dt Ê u²` by finite differences.
    pub lhs: f64,
    /// `-2 Ê |(-Δ)^{s/2}u|²`.
    pub rhs: f64,
    pub rhs_stderr: f64,
    /// Mean of the per-member residuals `lhs_i - rhs_i`.
    pub residual: f64,
    pub stderr: f64,
    /// One-sided stencil at an end node.
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    pub rows: Vec<DissipationRow>,
    pub members: usize,
    /// Smallest `E(u-m)² / |rhs|` over the nodes.
    pub decay_time: f64,
}

impl DissipationReport {
    /// Interior rows satisfying `|residual| ≤ max(rel·|rhs|, sigmas·stderr)`.
    pub fn failures(&self, rel: f64, sigmas: f64) -> Vec<&DissipationRow> {
        self.rows
            .iter()
            .filter(|r| !r.low_confidence)
            .filter(|r| r.residual.abs() > (rel * r.rhs.abs()).max(sigmas * r.stderr))
            .collect()
    }

    pub fn rhs_nonpositive(&self) -> bool {
        self.rows.iter().all(|r| r.rhs <= 0.0)
    }
}

/// Largest allowed step as a fraction of the decay time.
pub const DISSIPATION_RESOLUTION: f64 = 1e-2;

/// Energy-identity report from per-member series. Fails with a resolution
/// error if some step exceeds `DISSIPATION_RESOLUTION` times the decay time.
pub fn dissipation_from_series(series: &[EnergySeries]) -> Result<DissipationReport> {
    let first = series.first().ok_or(Error::EmptyEnsemble)?;
    let times = &first.times;
    if times.len() < 3 {
        return config("energy identity needs at least three time nodes");
    }
    if series.iter().any(|s| &s.times != times) {
        return Err(Error::GridMismatch("members on different time grids".into()));
    }
    let n = series.len() as f64;
    let grand_mean = pairwise_sum(&series.iter().map(|s| s.mean).collect::<Vec<_>>()) / n;

    let derivs: Vec<Vec<f64>> = series.iter().map(|s| node_derivative(times, &s.energy)).collect();
    let mut rows = Vec::with_capacity(times.len());
    let mut decay_time = f64::INFINITY;
    for j in 0..times.len() {
        let lhs_j: Vec<f64> = derivs.iter().map(|d| d[j]).collect();
        let rhs_j: Vec<f64> = series.iter().map(|s| -2.0 * s.dissipation[j]).collect();
        let res_j: Vec<f64> = lhs_j.iter().zip(&rhs_j).map(|(a, b)| a - b).collect();
        let energy = pairwise_sum(&series.iter().map(|s| s.energy[j]).collect::<Vec<_>>()) / n;
        let lhs = Estimate::from_members(&lhs_j);
        let rhs = Estimate::from_members(&rhs_j);
        let res = Estimate::from_members(&res_j);
        if rhs.value < 0.0 {
            decay_time = decay_time.min((energy - grand_mean * grand_mean).max(0.0) / rhs.value.abs());
        }
        rows.push(DissipationRow {
            time: times[j],
            lhs: lhs.value,
            rhs: rhs.value,
            rhs_stderr: rhs.stderr,
            residual: res.value,
            stderr: res.stderr,
            low_confidence: j == 0 || j + 1 == times.len(),
        });
    }
    let max_dt = times.windows(2).fold(0.0f64, |m, w| m.max(w[1] - w[0]));
    if max_dt > DISSIPATION_RESOLUTION * decay_time * (1.0 + 1e-9) {
        return Err(Error::Resolution(format!(
            "time step {max_dt:.3e} exceeds {DISSIPATION_RESOLUTION} of the decay time {decay_time:.3e}"
        )));
    }
    Ok(DissipationReport {
        rows,
        members: series.len(),
        decay_time,
    })
}

pub fn dissipation_residual(trajs: &[Trajectory], s: f64) -> Result<DissipationReport> {
    let series = trajs
        .iter()
        .map(|t| EnergySeries::from_trajectory(t, s))
        .collect::<Result<Vec<_>>>()?;
    dissipation_from_series(&series)
}

/// Covariance `B(t, y)` per node and lag, plus the `y = 0` identity
/// `∂t B(t,0) = -2 Σ_k |k|^{2s} σ̂_t(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceDynamics {
    pub times: Vec<f64>,
    pub lags: Vec<[i64; 2]>,
    /// `covariance[j][l]` at node `j` and lag `l`.
    pub covariance: Vec<Vec<CovarianceEstimate>>,
    /// Finite-difference `∂t B(t_j, 0)`.
    pub b0_rate: Vec<f64>,
    /// `-2 Σ |k|^{2s} σ̂_{t_j}(k)` from the empirical spectrum.
    pub spectral_rate: Vec<f64>,
    /// Per-member paired residual of the two rates.
    pub residual: Vec<Estimate>,
}

impl CovarianceDynamics {
    /// Interior nodes with `|residual| > max(rel·|spectral rate|, sigmas·stderr)`.
    pub fn failures(&self, rel: f64, sigmas: f64) -> Vec<usize> {
        let last = self.times.len() - 1;
        (1..last)
            .filter(|&j| {
                let r = &self.residual[j];
                r.value.abs() > (rel * self.spectral_rate[j].abs()).max(sigmas * r.stderr)
            })
            .collect()
    }
}

pub fn covariance_dynamics(trajs: &[Trajectory], lags: &[[i64; 2]], s: f64) -> Result<CovarianceDynamics> {
    check_order(s)?;
    let first = trajs.first().ok_or(Error::EmptyEnsemble)?;
    let times = first.times();
    if times.len() < 3 {
        return config("covariance dynamics needs at least three time nodes");
    }
    let nodes = times.len();
    let mut covariance = Vec::with_capacity(nodes);
    for j in 0..nodes {
        let members = trajs
            .iter()
            .map(|t| {
                if t.times() != times {
                    return Err(Error::GridMismatch("trajectories on different time grids".into()));
                }
                Ok(t.states[j].clone())
            })
            .collect::<Result<Vec<_>>>()?;
        let ens = Ensemble::new(members, vec![0; trajs.len()])?;
        covariance.push(estimate_covariance(&ens, lags)?);
    }

    // The spatial mean is conserved, so B_i(t,0) = mean (u_i - m)² differs
    // from the energy by a constant per member and the same stencil applies.
    let grand_mean = pairwise_sum(&trajs.iter().map(|t| t.initial().mean()).collect::<Vec<_>>()) / trajs.len() as f64;
    let per_b0: Vec<Vec<f64>> = trajs
        .iter()
        .map(|t| t.states.iter().map(|st| st.map(|v| v - grand_mean).abs_moment(2.0)).collect())
        .collect();
    let per_rate: Vec<Vec<f64>> = trajs
        .iter()
        .map(|t| t.states.iter().map(|st| -2.0 * fractional_energy(st, s)).collect())
        .collect();
    let per_deriv: Vec<Vec<f64>> = per_b0.iter().map(|b| node_derivative(&times, b)).collect();

    let mut b0_rate = Vec::with_capacity(nodes);
    let mut spectral_rate = Vec::with_capacity(nodes);
    let mut residual = Vec::with_capacity(nodes);
    for j in 0..nodes {
        let d: Vec<f64> = per_deriv.iter().map(|x| x[j]).collect();
        let r: Vec<f64> = per_rate.iter().map(|x| x[j]).collect();
        let diff: Vec<f64> = d.iter().zip(&r).map(|(a, b)| a - b).collect();
        b0_rate.push(Estimate::from_members(&d).value);
        spectral_rate.push(Estimate::from_members(&r).value);
        residual.push(Estimate::from_members(&diff));
    }
    Ok(CovarianceDynamics {
        times,
        lags: lags.to_vec(),
        covariance,
        b0_rate,
        spectral_rate,
        residual,
    })
}

/// Monte Carlo evaluation of the kernel-level inequality for
/// `θ = sgn w`, `a + b = 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StroockVaropoulosReport {
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub s: f64,
    /// `E (I - P_h)(θ|w|^a) · θ|w|^b - ab · E (I - P_h)|w| · |w|`, which the
    /// inequality asserts is nonnegative.
    pub slack: Estimate,
    /// `ab · E P_h|w|·|w| - E P_h(θ|w|^a)·θ|w|^b`. This form is not
    /// invariant under adding the identity part and fails for constants
    /// when `ab < 1`; it is reported, not checked.
    pub literal_slack: Estimate,
}

impl StroockVaropoulosReport {
    /// `slack ≥ -sigmas · stderr`.
    pub fn passes(&self, sigmas: f64) -> bool {
        self.slack.value >= -sigmas * self.slack.stderr
    }

    pub fn z_score(&self) -> f64 {
        self.slack.z_score(0.0, ROUNDOFF_FLOOR)
    }
}

/// Per-member `(slack, literal slack)` for one field.
pub(crate) fn stroock_varopoulos_member(w: &FieldRealization, a: f64, b: f64, h: f64, s: f64) -> Result<(f64, f64)> {
    let signed_pow = |e: f64| w.map(|v| v.signum() * v.abs().powf(e));
    let wa = signed_pow(a);
    let wb = signed_pow(b);
    let abs_w = w.map(f64::abs);
    let pa = semigroup_apply(&wa, h, s)?;
    let pabs = semigroup_apply(&abs_w, h, s)?;
    let avg_prod = |x: &FieldRealization, y: &FieldRealization| {
        let p: Vec<f64> = x.values.iter().zip(&y.values).map(|(u, v)| u * v).collect();
        pairwise_sum(&p) / p.len() as f64
    };
    let e_sq = w.abs_moment(2.0);
    let mixed = avg_prod(&pa, &wb);
    let plain = avg_prod(&pabs, &abs_w);
    let ab = a * b;
    Ok(((e_sq - mixed) - ab * (e_sq - plain), ab * plain - mixed))
}

pub fn stroock_varopoulos_check(ens_w: &Ensemble, a: f64, b: f64, h: f64, s: f64) -> Result<StroockVaropoulosReport> {
    if ens_w.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    check_order(s)?;
    if !(a > 0.0 && b > 0.0 && ((a + b) - 2.0).abs() <= 1e-12) {
        return config(format!("exponents need a, b > 0 and a + b = 2, got a = {a}, b = {b}"));
    }
    if !(h > 0.0 && h.is_finite()) {
        return config(format!("semigroup time must be > 0, got {h}"));
    }
    let mut slack = Vec::with_capacity(ens_w.len());
    let mut literal = Vec::with_capacity(ens_w.len());
    for w in &ens_w.members {
        let (x, y) = stroock_varopoulos_member(w, a, b, h, s)?;
        slack.push(x);
        literal.push(y);
    }
    Ok(StroockVaropoulosReport {
        a,
        b,
        h,
        s,
        slack: Estimate::from_members(&slack),
        literal_slack: Estimate::from_members(&literal),
    })
}

/// Least-squares slope of `log stderr` against `log N` over prefixes of
/// `values` of the given sizes; `-1/2` for an i.i.d. sample.
pub fn stderr_scaling_exponent(values: &[f64], sizes: &[usize]) -> Result<f64> {
    if sizes.len() < 2 || sizes.iter().any(|&n| n < 2 || n > values.len()) {
        return config("need at least two prefix sizes between 2 and the sample size");
    }
    let pts: Vec<(f64, f64)> = sizes
        .iter()
        .map(|&n| ((n as f64).ln(), Estimate::from_members(&values[..n]).stderr.ln()))
        .collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |(n, d), (x, y)| (n + (x - mx) * (y - my), d + (x - mx) * (x - mx)));
    Ok(num / den)
}

/// Grid helper shared by tests and experiments: the linear-flow prediction
/// `Σ_k e^{-2tλ_k} σ_k` of the variance.
pub fn linear_variance(weights: &[f64], grid: &Grid, t: f64, s: f64) -> f64 {
    let terms: Vec<f64> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let r = grid.wavenumber_norm(i);
            w * (-2.0 * t * if r == 0.0 { 0.0 } else { r.powf(2.0 * s) }).exp()
        })
        .collect();
    pairwise_sum(&terms)
}
