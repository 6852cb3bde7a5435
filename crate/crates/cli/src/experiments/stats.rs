//! Monte Carlo experiments: moment decay, the energy identity,
//! orthogonality and the Stroock–Varopoulos slack.

use std::f64::consts::PI;

use fracflow::ensemble_stats::{
    dissipation_from_series, member_moments, node_derivative, stroock_varopoulos_check, EnergySeries,
    MomentSeries,
};
use fracflow::estimate::Estimate;
use fracflow::io::Table;
use fracflow::mild_solver::step_solve;
use fracflow::nonlinearity::{cutoff, NonlinearitySpec};
use fracflow::random_fields::{directional_orthogonality_stat, sample_field, Ensemble, SpectralMeasure};
use fracflow::{Error, FieldRealization, Grid, Result};

use super::solver::solve;
use super::{base, checks_table, members_check, tag};
use crate::config::{Method, RunConfig};
use crate::runner::{Check, Context, Outcome};

/// Agreement required between the library and the direct-sum evaluation
/// of the Stroock–Varopoulos slack.
pub const BRUTE_FORCE_TOL: f64 = 1e-12;
pub const BRUTE_FORCE_POINTS: usize = 16;

pub fn moments_defaults() -> RunConfig {
    let mut c = base("moment-monotonicity");
    c.nonlinearity = NonlinearitySpec::burgers();
    c.sweep.ladder = vec![2.0, 4.0, 8.0];
    c.sweep.moment_orders = vec![2.0, 4.0, 6.0];
    c
}

pub fn moments(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config;
    let measure = cfg.measure()?;
    let solver = cfg.solver()?;
    let ladder = &cfg.sweep.ladder;
    let orders = &cfg.sweep.moment_orders;
    if ladder.is_empty() || orders.is_empty() {
        return Err(Error::Config("moment-monotonicity needs ladder and moment_orders".into()));
    }
    let times = solver.time_grid.clone();

    // per member: node moments indexed [rung * orders + order], plus the top
    // rung trajectory of member 0
    let (rows, failed) = ctx.map_members(|i, seed| {
        let g = sample_field(&measure, seed);
        let mut out = Vec::with_capacity(ladder.len() * orders.len());
        let mut keep = None;
        for (r, &n) in ladder.iter().enumerate() {
            let spec = cfg.nonlinearity.with_cutoff(n);
            let traj = solve(&g.map(|x| cutoff(x, n)), &spec, &solver, cfg.solver.method)?;
            out.extend(orders.iter().map(|&p| member_moments(&traj, p)));
            if i == 0 && r + 1 == ladder.len() {
                keep = Some(traj);
            }
        }
        Ok((out, keep))
    });

    let mut tables = Vec::new();
    let mut summary = Table::new(&["cutoff", "p", "initial", "final", "max_rise_stderr", "violations", "pass"]);
    let mut total = 0usize;
    let mut worst_rise = f64::NEG_INFINITY;
    let mut fields = Vec::new();
    for (r, &n) in ladder.iter().enumerate() {
        for (q, &p) in orders.iter().enumerate() {
            let per: Vec<Vec<f64>> = rows.iter().map(|(v, _)| v[r * orders.len() + q].clone()).collect();
            let series = MomentSeries::from_member_values(p, &times, &per)?;
            let v = series.violations(cfg.sweep.sigmas);
            total += v.len();
            worst_rise = worst_rise.max(series.max_rise_stderr());
            summary.push(vec![
                n.into(),
                p.into(),
                series.values[0].into(),
                (*series.values.last().unwrap_or(&f64::NAN)).into(),
                series.max_rise_stderr().into(),
                v.len().into(),
                v.is_empty().into(),
            ]);
            tables.push((format!("moments_n{}_p{}", tag(n), tag(p)), series.to_table(cfg.sweep.sigmas)));
        }
    }
    if let Some(traj) = rows.into_iter().find_map(|(_, k)| k) {
        fields.push((format!("member0_n{}", tag(*ladder.last().expect("nonempty"))), traj.states));
    }
    let checks = vec![
        Check::at_most(
            "monotonicity_violations",
            total as f64,
            0.0,
            format!(
                "rises above {} node stderr; largest stepwise rise {worst_rise:.2} stderr",
                cfg.sweep.sigmas
            ),
        ),
        members_check(&failed, ctx.seeds.len()),
    ];
    tables.insert(0, ("moments".into(), summary));
    tables.push(("checks".into(), checks_table(&checks)));
    Ok(Outcome {
        tables,
        checks,
        fields,
        failed_members: failed,
    })
}

pub fn dissipation_defaults() -> RunConfig {
    let mut c = base("energy-dissipation");
    c.members = 5000;
    c.solver.method = Method::Step;
    c.solver.steps = 400;
    // the first step has no flux history to extrapolate from
    c.solver.max_inner = 10;
    c.sweep.lipschitz = 1.0;
    c.sweep.ladder = vec![4.0];
    c.sweep.rel_tol = 0.05;
    c
}

/// Mode number of the wavenumber closest to `|k| = 1`.
fn unit_mode(grid: &Grid) -> i64 {
    ((grid.len() / (2.0 * PI)).round() as i64).max(1)
}

pub fn dissipation(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config;
    let grid = cfg.grid()?;
    let solver = cfg.solver()?;
    let s = solver.s;
    let times = solver.time_grid.clone();
    let dt = times.windows(2).fold(0.0f64, |m, w| m.max(w[1] - w[0]));
    let sigmas = cfg.sweep.sigmas;
    let cut = *cfg
        .sweep
        .ladder
        .first()
        .ok_or_else(|| Error::Config("energy-dissipation needs the Burgers cut-off in ladder".into()))?;

    // Linear oracle on a two-mode measure: E u(t)^2 = M e^{-2λt}.
    let mode = unit_mode(&grid);
    let linear = SpectralMeasure::two_mode(grid, [mode, 0], 1.0, 0.0)?;
    let lam = (2.0 * PI * mode as f64 / grid.len()).powf(2.0 * s);
    let zero = NonlinearitySpec::zero();
    let (lin_rows, lin_failed) = ctx.map_members(|_, seed| {
        let traj = step_solve(&sample_field(&linear, seed), &zero, &solver)?;
        EnergySeries::from_trajectory(&traj, s)
    });
    let mut lin_t = Table::new(&["t", "oracle", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "bound", "pass"]);
    let mut lin_fail = 0usize;
    let mass = linear.total_mass();
    let lin_derivs: Vec<Vec<f64>> = lin_rows.iter().map(|e| node_derivative(&times, &e.energy)).collect();
    for j in 1..times.len().saturating_sub(1) {
        let oracle = -2.0 * lam * mass * (-2.0 * lam * times[j]).exp();
        let lhs: Vec<f64> = lin_derivs.iter().map(|d| d[j]).collect();
        let rhs: Vec<f64> = lin_rows.iter().map(|e| -2.0 * e.dissipation[j]).collect();
        let (lhs, rhs) = (Estimate::from_members(&lhs), Estimate::from_members(&rhs));
        let ok_l = (lhs.value - oracle).abs() <= dt * dt + sigmas * lhs.stderr;
        let ok_r = (rhs.value - oracle).abs() <= dt * dt + sigmas * rhs.stderr;
        lin_fail += usize::from(!ok_l) + usize::from(!ok_r);
        lin_t.push(vec![
            times[j].into(),
            oracle.into(),
            lhs.value.into(),
            lhs.stderr.into(),
            rhs.value.into(),
            rhs.stderr.into(),
            (dt * dt + sigmas * lhs.stderr.max(rhs.stderr)).into(),
            (ok_l && ok_r).into(),
        ]);
    }

    let mut checks = vec![Check::at_most(
        "linear_oracle_failures",
        lin_fail as f64,
        0.0,
        format!("interior nodes outside dt^2 + {sigmas} stderr of the exact rate, mode {mode}"),
    )];
    let mut tables = vec![("dissipation_linear".to_string(), lin_t)];
    let mut failed = lin_failed;

    let measure = cfg.measure()?;
    let fluxes = [
        ("tanh", NonlinearitySpec::tanh(cfg.sweep.lipschitz)),
        ("burgers", NonlinearitySpec::burgers().with_cutoff(cut)),
    ];
    for (name, spec) in fluxes {
        let (rows, f) = ctx.map_members(|_, seed| {
            let traj = solve(&sample_field(&measure, seed), &spec, &solver, cfg.solver.method)?;
            EnergySeries::from_trajectory(&traj, s)
        });
        failed.extend(f);
        let report = dissipation_from_series(&rows)?;
        let bad = report.failures(cfg.sweep.rel_tol, sigmas).len();
        checks.push(Check::at_most(
            format!("{name}_residual_failures"),
            bad as f64,
            0.0,
            format!(
                "interior nodes outside max({} |rhs|, {sigmas} stderr); decay time {:.3}",
                cfg.sweep.rel_tol, report.decay_time
            ),
        ));
        checks.push(Check::at_most(
            format!("{name}_rhs_positive_nodes"),
            report.rows.iter().filter(|r| r.rhs > 0.0).count() as f64,
            0.0,
            "dissipation term must be nonpositive",
        ));
        tables.push((format!("dissipation_{name}"), report.to_table(cfg.sweep.rel_tol, sigmas)));
    }
    failed.sort_by_key(|f| f.member);
    checks.push(members_check(&failed, ctx.seeds.len()));
    tables.push(("checks".into(), checks_table(&checks)));
    Ok(Outcome {
        tables,
        checks,
        failed_members: failed,
        ..Outcome::default()
    })
}

pub fn orthogonality_defaults() -> RunConfig {
    let mut c = base("derivative-orthogonality");
    c.measure = fracflow::random_fields::MeasureSpec::GaussianBump {
        width: 0.8,
        mass: 1.0,
        mean: 0.2,
    };
    c
}

type Pair = (&'static str, fn(f64) -> f64, fn(f64) -> f64);

const PAIRS: [Pair; 3] = [
    ("f=u g=u", |x| x, |x| x),
    ("f=u^2/2 g=u", |x| 0.5 * x * x, |x| x),
    ("f=tanh g=u^3", f64::tanh, |x| x * x * x),
];

fn sample_ensemble(ctx: &Context, measure: &SpectralMeasure) -> Result<(Ensemble, Vec<crate::runner::MemberFailure>)> {
    let (members, failed) = ctx.map_members(|_, seed| Ok(sample_field(measure, seed)));
    let seeds = ctx
        .seeds
        .iter()
        .enumerate()
        .filter(|(i, _)| !failed.iter().any(|f| f.member == *i))
        .map(|(_, &s)| s)
        .collect();
    Ok((Ensemble::new(members, seeds)?, failed))
}

pub fn orthogonality(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config;
    let (ens, failed) = sample_ensemble(ctx, &cfg.measure()?)?;
    let mut t = Table::new(&["pair", "estimate", "stderr", "z", "pass"]);
    let mut worst = 0.0f64;
    for (name, f, g) in PAIRS {
        let st = directional_orthogonality_stat(&ens, f, g, cfg.solver.z)?;
        worst = worst.max(st.z_score.abs());
        t.push(vec![
            name.into(),
            st.estimate.into(),
            st.stderr.into(),
            st.z_score.into(),
            (st.z_score.abs() <= cfg.sweep.sigmas).into(),
        ]);
    }
    let checks = vec![
        Check::at_most("max_abs_z", worst, cfg.sweep.sigmas, "E[grad_z f(u) g(u)] against 0"),
        members_check(&failed, ctx.seeds.len()),
    ];
    Ok(Outcome {
        tables: vec![("orthogonality".into(), t), ("checks".into(), checks_table(&checks))],
        checks,
        failed_members: failed,
        ..Outcome::default()
    })
}

pub fn stroock_defaults() -> RunConfig {
    let mut c = base("stroock-varopoulos");
    c.members = 1000;
    c.sweep.exponents = vec![[0.5, 1.5], [1.0, 1.0]];
    c.sweep.h_values = vec![0.05, 0.2];
    c.sweep.s_values = vec![0.6, 1.0];
    c
}

/// `p_h(x) = len⁻¹ Σ_m e^{-h|k_m|^{2s}} cos(k_m x)` summed mode by mode.
fn kernel_direct(g: &Grid, h: f64, s: f64, x: f64) -> f64 {
    let n = g.n() as i64;
    let dk = 2.0 * PI / g.len();
    (-n / 2..n / 2)
        .map(|m| {
            let k = m as f64 * dk;
            let lam = if m == 0 { 0.0 } else { k.abs().powf(2.0 * s) };
            (-h * lam).exp() * (k * x).cos()
        })
        .sum::<f64>()
        / g.len()
}

/// Slack by direct convolution with the summed kernel, no FFT involved.
fn slack_direct(w: &FieldRealization, a: f64, b: f64, h: f64, s: f64) -> f64 {
    let g = &w.grid;
    let n = g.n();
    let dx = g.spacing();
    let heat = |v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| kernel_direct(g, h, s, (i as f64 - j as f64) * dx) * v[j] * dx)
                    .sum()
            })
            .collect()
    };
    let signed = |e: f64| -> Vec<f64> { w.values.iter().map(|v| v.signum() * v.abs().powf(e)).collect() };
    let abs: Vec<f64> = w.values.iter().map(|v| v.abs()).collect();
    let avg = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>() / n as f64;
    let sq = avg(&w.values, &w.values);
    let (pa, pabs) = (heat(&signed(a)), heat(&abs));
    (sq - avg(&pa, &signed(b))) - a * b * (sq - avg(&pabs, &abs))
}

pub fn stroock_varopoulos(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config;
    let measure = cfg.measure()?;
    let (ens, failed) = sample_ensemble(ctx, &measure)?;
    let small_grid = Grid::new(cfg.grid.dim, BRUTE_FORCE_POINTS, cfg.grid.len)?;
    let small = cfg.measure.build(small_grid)?;
    let small_members: Vec<FieldRealization> = ctx.seeds.iter().take(4).map(|&sd| sample_field(&small, sd)).collect();

    let mut t = Table::new(&["a", "b", "h", "s", "slack", "stderr", "z", "literal_slack", "pass"]);
    let mut brute = Table::new(&["a", "b", "h", "s", "member", "library", "direct", "abs_diff"]);
    let mut fails = 0usize;
    let mut worst_z = f64::INFINITY;
    let mut worst_diff = 0.0f64;
    for &[a, b] in &cfg.sweep.exponents {
        for &h in &cfg.sweep.h_values {
            for &s in &cfg.sweep.s_values {
                let rep = stroock_varopoulos_check(&ens, a, b, h, s)?;
                let pass = rep.passes(cfg.sweep.sigmas);
                fails += usize::from(!pass);
                worst_z = worst_z.min(rep.z_score());
                t.push(vec![
                    a.into(),
                    b.into(),
                    h.into(),
                    s.into(),
                    rep.slack.value.into(),
                    rep.slack.stderr.into(),
                    rep.z_score().into(),
                    rep.literal_slack.value.into(),
                    pass.into(),
                ]);
                for (m, w) in small_members.iter().enumerate() {
                    let single = Ensemble::new(vec![w.clone()], vec![ctx.seeds[m]])?;
                    let lib = stroock_varopoulos_check(&single, a, b, h, s)?.slack.value;
                    let direct = slack_direct(w, a, b, h, s);
                    let diff = (lib - direct).abs();
                    worst_diff = worst_diff.max(diff / direct.abs().max(1.0));
                    brute.push(vec![a.into(), b.into(), h.into(), s.into(), m.into(), lib.into(), direct.into(), diff.into()]);
                }
            }
        }
    }
    let checks = vec![
        Check::at_most(
            "slack_failures",
            fails as f64,
            0.0,
            format!("slack below -{} stderr; smallest z {worst_z:.2}", cfg.sweep.sigmas),
        ),
        Check::at_most(
            "brute_force_rel_diff",
            worst_diff,
            BRUTE_FORCE_TOL,
            format!("library against direct kernel sums on n = {BRUTE_FORCE_POINTS}"),
        ),
        members_check(&failed, ctx.seeds.len()),
    ];
    Ok(Outcome {
        tables: vec![
            ("stroock_varopoulos".into(), t),
            ("brute_force".into(), brute),
            ("checks".into(), checks_table(&checks)),
        ],
        checks,
        failed_members: failed,
        ..Outcome::default()
    })
}
