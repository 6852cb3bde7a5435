//! Experiments on the mild-solution solvers: Picard contraction, the
//! cut-off ladder, Picard against marching, and the zero flux.

use fracflow::io::Table;
use fracflow::mild_solver::{
    contraction_bound, kernel_contraction_bound, minimal_k, picard_solve, solve_mild, solve_polynomial,
    step_solve, PicardDiagnostics, SolverConfig, Trajectory,
};
use fracflow::nonlinearity::{cutoff, NonlinearitySpec};
use fracflow::random_fields::sample_field;
use fracflow::spectral::semigroup_apply;
use fracflow::{Error, FieldRealization, Result};

use super::{base, checks_table, members_check, tag};
use crate::config::{Method, RunConfig};
use crate::runner::{Check, Context, Outcome};

/// Ratios are only informative while the previous residual is above
/// roundoff.
pub const RATIO_FLOOR: f64 = 1e-12;
pub const CROSS_FACTOR: f64 = 10.0;
pub const CONVERGENCE_RANGE: (f64, f64) = (3.0, 5.0);
pub const ZERO_FLUX_TOL: f64 = 1e-10;

/// Runs the configured method and returns the trajectory.
pub(crate) fn solve(u0: &FieldRealization, spec: &NonlinearitySpec, cfg: &SolverConfig, method: Method) -> Result<Trajectory> {
    match method {
        Method::Picard => solve_mild(u0, spec, cfg).map(|(t, _)| t),
        Method::Step => step_solve(u0, spec, cfg),
    }
}

pub fn contraction_defaults() -> RunConfig {
    let mut c = base("picard-contraction");
    c.members = 200;
    c.nonlinearity = NonlinearitySpec::tanh(0.1);
    c.solver.max_iter = 30;
    c.solver.window = 0;
    c.sweep.s_values = vec![0.75, 1.0];
    c.sweep.k_factors = vec![2.0, 4.0];
    c.sweep.rel_tol = 0.1;
    c
}

pub fn contraction(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config;
    let measure = cfg.measure()?;
    let spec = cfg.nonlinearity;
    let lip = spec
        .lipschitz_constant()
        .ok_or_else(|| Error::Config("picard-contraction needs a Lipschitz flux".into()))?;
    let mut runs = Vec::new();
    for &s in &cfg.sweep.s_values {
        for &factor in &cfg.sweep.k_factors {
            let k0 = minimal_k(s, lip)?;
            let mut solver = cfg.solver()?;
            solver.s = s;
            solver.bielecki_k = factor * k0;
            solver.window = None;
            solver.validate()?;
            runs.push((s, factor, k0, solver));
        }
    }

    let (rows, failed) = ctx.map_members(|_, seed| {
        let u0 = sample_field(&measure, seed);
        runs.iter()
            .map(|(_, _, _, solver)| picard_solve(&u0, &spec, solver).map(|(_, d)| d))
            .collect::<Result<Vec<PicardDiagnostics>>>()
    });

    let allowance = 1.0 + cfg.sweep.rel_tol;
    let mut summary = Table::new(&[
        "s", "k_factor", "k", "rho", "kernel_rho", "max_ratio", "max_iterations", "converged", "pass",
    ]);
    let mut tables = Vec::new();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut max_iters = 0usize;
    let mut unconverged = 0usize;
    for (r, (s, factor, k0, solver)) in runs.iter().enumerate() {
        let k = factor * k0;
        let rho = contraction_bound(*s, lip, k)?;
        let kernel_rho = kernel_contraction_bound(*s, lip, k)?;
        let diags: Vec<&PicardDiagnostics> = rows.iter().map(|d| &d[r]).collect();
        let ratio = diags
            .iter()
            .filter_map(|d| d.max_ratio_above(RATIO_FLOOR))
            .fold(0.0f64, f64::max);
        let iters = diags.iter().map(|d| d.iterations()).max().unwrap_or(0);
        let conv = diags.iter().filter(|d| d.converged).count();
        let ok = ratio <= allowance * rho && conv == diags.len() && iters <= solver.max_iter;
        worst_excess = worst_excess.max(ratio / (allowance * rho));
        max_iters = max_iters.max(iters);
        unconverged += diags.len() - conv;
        summary.push(vec![
            (*s).into(),
            (*factor).into(),
            k.into(),
            rho.into(),
            kernel_rho.into(),
            ratio.into(),
            iters.into(),
            (conv == diags.len()).into(),
            ok.into(),
        ]);
        if let Some(d) = diags.first() {
            tables.push((format!("picard_member0_s{}_k{}", tag(*s), tag(*factor)), d.to_table()));
        }
    }
    let checks = vec![
        Check::at_most(
            "ratio_over_allowed_bound",
            worst_excess,
            1.0,
            format!("max measured ratio / ({allowance} rho(K)) over all runs"),
        ),
        Check::at_most("unconverged_runs", unconverged as f64, 0.0, format!("tol = {:e}", cfg.solver.tol)),
        Check::at_most("max_iterations", max_iters as f64, cfg.solver.max_iter as f64, "iterations to reach tol"),
        members_check(&failed, ctx.seeds.len()),
    ];
    tables.insert(0, ("contraction".into(), summary));
    tables.push(("checks".into(), checks_table(&checks)));
    Ok(Outcome {
        tables,
        checks,
        failed_members: failed,
        ..Outcome::default()
    })
}

pub fn ladder_defaults() -> RunConfig {
    let mut c = base("cutoff-ladder-cauchy");
    c.members = 20;
    c.nonlinearity = NonlinearitySpec::burgers();
    c.sweep.ladder = vec![1.0, 2.0, 4.0, 8.0];
    c.sweep.amplitude = 3.0;
    c.sweep.data_cap = 6.0;
    c
}

pub fn ladder(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config;
    let measure = cfg.measure()?;
    let solver = cfg.solver()?;
    let ladder = cfg.sweep.ladder.clone();
    let (amp, cap) = (cfg.sweep.amplitude, cfg.sweep.data_cap);
    if !(cap > 0.0) {
        return Err(Error::Config("data_cap must be > 0".into()));
    }
    let spec = cfg.nonlinearity;

    // u0 = h_cap(amp g) is bounded by construction and exceeds the low rungs
    let (rows, failed) = ctx.map_members(|_, seed| {
        let u0 = sample_field(&measure, seed).map(|x| cutoff(amp * x, cap));
        let binding = ladder
            .first()
            .map_or(0.0, |&n| u0.values.iter().filter(|v| v.abs() > n).count() as f64 / u0.values.len() as f64);
        let (_, report) = solve_polynomial(&u0, &spec, &solver, &ladder)?;
        Ok((report.distances, report.warnings, binding))
    });

    let mut t = Table::new(&["member", "n_i", "n_j", "distance"]);
    let mut warnings = Vec::new();
    let mut min_binding = f64::INFINITY;
    for (m, (dist, warn, binding)) in rows.iter().enumerate() {
        for &(i, j, d) in dist {
            t.push(vec![m.into(), ladder[i].into(), ladder[j].into(), d.into()]);
        }
        warnings.extend(warn.iter().map(|w| format!("member {m}: {w}")));
        min_binding = min_binding.min(*binding);
    }
    let mut w_tab = Table::new(&["warning"]);
    for w in &warnings {
        w_tab.push(vec![w.clone().into()]);
    }
    let checks = vec![
        Check::at_most(
            "cauchy_violations",
            warnings.len() as f64,
            0.0,
            warnings.first().cloned().unwrap_or_else(|| "none".into()),
        ),
        Check::at_least(
            "lowest_rung_binding_fraction",
            min_binding,
            f64::MIN_POSITIVE,
            "fraction of grid points where the lowest cut-off binds, min over members",
        ),
        members_check(&failed, ctx.seeds.len()),
    ];
    Ok(Outcome {
        tables: vec![
            ("ladder_distances".into(), t),
            ("ladder_warnings".into(), w_tab),
            ("checks".into(), checks_table(&checks)),
        ],
        checks,
        failed_members: failed,
        ..Outcome::default()
    })
}

pub fn cross_defaults() -> RunConfig {
    let mut c = base("solver-cross-validation");
    c.members = 4;
    c.nonlinearity = NonlinearitySpec::burgers().with_cutoff(8.0);
    c.solver.t_final = 1.0;
    c.solver.steps = 200;
    // the last entry is the reference resolution
    c.sweep.step_counts = vec![160, 320, 640, 5120];
    c
}

pub fn cross_validation(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config;
    let measure = cfg.measure()?;
    let spec = cfg.nonlinearity;
    let solver = cfg.solver()?;
    let counts = &cfg.sweep.step_counts;
    if counts.len() < 3 || counts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("step_counts needs at least two levels and a finer reference".into()));
    }
    // Convergence runs resolve each step well below the discretization
    // error; the first step has no flux history and needs more sweeps.
    let fine = |steps: usize| -> Result<SolverConfig> {
        let mut c = SolverConfig::uniform(solver.s, solver.final_time(), steps);
        c.z = solver.z;
        c.tol = solver.tol * 1e-2;
        c.max_inner = 2 * solver.max_inner;
        c.dealias = solver.dealias;
        c.validate()?;
        Ok(c)
    };
    let fines = counts.iter().map(|&n| fine(n)).collect::<Result<Vec<_>>>()?;
    let mut picard_cfg = solver.clone();
    if picard_cfg.window.is_none() {
        picard_cfg.window = Some(10);
    }

    let (rows, failed) = ctx.map_members(|_, seed| {
        let u0 = sample_field(&measure, seed);
        let (p, _) = solve_mild(&u0, &spec, &picard_cfg)?;
        let m = step_solve(&u0, &spec, &solver)?;
        let gap = p.final_state().rms_distance(m.final_state());
        let finals = fines
            .iter()
            .map(|c| step_solve(&u0, &spec, c).map(|t| t.final_state().clone()))
            .collect::<Result<Vec<_>>>()?;
        let (reference, levels) = finals.split_last().expect("at least three levels");
        let errors: Vec<f64> = levels.iter().map(|f| f.rms_distance(reference)).collect();
        Ok((gap, errors))
    });

    let limit = CROSS_FACTOR * solver.tol;
    let mut cross = Table::new(&["member", "picard_vs_step", "limit", "pass"]);
    let mut conv = Table::new(&["member", "steps", "error", "ratio"]);
    let mut worst_gap = 0.0f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (m, (gap, errors)) in rows.iter().enumerate() {
        worst_gap = worst_gap.max(*gap);
        cross.push(vec![m.into(), (*gap).into(), limit.into(), (*gap <= limit).into()]);
        for (l, e) in errors.iter().enumerate() {
            let ratio = if l == 0 { f64::NAN } else { errors[l - 1] / e };
            if l > 0 {
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
            conv.push(vec![m.into(), counts[l].into(), (*e).into(), ratio.into()]);
        }
    }
    let checks = vec![
        Check::at_most("picard_vs_step", worst_gap, limit, "final-time rms discrepancy"),
        Check::at_least("min_convergence_ratio", lo, CONVERGENCE_RANGE.0, "error ratio under step halving"),
        Check::at_most("max_convergence_ratio", hi, CONVERGENCE_RANGE.1, "error ratio under step halving"),
        members_check(&failed, ctx.seeds.len()),
    ];
    Ok(Outcome {
        tables: vec![
            ("cross_validation".into(), cross),
            ("self_convergence".into(), conv),
            ("checks".into(), checks_table(&checks)),
        ],
        checks,
        failed_members: failed,
        ..Outcome::default()
    })
}

pub fn zero_defaults() -> RunConfig {
    let mut c = base("zero-nonlinearity");
    c.members = 20;
    c.solver.window = 0;
    c.solver.bielecki_k = 1.0;
    c
}

pub fn zero_nonlinearity(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config;
    let measure = cfg.measure()?;
    let solver = cfg.solver()?;
    let spec = NonlinearitySpec::zero();
    let (rows, failed) = ctx.map_members(|i, seed| {
        let u0 = sample_field(&measure, seed);
        let traj = solve(&u0, &spec, &solver, cfg.solver.method)?;
        let mut err = 0.0f64;
        for st in &traj.states {
            err = err.max(st.sup_distance(&semigroup_apply(&u0, st.time, solver.s)?));
        }
        Ok((err, (i == 0).then_some(traj)))
    });
    let mut t = Table::new(&["member", "sup_error", "pass"]);
    let mut worst = 0.0f64;
    let mut fields = Vec::new();
    for (m, (err, traj)) in rows.into_iter().enumerate() {
        worst = worst.max(err);
        t.push(vec![m.into(), err.into(), (err <= ZERO_FLUX_TOL).into()]);
        if let Some(tr) = traj {
            fields.push(("member0".to_string(), tr.states));
        }
    }
    let checks = vec![
        Check::at_most("sup_error", worst, ZERO_FLUX_TOL, "solver against P_t u0 at every node"),
        members_check(&failed, ctx.seeds.len()),
    ];
    Ok(Outcome {
        tables: vec![("zero_flux".into(), t), ("checks".into(), checks_table(&checks))],
        checks,
        fields,
        failed_members: failed,
    })
}
