//! Linear-flow experiments: spectral decay, semigroup law, kernel
//! identities and the gradient bound.

use std::f64::consts::PI;

use fracflow::estimate::Estimate;
use fracflow::io::Table;
use fracflow::random_fields::{coefficients, sample_field, MeasureSpec, ROUNDOFF_FLOOR};
use fracflow::spectral::{gradient_constant, grad_semigroup_apply, kernel_mass, kernel_values, semigroup_apply};
use fracflow::{FieldRealization, Grid, Result};

use super::{base, checks_table, golden_max, members_check};
use crate::config::{GridSpec, RunConfig};
use crate::runner::{Check, Context, Outcome};

pub const LAW_TOL: f64 = 1e-12;
pub const MASS_TOL: f64 = 1e-8;
pub const SCALING_TOL: f64 = 1e-6;
pub const GAUSSIAN_TOL: f64 = 1e-8;
/// Relative roundoff allowance on the gradient bound.
pub const GRADIENT_SLACK: f64 = 1e-12;

pub fn spectral_decay_defaults() -> RunConfig {
    let mut c = base("linear-spectral-decay");
    c.grid.len = 2.0 * PI;
    c.measure = MeasureSpec::TwoMode {
        modes: [3, 0],
        mass: 1.0,
        mean: 0.0,
    };
    c.sweep.s_values = vec![0.6, 0.75, 1.0];
    c.sweep.times = vec![0.1, 0.5, 1.0];
    c
}

/// Modes kept in the spectral comparison: one per `±k` pair, with weight
/// above `1e-6` of the total mass.
fn retained_modes(weights: &[f64], grid: &Grid) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    (0..grid.size())
        .filter(|&i| i <= grid.negate(i) && weights[i] > 1e-6 * total)
        .collect()
}

pub fn spectral_decay(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config;
    let measure = cfg.measure()?;
    let grid = measure.grid;
    let modes = retained_modes(&measure.weights, &grid);
    let combos: Vec<(f64, f64)> = cfg
        .sweep
        .s_values
        .iter()
        .flat_map(|&s| cfg.sweep.times.iter().map(move |&t| (s, t)))
        .collect();

    let (rows, failed) = ctx.map_members(|_, seed| {
        let u0 = sample_field(&measure, seed);
        let mut out = Vec::with_capacity(combos.len() * modes.len());
        for &(s, t) in &combos {
            let z = coefficients(&semigroup_apply(&u0, t, s)?);
            out.extend(modes.iter().map(|&i| 0.5 * (z[i].norm_sqr() + z[grid.negate(i)].norm_sqr())));
        }
        Ok(out)
    });

    let mut t = Table::new(&["s", "t", "mode", "target", "estimate", "stderr", "z", "pass"]);
    let mut worst = 0.0f64;
    for (c, &(s, time)) in combos.iter().enumerate() {
        for (m, &i) in modes.iter().enumerate() {
            let column: Vec<f64> = rows.iter().map(|r| r[c * modes.len() + m]).collect();
            let est = Estimate::from_members(&column);
            let lam = grid.wavenumber_norm(i).powf(2.0 * s);
            let target = (-2.0 * time * lam).exp() * measure.weights[i];
            let z = est.z_score(target, ROUNDOFF_FLOOR * target);
            worst = worst.max(z.abs());
            t.push(vec![
                s.into(),
                time.into(),
                (grid.mode_number(i) as f64).into(),
                target.into(),
                est.value.into(),
                est.stderr.into(),
                z.into(),
                (z.abs() <= cfg.sweep.sigmas).into(),
            ]);
        }
    }
    let checks = vec![
        Check::at_most(
            "max_abs_z",
            worst,
            cfg.sweep.sigmas,
            format!("{} modes x {} (s, t) pairs", modes.len(), combos.len()),
        ),
        members_check(&failed, ctx.seeds.len()),
    ];
    Ok(Outcome {
        tables: vec![("spectrum".into(), t), ("checks".into(), checks_table(&checks))],
        checks,
        failed_members: failed,
        ..Outcome::default()
    })
}

pub fn semigroup_defaults() -> RunConfig {
    let mut c = base("semigroup-contraction");
    c.members = 16;
    c.sweep.s_values = vec![0.6, 0.75, 1.0];
    c.sweep.times = (0..20).map(|j| 2.0 * j as f64 / 19.0).collect();
    c
}

pub fn semigroup(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config;
    let measure = cfg.measure()?;
    let times = &cfg.sweep.times;
    let s_values = &cfg.sweep.s_values;

    // per member: (law errors per (s, t_j, t_{n-1-j}), rms per (s, t_j))
    let (rows, failed) = ctx.map_members(|_, seed| {
        let u0 = sample_field(&measure, seed);
        let mut law = Vec::new();
        let mut rms = Vec::new();
        for &s in s_values {
            for (j, &t1) in times.iter().enumerate() {
                let t2 = times[times.len() - 1 - j];
                let two = semigroup_apply(&semigroup_apply(&u0, t1, s)?, t2, s)?;
                law.push(two.sup_distance(&semigroup_apply(&u0, t1 + t2, s)?));
                rms.push(semigroup_apply(&u0, t1, s)?.rms());
            }
        }
        Ok((law, rms))
    });

    let nt = times.len();
    let mut law_t = Table::new(&["s", "t1", "t2", "max_sup_error", "pass"]);
    let mut rms_t = Table::new(&["s", "t", "mean_rms", "increases", "pass"]);
    let mut worst_law = 0.0f64;
    let mut increases = 0usize;
    for (a, &s) in s_values.iter().enumerate() {
        for j in 0..nt {
            let k = a * nt + j;
            let err = rows.iter().fold(0.0f64, |m, r| m.max(r.0[k]));
            worst_law = worst_law.max(err);
            law_t.push(vec![
                s.into(),
                times[j].into(),
                times[nt - 1 - j].into(),
                err.into(),
                (err <= LAW_TOL).into(),
            ]);
            let up = if j == 0 {
                0
            } else {
                rows.iter().filter(|r| r.1[k] > r.1[k - 1]).count()
            };
            increases += up;
            let mean = rows.iter().map(|r| r.1[k]).sum::<f64>() / rows.len().max(1) as f64;
            rms_t.push(vec![s.into(), times[j].into(), mean.into(), up.into(), (up == 0).into()]);
        }
    }
    let checks = vec![
        Check::at_most("semigroup_law_sup_error", worst_law, LAW_TOL, "max over members, s and time pairs"),
        Check::at_most(
            "rms_increases",
            increases as f64,
            0.0,
            format!("exact comparison on a {nt}-point time grid"),
        ),
        members_check(&failed, ctx.seeds.len()),
    ];
    Ok(Outcome {
        tables: vec![
            ("semigroup_law".into(), law_t),
            ("contraction".into(), rms_t),
            ("checks".into(), checks_table(&checks)),
        ],
        checks,
        failed_members: failed,
        ..Outcome::default()
    })
}

pub fn kernel_defaults() -> RunConfig {
    let mut c = base("kernel-identities");
    c.members = 1;
    c.grid = GridSpec {
        dim: 1,
        n: 512,
        len: 40.0,
    };
    c.sweep.s_values = vec![0.6, 0.75, 1.0];
    c.sweep.times = vec![0.05, 0.5, 1.0, 2.0];
    c
}

/// `20 max(√t, 0.8)`: wide enough that the periodized Gaussian equals the
/// free one to roundoff, never narrower than `20√t`.
fn gaussian_period(t: f64) -> f64 {
    20.0 * t.sqrt().max(0.8)
}

pub fn kernel_identities(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config;
    let base_grid = cfg.grid()?;
    let n = base_grid.n();
    let mut mass_t = Table::new(&["s", "t", "len", "mass_error", "pass"]);
    let mut scale_t = Table::new(&["s", "t", "max_rel_error", "pass"]);
    let mut gauss_t = Table::new(&["t", "len", "sup_error", "pass"]);
    let (mut worst_mass, mut worst_scale, mut worst_gauss) = (0.0f64, 0.0f64, 0.0f64);

    for &s in &cfg.sweep.s_values {
        let p1 = kernel_values(1.0, s, base_grid)?;
        for &t in &cfg.sweep.times {
            let len = gaussian_period(t);
            let g = Grid::new(1, n, len)?;
            let err = (kernel_mass(&kernel_values(t, s, g)?) - 1.0).abs();
            worst_mass = worst_mass.max(err);
            mass_t.push(vec![s.into(), t.into(), len.into(), err.into(), (err <= MASS_TOL).into()]);

            // p_t on the grid scaled by t^{1/2s} is p_1 divided by the scale
            let scale = t.powf(1.0 / (2.0 * s));
            let gs = Grid::new(1, n, base_grid.len() * scale)?;
            let pt = kernel_values(t, s, gs)?;
            let cut = 1e-6 * p1.values[0];
            let rel = (0..gs.size())
                .filter(|&i| p1.values[i].abs() > cut)
                .map(|i| (pt.values[i] * scale / p1.values[i] - 1.0).abs())
                .fold(0.0f64, f64::max);
            worst_scale = worst_scale.max(rel);
            scale_t.push(vec![s.into(), t.into(), rel.into(), (rel <= SCALING_TOL).into()]);
        }
    }

    for &t in &cfg.sweep.times {
        let len = gaussian_period(t);
        let g = Grid::new(1, n, len)?;
        let p = kernel_values(t, 1.0, g)?;
        let gauss = |x: f64| (-x * x / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
        let err = (0..g.size()).fold(0.0f64, |m, i| {
            let x = g.position(i)[0];
            let exact: f64 = (-3..=3).map(|w| gauss(x + w as f64 * len)).sum();
            m.max((p.values[i] - exact).abs())
        });
        worst_gauss = worst_gauss.max(err);
        gauss_t.push(vec![t.into(), len.into(), err.into(), (err <= GAUSSIAN_TOL).into()]);
    }

    let checks = vec![
        Check::at_most("mass_error", worst_mass, MASS_TOL, "|sum p_t dx - 1|"),
        Check::at_most("scaling_rel_error", worst_scale, SCALING_TOL, "p_t against rescaled p_1"),
        Check::at_most("gaussian_sup_error", worst_gauss, GAUSSIAN_TOL, "s = 1 against the periodized heat kernel"),
    ];
    Ok(Outcome {
        tables: vec![
            ("kernel_mass".into(), mass_t),
            ("kernel_scaling".into(), scale_t),
            ("kernel_gaussian".into(), gauss_t),
            ("checks".into(), checks_table(&checks)),
        ],
        checks,
        ..Outcome::default()
    })
}

pub fn gradient_defaults() -> RunConfig {
    let mut c = base("gradient-semigroup-bound");
    c.members = 1;
    c.grid.len = 2.0 * PI;
    c.sweep.s_values = vec![0.6, 0.75, 1.0];
    c.sweep.times = (0..=16).map(|j| 10f64.powf(-3.0 + 0.25 * j as f64)).collect();
    c
}

pub fn gradient_bound(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config;
    let grid = cfg.grid()?;
    let z = cfg.solver.z;
    let k1 = 2.0 * PI / grid.len();
    let probes: Vec<FieldRealization> = (1..grid.n() / 2)
        .map(|m| FieldRealization::from_fn(grid, |x| (m as f64 * k1 * x[0]).cos()))
        .collect();

    let mut t_tab = Table::new(&["s", "t", "amplification", "bound", "pass"]);
    let mut c_tab = Table::new(&["s", "c_s_search", "c_s_closed_form"]);
    let mut violations = 0usize;
    let mut worst_gap = f64::NEG_INFINITY;
    for &s in &cfg.sweep.s_values {
        let c_s = golden_max(|r| r * (-r.powf(2.0 * s)).exp(), 0.0, 10.0);
        c_tab.push(vec![s.into(), c_s.into(), gradient_constant(s)?.into()]);
        for &t in &cfg.sweep.times {
            let bound = c_s * t.powf(-1.0 / (2.0 * s));
            let mut amp = 0.0f64;
            for u in &probes {
                amp = amp.max(grad_semigroup_apply(u, t, s, z)?.rms() / u.rms());
            }
            let ok = amp <= bound * (1.0 + GRADIENT_SLACK);
            violations += usize::from(!ok);
            worst_gap = worst_gap.max(amp / bound - 1.0);
            t_tab.push(vec![s.into(), t.into(), amp.into(), bound.into(), ok.into()]);
        }
    }
    let checks = vec![Check::at_most(
        "violations",
        violations as f64,
        0.0,
        format!("largest amplification / bound - 1 = {worst_gap:.3e}"),
    )];
    Ok(Outcome {
        tables: vec![
            ("gradient_bound".into(), t_tab),
            ("gradient_constant".into(), c_tab),
            ("checks".into(), checks_table(&checks)),
        ],
        checks,
        ..Outcome::default()
    })
}
