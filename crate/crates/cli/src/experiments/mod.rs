//! Canned experiments, one per acceptance criterion plus the zero-flux
//! sanity run. Defaults are the criterion-scale settings.

pub mod determinism;
pub mod linear;
pub mod solver;
pub mod stats;

use std::f64::consts::PI;

use fracflow::io::Table;
use fracflow::nonlinearity::NonlinearitySpec;
use fracflow::random_fields::MeasureSpec;

use crate::config::{GridSpec, RunConfig, SolverSpec, Sweep};
use crate::runner::{Check, MemberFailure};

pub const DEFAULT_SEED: u64 = 20_240_917;

/// Desk-scale setup shared by most experiments: `d = 1`, `n = 512`,
/// period `8π`, unit-mass Gaussian bump, `t ∈ [0, 2]`.
pub(crate) fn base(name: &str) -> RunConfig {
    RunConfig {
        experiment: name.to_string(),
        members: 2000,
        seed: DEFAULT_SEED,
        grid: GridSpec {
            dim: 1,
            n: 512,
            len: 8.0 * PI,
        },
        measure: MeasureSpec::GaussianBump {
            width: 0.8,
            mass: 1.0,
            mean: 0.0,
        },
        nonlinearity: NonlinearitySpec::zero(),
        solver: SolverSpec::default(),
        sweep: Sweep {
            sigmas: 3.0,
            ..Sweep::default()
        },
        output: None,
    }
}

/// Fails when any member errored; the failures themselves go to the manifest.
pub(crate) fn members_check(failed: &[MemberFailure], total: usize) -> Check {
    let detail = match failed.first() {
        Some(f) => format!("{} of {total} members failed; first: member {} ({})", failed.len(), f.member, f.message),
        None => format!("all {total} members completed"),
    };
    Check::at_most("failed_members", failed.len() as f64, 0.0, detail)
}

pub(crate) fn checks_table(checks: &[Check]) -> Table {
    let mut t = Table::new(&["check", "value", "threshold", "pass"]);
    for c in checks {
        t.push(vec![c.name.clone().into(), c.value.into(), c.threshold.into(), c.passed.into()]);
    }
    t
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    for _ in 0..200 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    f(0.5 * (a + b))
}

/// Formats a parameter for table names: `0.75 -> "0.75"`, `2.0 -> "2"`.
pub(crate) fn tag(x: f64) -> String {
    format!("{x}")
}
