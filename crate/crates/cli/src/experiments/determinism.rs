//! Runs another experiment under several worker counts and compares the
//! rendered tables byte for byte.

use fracflow::io::Table;
use fracflow::{Error, Result};

use super::{base, checks_table};
use crate::config::RunConfig;
use crate::runner::{execute, rendered_tables, sha256_hex, Check, Context, Outcome};

pub fn defaults() -> RunConfig {
    let mut c = base("replay-determinism");
    c.members = 24;
    c.sweep.target = "moment-monotonicity".into();
    c.sweep.worker_counts = vec![1, 4];
    c
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config;
    if cfg.sweep.target == cfg.experiment {
        return Err(Error::Config("replay-determinism cannot target itself".into()));
    }
    if cfg.sweep.worker_counts.len() < 2 || cfg.sweep.worker_counts.contains(&0) {
        return Err(Error::Config("worker_counts needs at least two positive entries".into()));
    }
    let mut target = RunConfig::canned(&cfg.sweep.target)?;
    target.members = cfg.members;
    target.seed = cfg.seed;

    let mut t = Table::new(&["workers", "table", "sha256"]);
    let mut reference = None;
    let mut mismatches = Vec::new();
    for &w in &cfg.sweep.worker_counts {
        let (outcome, _) = execute(&target, w)?;
        let rendered = rendered_tables(&outcome);
        for (name, text) in &rendered {
            t.push(vec![w.into(), name.clone().into(), sha256_hex(text.as_bytes()).into()]);
        }
        match &reference {
            None => reference = Some(rendered),
            Some(r) => {
                if *r != rendered {
                    mismatches.push(w);
                }
            }
        }
    }
    let tables = reference.map_or(0, |r| r.len());
    let checks = vec![
        Check::at_most(
            "mismatched_worker_counts",
            mismatches.len() as f64,
            0.0,
            format!(
                "{} tables of {} with {} members compared across workers {:?}",
                tables, cfg.sweep.target, cfg.members, cfg.sweep.worker_counts
            ),
        ),
        Check::at_least("tables_compared", tables as f64, 1.0, "target must produce tables"),
    ];
    Ok(Outcome {
        tables: vec![("digests".into(), t), ("checks".into(), checks_table(&checks))],
        checks,
        ..Outcome::default()
    })
}
