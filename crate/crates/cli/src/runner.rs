//! Experiment execution: member-parallel work, ordered reduction, and
//! atomic artifact output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fracflow::io::{write_fields, Table};
use fracflow::seed::member_seeds;
use fracflow::{Error, FieldRealization, Result};

use crate::config::RunConfig;
use crate::registry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// The measured quantity the check compares.
    pub value: f64,
    /// The limit it is compared against.
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `value <= threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    /// Passes when `value >= threshold`.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value >= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberFailure {
    pub member: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub tables: Vec<(String, Table)>,
    pub fields: Vec<(String, Vec<FieldRealization>)>,
    pub failed_members: Vec<MemberFailure>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub seeds: Vec<u64>,
}

impl<'a> Context<'a> {
    pub fn new(config: &'a RunConfig) -> Self {
        Self {
            config,
            seeds: member_seeds(config.seed, config.members),
        }
    }

    /// Runs `f(index, seed)` for every member on the current rayon pool.
    /// Results come back in member order; failures are split off.
    pub fn map_members<T: Send>(
        &self,
        f: impl Fn(usize, u64) -> Result<T> + Sync + Send,
    ) -> (Vec<T>, Vec<MemberFailure>) {
        let results: Vec<Result<T>> = self
            .seeds
            .par_iter()
            .enumerate()
            .map(|(i, &seed)| f(i, seed))
            .collect();
        let mut ok = Vec::with_capacity(results.len());
        let mut failed = Vec::new();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(v) => ok.push(v),
                Err(e) => failed.push(MemberFailure {
                    member: i,
                    seed: self.seeds[i],
                    message: e.to_string(),
                }),
            }
        }
        (ok, failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: RunConfig,
    pub member_seeds: Vec<u64>,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    pub checks: Vec<Check>,
    /// Table file name to SHA-256 of its bytes.
    pub tables: BTreeMap<String, String>,
    pub fields: Vec<String>,
    pub failed_members: Vec<MemberFailure>,
    pub passed: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs the configured experiment in memory on `workers` threads.
pub fn execute(config: &RunConfig, workers: usize) -> Result<(Outcome, f64)> {
    config.validate()?;
    let exp = registry::find(&config.experiment)?;
    let pool = pool(workers.max(1))?;
    let start = Instant::now();
    let outcome = pool.install(|| (exp.run)(&Context::new(config)))?;
    Ok((outcome, start.elapsed().as_secs_f64()))
}

/// Table bytes keyed by file name, as written to disk.
pub fn rendered_tables(outcome: &Outcome) -> BTreeMap<String, String> {
    outcome
        .tables
        .iter()
        .map(|(name, t)| (format!("{name}.csv"), t.to_csv()))
        .collect()
}

/// Executes and writes `manifest.json`, `tables/` and `fields/` into `out`.
/// Everything goes to a staging directory first and is renamed into place
/// only when complete.
pub fn run_experiment(config: &RunConfig, workers: usize, out: &Path) -> Result<RunManifest> {
    if out.exists() {
        return Err(Error::Config(format!("output directory {} already exists", out.display())));
    }
    let (outcome, seconds) = execute(config, workers)?;
    let staging = staging_dir(out)?;
    let result = write_artifacts(&staging, config, workers, seconds, &outcome);
    match result {
        Ok(manifest) => {
            fs::rename(&staging, out)?;
            Ok(manifest)
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

fn staging_dir(out: &Path) -> Result<PathBuf> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let name = out
        .file_name()
        .ok_or_else(|| Error::Config(format!("invalid output path {}", out.display())))?
        .to_string_lossy();
    let staging = parent.join(format!(".{name}.staging-{}", std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir_all(staging.join("tables"))?;
    Ok(staging)
}

fn write_artifacts(
    dir: &Path,
    config: &RunConfig,
    workers: usize,
    seconds: f64,
    outcome: &Outcome,
) -> Result<RunManifest> {
    let mut digests = BTreeMap::new();
    for (file, text) in rendered_tables(outcome) {
        fs::write(dir.join("tables").join(&file), &text)?;
        digests.insert(file, sha256_hex(text.as_bytes()));
    }
    let mut fields = Vec::new();
    if !outcome.fields.is_empty() {
        fs::create_dir_all(dir.join("fields"))?;
        for (name, data) in &outcome.fields {
            write_fields(&dir.join("fields").join(name), data, name)?;
            fields.push(name.clone());
        }
    }
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        member_seeds: member_seeds(config.seed, config.members),
        workers,
        wall_clock_seconds: seconds,
        checks: outcome.checks.clone(),
        tables: digests,
        fields,
        failed_members: outcome.failed_members.clone(),
        passed: outcome.passed(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json)?;
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<RunManifest> {
    let path = if path.is_dir() { path.join("manifest.json") } else { path.to_path_buf() };
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read manifest {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid manifest: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub identical: bool,
    /// Tables whose digest differs from, or is missing in, the manifest.
    pub mismatches: Vec<String>,
    pub manifest: RunManifest,
}

/// Re-runs the manifest's configuration and compares table digests.
pub fn replay(manifest_path: &Path, workers: usize, out: Option<&Path>) -> Result<ReplayReport> {
    let original = load_manifest(manifest_path)?;
    if member_seeds(original.config.seed, original.config.members) != original.member_seeds {
        return Err(Error::Config("manifest member seeds do not match its master seed".into()));
    }
    let manifest = match out {
        Some(dir) => run_experiment(&original.config, workers, dir)?,
        None => {
            let tmp = std::env::temp_dir().join(format!("fracflow-replay-{}", std::process::id()));
            let _ = fs::remove_dir_all(&tmp);
            let m = run_experiment(&original.config, workers, &tmp);
            let _ = fs::remove_dir_all(&tmp);
            m?
        }
    };
    let mut mismatches: Vec<String> = original
        .tables
        .iter()
        .filter(|(name, digest)| manifest.tables.get(*name) != Some(digest))
        .map(|(name, _)| name.clone())
        .collect();
    mismatches.extend(
        manifest
            .tables
            .keys()
            .filter(|k| !original.tables.contains_key(*k))
            .cloned(),
    );
    Ok(ReplayReport {
        identical: mismatches.is_empty(),
        mismatches,
        manifest,
    })
}
