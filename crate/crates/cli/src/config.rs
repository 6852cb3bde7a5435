//! Run configuration. A config file only needs the fields it changes: it is
//! merged over the canned defaults of its experiment, and the fully resolved
//! result is what the manifest records.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use fracflow::mild_solver::{Dealias, SolverConfig};
use fracflow::nonlinearity::NonlinearitySpec;
use fracflow::random_fields::{MeasureSpec, SpectralMeasure};
use fracflow::{Error, Grid, Result};

use crate::registry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub len: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.dim, self.n, self.len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Picard,
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub s: f64,
    pub z: [f64; 2],
    pub t_final: f64,
    pub steps: usize,
    pub bielecki_k: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub dealias: Dealias,
    pub max_inner: usize,
    /// Subintervals per Picard window; 0 iterates over the whole grid.
    pub window: usize,
    pub method: Method,
}

impl SolverSpec {
    pub fn build(&self) -> Result<SolverConfig> {
        if self.steps == 0 || !(self.t_final > 0.0) {
            return Err(Error::Config("solver needs t_final > 0 and steps >= 1".into()));
        }
        let mut cfg = SolverConfig::uniform(self.s, self.t_final, self.steps);
        cfg.z = self.z;
        cfg.bielecki_k = self.bielecki_k;
        cfg.tol = self.tol;
        cfg.max_iter = self.max_iter;
        cfg.dealias = self.dealias;
        cfg.max_inner = self.max_inner;
        cfg.window = (self.window > 0).then_some(self.window);
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            s: 0.75,
            z: [1.0, 0.0],
            t_final: 2.0,
            steps: 200,
            bielecki_k: 0.0,
            tol: 1e-8,
            max_iter: 60,
            dealias: Dealias::Auto,
            max_inner: 5,
            window: 10,
            method: Method::Picard,
        }
    }
}

/// Parameter lists swept by an experiment. Unused lists are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub s_values: Vec<f64>,
    pub times: Vec<f64>,
    pub moment_orders: Vec<f64>,
    pub ladder: Vec<f64>,
    pub exponents: Vec<[f64; 2]>,
    pub h_values: Vec<f64>,
    pub k_factors: Vec<f64>,
    pub lipschitz: f64,
    /// Multiplier on the initial data before the cut-off ladder.
    pub amplitude: f64,
    /// Cut-off applied to the scaled initial data.
    pub data_cap: f64,
    /// Standard-error multiple in statistical checks.
    pub sigmas: f64,
    /// Relative tolerance where a check allows one.
    pub rel_tol: f64,
    /// Step counts for convergence studies.
    pub step_counts: Vec<usize>,
    /// Worker counts compared by the determinism check.
    pub worker_counts: Vec<usize>,
    /// Experiment replayed by the determinism check.
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    pub members: usize,
    pub seed: u64,
    pub grid: GridSpec,
    pub measure: MeasureSpec,
    pub nonlinearity: NonlinearitySpec,
    pub solver: SolverSpec,
    pub sweep: Sweep,
    /// Artifact directory; `--out` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        registry::find(&self.experiment)?;
        if self.members == 0 {
            return Err(Error::Config("members must be >= 1".into()));
        }
        let grid = self.grid.build()?;
        self.measure.build(grid)?;
        self.nonlinearity.validate()?;
        self.solver.build()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        self.grid.build()
    }

    pub fn measure(&self) -> Result<SpectralMeasure> {
        self.measure.build(self.grid()?)
    }

    pub fn solver(&self) -> Result<SolverConfig> {
        self.solver.build()
    }

    pub fn canned(experiment: &str) -> Result<Self> {
        let exp = registry::find(experiment)?;
        Ok((exp.defaults)())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let name = user
            .get("experiment")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::Config("config must name an experiment".into()))?;
        let base = Self::canned(name)?;
        let mut merged = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, user);
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Recursive table merge; tagged enums (`measure`, `nonlinearity`) are
/// replaced wholesale when the tag changes so that stale fields of the
/// default variant do not leak in.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => {
                let retagged = ["family", "kind"]
                    .iter()
                    .any(|tag| o.get(*tag).is_some_and(|t| b.get(*tag) != Some(t)));
                if retagged {
                    *b = o;
                } else {
                    merge(b, o);
                }
            }
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Where a run writes its artifacts when neither `--out` nor `output` is
/// given.
pub fn default_output(cfg: &RunConfig) -> PathBuf {
    cfg.output
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{}-seed{}", cfg.experiment, cfg.seed)))
}
