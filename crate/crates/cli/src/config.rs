//! JSON experiment configurations.
//!
//! Every config is parsed strictly: unknown keys are rejected so that typos
//! surface as schema errors rather than silently falling back to defaults.

use std::path::Path;

use cheeger_core::capacity::CapacityOptions;
use cheeger_core::oracles::HoleRegime;
use cheeger_core::perturbation_lab::{ExperimentOptions, HoleRate, Remainder};
use cheeger_core::{GridSpec, Shape, SolverOptions};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// A cubic grid `[lo, hi]^dim` with `cells` cells per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub cells: usize,
    pub lo: f64,
    pub hi: f64,
}

impl GridConfig {
    pub fn spec(&self) -> cheeger_core::Result<GridSpec> {
        GridSpec::cube(self.dim, self.cells, self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub grid: GridConfig,
    pub domain: Shape,
    #[serde(default)]
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityConfig {
    pub grid: GridConfig,
    /// The compact set; balls and unions of balls also get the closed form.
    pub set: Shape,
    #[serde(default)]
    pub options: CapacityOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// Balls removed from `domain`; hole `i` has radius `rates[i].scale · δ^rates[i].exponent`.
    Hole {
        domain: Shape,
        centers: Vec<Vec<f64>>,
        #[serde(default)]
        rates: Option<Vec<HoleRate>>,
        #[serde(default)]
        dominant: usize,
        deltas: Vec<f64>,
        #[serde(default)]
        regime: Option<HoleRegime>,
        /// Move the dominant centre onto the reduced boundary of the base
        /// eigenset along the ray from this point through the configured centre.
        #[serde(default)]
        snap_to_boundary_from: Option<Vec<f64>>,
    },
    /// `T_δ(x) = (1 − δΛ)x + R(x, δ)` applied to `shape`, swept over `±δ`.
    Diffeo {
        shape: Shape,
        rate: f64,
        #[serde(default = "no_remainder")]
        remainder: Remainder,
        deltas: Vec<f64>,
    },
}

fn no_remainder() -> Remainder {
    Remainder::None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    pub grid: GridConfig,
    pub family: Family,
    #[serde(default)]
    pub options: ExperimentOptions,
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub resolution: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

pub trait Resolve {
    fn apply(&mut self, o: &Overrides);
}

impl Resolve for SolveConfig {
    fn apply(&mut self, o: &Overrides) {
        if let Some(n) = o.resolution {
            self.grid.cells = n;
        }
        if o.seed.is_some() {
            self.solver.seed = o.seed;
        }
    }
}

impl Resolve for CapacityConfig {
    fn apply(&mut self, o: &Overrides) {
        if let Some(n) = o.resolution {
            self.grid.cells = n;
        }
    }
}

impl Resolve for PerturbConfig {
    fn apply(&mut self, o: &Overrides) {
        if let Some(n) = o.resolution {
            self.grid.cells = n;
        }
        if o.seed.is_some() {
            self.options.solver.seed = o.seed;
        }
        if let Some(t) = o.threads {
            self.options.threads = t;
        }
    }
}

/// Errors that map to the configuration exit code.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn load<T: DeserializeOwned + Resolve>(path: &Path, o: &Overrides) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: T = serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    cfg.apply(o);
    Ok(cfg)
}
