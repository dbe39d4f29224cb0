//! JSON configurations of the simulation subcommands. Unknown keys are
//! rejected and every simulation carries an explicit seed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use lancaster_core::design::{DependenceDesign, DesignTemplate};
use lancaster_core::lancaster::Truncation;
use lancaster_core::mtp::DEFAULT_LAMBDA;
use lancaster_core::special::Probability;

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn default_lambda() -> Probability {
    Probability::new(DEFAULT_LAMBDA).expect("valid default")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub design: DependenceDesign,
    pub t: Probability,
    #[serde(default = "default_lambda")]
    pub lambda: Probability,
    pub replications: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub template: DesignTemplate,
    pub m_grid: Vec<usize>,
    pub t: Probability,
    pub replications: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakDepConfig {
    pub template: DesignTemplate,
    pub m_grid: Vec<usize>,
    pub t_grid: Vec<f64>,
    pub replications: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyonsConfig {
    pub template: DesignTemplate,
    pub t: Probability,
    pub k_max: usize,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub output: Option<PathBuf>,
}
