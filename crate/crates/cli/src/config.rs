//! Optional JSON config files. Keys mirror the command's flags; flags win.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::output::CliError;

pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage("config", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage("config", format!("{}: {e}", path.display())))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: Option<u8>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub params: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub method: Option<String>,
    pub tau: Option<Vec<f64>>,
    pub boot: Option<usize>,
    pub seed: Option<u64>,
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub a1: Option<u8>,
    pub a2: Option<u8>,
    pub level: Option<f64>,
    pub width: Option<f64>,
    pub intervals: Option<u32>,
    pub mc_draws: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1FileConfig {
    pub scenario: Option<u8>,
    pub reps: Option<usize>,
    pub n: Option<usize>,
    pub boot: Option<usize>,
    pub seed: Option<u64>,
    pub tau: Option<f64>,
    pub truth_draws: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub full: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchExampleConfig {
    pub seed: Option<u64>,
    pub boot: Option<usize>,
    pub out_dir: Option<PathBuf>,
}
