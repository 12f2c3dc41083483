//! Flat `key = value` run configuration (TOML syntax). Every key mirrors a
//! command-line flag with dashes replaced by underscores; flags win.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Result, TomographyError};
use crate::lags::LagSet;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub routing: Option<PathBuf>,
    pub traffic: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub links: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub estimate: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,

    pub profile: Option<String>,
    pub rank: Option<usize>,
    pub lags: Option<String>,
    pub beta_h: Option<f64>,
    pub beta_a: Option<f64>,
    pub missing_mode: Option<String>,
    pub q_max: Option<usize>,

    pub q_max_gd: Option<usize>,
    pub r_max_em: Option<usize>,
    pub delta_gd: Option<f64>,
    pub delta_em: Option<f64>,

    pub seed: Option<u64>,
    pub routers: Option<usize>,
    pub timestamps: Option<usize>,
    pub noise: Option<f64>,
    pub missing_fraction: Option<f64>,
    pub train_t: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| TomographyError::Config(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            TomographyError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        RunConfig::parse(&text)
    }
}

/// Named experiment presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Internet2,
    Geant,
    None,
}

impl FromStr for Profile {
    type Err = TomographyError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "internet2" | "abilene" => Ok(Profile::Internet2),
            "geant" => Ok(Profile::Geant),
            "none" => Ok(Profile::None),
            other => Err(TomographyError::Usage(format!(
                "unknown profile '{other}' (expected internet2, geant or none)"
            ))),
        }
    }
}

impl Profile {
    /// Training defaults of the preset. Without a preset the rank is 20 and
    /// the lag set is empty.
    pub fn train_config(self) -> TrainConfig {
        match self {
            Profile::Internet2 => TrainConfig::internet2(),
            Profile::Geant => TrainConfig::geant(),
            Profile::None => TrainConfig::new(20, LagSet::empty()),
        }
    }
}
