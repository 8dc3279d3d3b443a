//! The run configuration document.
//!
//! Every section is optional and unknown keys are rejected, so `{}` is a
//! complete configuration. A top-level `seed`, once resolved, is copied
//! into the oracle and training sections; the echo written next to each
//! output carries the resolved values and reloads to the same config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tcnn_core::audit::AuditTolerances;
use tcnn_core::oracle::{reproduction_layout, OracleParams};
use tcnn_core::trainer::{GridSpec, SearchSpace, TrainConfig};
use tcnn_core::tsr::ToughnessMode;
use tcnn_core::{Error, Result};

pub const SEED_ENV: &str = "TCNN_SEED";

/// Loading paths to synthesize. Both fields unset means the reproduction
/// layout (10 paths, 236 points).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub angles_deg: Option<Vec<f64>>,
    pub stations: Option<Vec<usize>>,
}

impl SynthSpec {
    pub fn layout(&self) -> Result<(Vec<f64>, Vec<usize>)> {
        match (&self.angles_deg, &self.stations) {
            (None, None) => Ok(reproduction_layout()),
            (Some(a), Some(s)) => Ok((a.clone(), s.clone())),
            _ => Err(Error::Config(
                "synth.angles_deg and synth.stations must be given together".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSpec {
    pub grid: GridSpec,
    pub tolerances: AuditTolerances,
    pub toughness_mode: ToughnessMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpec {
    pub budget: usize,
    pub space: SearchSpace,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            budget: 8,
            space: SearchSpace::default(),
        }
    }
}

/// Input files; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileSpec {
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub oracle: OracleParams,
    pub synth: SynthSpec,
    pub train: TrainConfig,
    pub audit: AuditSpec,
    pub search: SearchSpec,
    pub files: FileSpec,
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|source| Error::Json {
            path: origin.to_owned(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.oracle.validate()?;
        self.synth.layout()?;
        self.train.validate()?;
        self.audit.grid.validate()?;
        self.audit.tolerances.validate()?;
        if self.search.budget == 0 {
            return Err(Error::Config("search.budget must be >= 1".into()));
        }
        self.search.space.validate()
    }

    /// Apply the seed precedence: flag, then `TCNN_SEED`, then the
    /// document's own `seed`. Without any of them the section seeds stand.
    pub fn resolve_seed(&mut self, flag: Option<u64>, env: Option<&str>) -> Result<()> {
        let env = match env {
            Some(v) => Some(v.trim().parse::<u64>().map_err(|_| {
                Error::Config(format!("{SEED_ENV} must be a non-negative integer, got {v:?}"))
            })?),
            None => None,
        };
        if let Some(seed) = flag.or(env).or(self.seed) {
            self.seed = Some(seed);
            self.oracle.seed = seed;
            self.train.seed = seed;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Write the effective config to `path`.
    pub fn write_echo(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
    }
}

/// `data.csv` -> `data.config.json`, next to the output it describes.
pub fn echo_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    output.with_file_name(format!("{stem}.config.json"))
}
