//! Optional TOML configuration file mirroring the command-line flags.
//!
//! ```toml
//! preset = "id6"
//! weights = "model.gtcw"
//! iva_iters = 20
//! no_iva = false
//! seed = 7
//! out = "enhanced"
//! jobs = 4
//! ```
//!
//! Flags given on the command line take precedence.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub preset: Option<String>,
    pub weights: Option<PathBuf>,
    pub iva_iters: Option<usize>,
    pub no_iva: Option<bool>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| e.context(path))
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("bad configuration: {e}")))
    }
}

/// Common options after merging flags over the configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub preset: String,
    pub weights: Option<PathBuf>,
    pub iva_iters: usize,
    pub no_iva: bool,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            preset: "id6".into(),
            weights: None,
            iva_iters: dcse::auxiva::IvaConfig::default().iterations,
            no_iva: false,
            seed: 0,
            out: None,
            jobs: 1,
        }
    }
}

impl Settings {
    /// `flags` wins over `file`, which wins over the defaults.
    pub fn resolve(file: &FileConfig, flags: &FileConfig) -> CliResult<Self> {
        let d = Settings::default();
        let s = Settings {
            preset: flags.preset.clone().or_else(|| file.preset.clone()).unwrap_or(d.preset),
            weights: flags.weights.clone().or_else(|| file.weights.clone()),
            iva_iters: flags.iva_iters.or(file.iva_iters).unwrap_or(d.iva_iters),
            no_iva: flags.no_iva.or(file.no_iva).unwrap_or(d.no_iva),
            seed: flags.seed.or(file.seed).unwrap_or(d.seed),
            out: flags.out.clone().or_else(|| file.out.clone()),
            jobs: flags.jobs.or(file.jobs).unwrap_or(d.jobs),
        };
        if s.jobs == 0 {
            return Err(CliError::Validation("--jobs must be at least 1".into()));
        }
        Ok(s)
    }
}
