//! Experiment runner: SNR sweeps over the four systems, the self-test, and
//! the CSV and plot files they produce.
//!
//! A run is described by one plain-text config with optional `[phy]`,
//! `[experiment]`, `[train]` and `[model]` tables.

mod plot;
mod selftest;
mod spec;
mod sweep;

use std::path::Path;

pub use plot::{emit_plotdata, PLOT_CSV};
pub use selftest::{selftest, Check, SelfTestReport};
pub use spec::{ExperimentSpec, SystemId};
pub use sweep::{run_sweep, sweep_rows, write_csv, MetricRow, SweepModels, CSV_HEADER, SWEEP_CSV};

use crate::error::{Error, Result};
use crate::nn::ModelConfig;
use crate::phy::PhyConfig;
use crate::train::{section, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Exit status for an error: 2 for bad configuration, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_INVARIANT,
    }
}

/// Every table of a config file, with defaults for absent ones.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub phy: PhyConfig,
    pub experiment: ExperimentSpec,
    pub train: TrainConfig,
    pub model: ModelConfig,
}

impl RunConfig {
    pub fn from_config_str(text: &str) -> Result<Self> {
        let cfg = RunConfig {
            phy: PhyConfig::from_config_str(text)?,
            experiment: section(text, "experiment")?,
            train: TrainConfig::from_config_str(text)?,
            model: section(text, "model")?,
        };
        cfg.experiment.validate()?;
        cfg.model.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, or returns the defaults when no file is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::config(format!("{}: {e}", p.display())))?;
                Self::from_config_str(&text)
            }
            None => Self::from_config_str(""),
        }
    }

    /// Replaces the master seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.experiment.seed = seed;
        self.train.seed = seed;
        self
    }
}
