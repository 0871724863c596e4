use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemId {
    /// Analog symbols over an AWGN channel with no PHY at all.
    IdealAnalog,
    /// Analog symbols emulated through the digital PHY, soft recovery.
    Emulated,
    /// Symbols serialized as 32-bit floats over the coded PHY.
    FloatSerialization,
    /// Analog-trained codec deployed on the emulated link with hard
    /// recovery and no adaptation.
    ZeroShot,
}

impl SystemId {
    pub const ALL: [SystemId; 4] = [
        SystemId::IdealAnalog,
        SystemId::Emulated,
        SystemId::FloatSerialization,
        SystemId::ZeroShot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemId::IdealAnalog => "ideal-analog",
            SystemId::Emulated => "emulated",
            SystemId::FloatSerialization => "float-serialization",
            SystemId::ZeroShot => "zero-shot",
        }
    }

    /// Whether the system needs trained models.
    pub fn needs_models(self) -> bool {
        self == SystemId::ZeroShot
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SystemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SystemId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::config(format!("unknown system `{s}`")))
    }
}

/// One sweep: which systems, at which SNRs, on how much data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Ascending SNR points in dB.
    pub snrs: Vec<f64>,
    /// Random Gaussian symbols per cell for symbol-level metrics.
    pub symbols: usize,
    /// Synthetic images per cell for image-level metrics.
    pub images: usize,
    pub systems: Vec<SystemId>,
    pub seed: u64,
    pub out: PathBuf,
    /// Directory of trained models. Image metrics are reported for the
    /// systems whose models are present.
    pub checkpoints: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            snrs: (0..9).map(|i| -5.0 + 5.0 * i as f64).collect(),
            symbols: 10_000,
            images: 256,
            systems: SystemId::ALL.to_vec(),
            seed: 1,
            out: PathBuf::from("out"),
            checkpoints: None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.snrs.is_empty() {
            return Err(Error::config("snr list is empty"));
        }
        if self.snrs.iter().any(|s| !s.is_finite()) {
            return Err(Error::config("snr values must be finite"));
        }
        if self.snrs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("snr list must be strictly ascending"));
        }
        if self.symbols == 0 || self.images == 0 {
            return Err(Error::config("symbols and images per point must be at least 1"));
        }
        if self.systems.is_empty() {
            return Err(Error::config("no systems selected"));
        }
        let mut seen = self.systems.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.systems.len() {
            return Err(Error::config("systems listed twice"));
        }
        Ok(())
    }
}
