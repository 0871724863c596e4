use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training SNR per batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnrPolicy {
    Fixed(f64),
    /// Uniform over `[lo, hi]` dB.
    Uniform(f64, f64),
}

impl SnrPolicy {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            SnrPolicy::Fixed(s) => s,
            SnrPolicy::Uniform(lo, hi) if lo == hi => lo,
            SnrPolicy::Uniform(lo, hi) => rng.random_range(lo..=hi),
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            SnrPolicy::Fixed(s) => (s, s),
            SnrPolicy::Uniform(lo, hi) => (lo, hi),
        }
    }
}

/// What the link-level stages transmit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetSource {
    /// Unit-power complex Gaussian symbols.
    Gaussian,
    /// Outputs of the current image encoder on glyph images.
    Jscc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Curriculum {
    pub snr: SnrPolicy,
    pub source: TargetSource,
}

impl Default for Curriculum {
    fn default() -> Self {
        Curriculum {
            snr: SnrPolicy::Uniform(-5.0, 35.0),
            source: TargetSource::Gaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub lr: f64,
    pub momentum: f64,
    /// Waveforms (stages 1 and 2) or images (codec and stage 3) per step.
    pub batch_size: usize,
    /// Weight of the compensation loss in the joint objective.
    pub gamma: f64,
    pub comp_epochs: usize,
    pub comp_waveforms: usize,
    pub symbols_per_waveform: usize,
    /// SNR of the stage-1 dataset; distortion there is dominated by the
    /// guard interval and quantization.
    pub comp_snr_db: f64,
    pub proxy_epochs: usize,
    /// Records per surrogate update (stage 2 and refresh).
    pub proxy_batch_size: usize,
    pub proxy_records: usize,
    /// Codec pre-training over the ideal analog channel.
    pub jscc_epochs: usize,
    pub train_images: usize,
    pub steps_per_cycle: usize,
    pub max_cycles: usize,
    /// Fresh records transmitted per refresh phase.
    pub refresh_batch_count: usize,
    pub refresh_epochs: usize,
    /// Stop when the relative joint-loss improvement over a cycle is below this.
    pub tolerance: f64,
    pub curriculum: Curriculum,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 7,
            lr: 0.05,
            momentum: 0.9,
            batch_size: 24,
            gamma: 0.5,
            comp_epochs: 30,
            comp_waveforms: 32,
            symbols_per_waveform: 144,
            comp_snr_db: 35.0,
            proxy_epochs: 100,
            proxy_batch_size: 2,
            proxy_records: 32,
            jscc_epochs: 60,
            train_images: 512,
            steps_per_cycle: 100,
            max_cycles: 8,
            refresh_batch_count: 16,
            refresh_epochs: 5,
            tolerance: 1e-3,
            curriculum: Curriculum::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        let counts = [
            ("batch_size", self.batch_size),
            ("comp_epochs", self.comp_epochs),
            ("comp_waveforms", self.comp_waveforms),
            ("symbols_per_waveform", self.symbols_per_waveform),
            ("proxy_epochs", self.proxy_epochs),
            ("proxy_batch_size", self.proxy_batch_size),
            ("jscc_epochs", self.jscc_epochs),
            ("train_images", self.train_images),
            ("steps_per_cycle", self.steps_per_cycle),
            ("max_cycles", self.max_cycles),
            ("refresh_epochs", self.refresh_epochs),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("{name} must be at least 1")));
        }
        if self.proxy_records < 2 {
            return Err(Error::config("proxy_records must be at least 2 (train and held-out)"));
        }
        if self.refresh_batch_count < 2 {
            return Err(Error::config("refresh_batch_count must be at least 2 (refit and held-out)"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must lie in [0, 1)"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::config("tolerance must be non-negative"));
        }
        let (lo, hi) = self.curriculum.snr.bounds();
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::config("training SNR range must be finite and ordered"));
        }
        Ok(())
    }

    /// Rejects training SNRs outside the sweep range.
    pub fn check_snr_within(&self, lo: f64, hi: f64) -> Result<()> {
        let (a, b) = self.curriculum.snr.bounds();
        if a < lo || b > hi {
            return Err(Error::config(format!(
                "training SNR range [{a}, {b}] dB lies outside the sweep range [{lo}, {hi}] dB"
            )));
        }
        Ok(())
    }

    /// Parses the `[train]` table; missing keys keep their defaults.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let cfg: TrainConfig = section(text, "train")?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Deserializes table `name` of a config file, or the default when absent.
pub fn section<T: DeserializeOwned + Default>(text: &str, name: &str) -> Result<T> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
    match table.get(name) {
        Some(v) => v
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(format!("[{name}]: {e}"))),
        None => Ok(T::default()),
    }
}
