use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::nn::{Compensator, ModelConfig, ProxyModel, ToyJscc};
use crate::phy::PhyConfig;

pub const MANIFEST_FILE: &str = "manifest.toml";

/// A saved model and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub fingerprint: String,
    pub sha256: String,
    /// Subcommand that produces the file.
    pub command: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub phy: String,
    pub train: TrainConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub files: BTreeMap<String, ManifestEntry>,
}

/// Which model a checkpoint file holds and which subcommand writes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Compensator after stage 1.
    Comp,
    /// Surrogate after stage 2.
    Proxy,
    /// Codec trained on the analog channel only.
    JsccAwgn,
    /// Jointly trained codec, compensator and surrogate.
    Jscc,
    CompJoint,
    ProxyJoint,
}

impl Slot {
    pub fn file(self) -> &'static str {
        match self {
            Slot::Comp => "comp.bin",
            Slot::Proxy => "proxy.bin",
            Slot::JsccAwgn => "jscc_awgn.bin",
            Slot::Jscc => "jscc.bin",
            Slot::CompJoint => "comp_joint.bin",
            Slot::ProxyJoint => "proxy_joint.bin",
        }
    }

    pub fn command(self) -> &'static str {
        match self {
            Slot::Comp => "train-comp",
            Slot::Proxy => "train-proxy",
            Slot::JsccAwgn | Slot::Jscc | Slot::CompJoint | Slot::ProxyJoint => "train-e2e",
        }
    }
}

/// A checkpoint directory: model files plus a manifest recording the seed,
/// configs and a digest of every file.
#[derive(Debug, Clone)]
pub struct Checkpoints {
    dir: PathBuf,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Checkpoints {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Checkpoints { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> Result<Option<Manifest>> {
        let path = self.dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        toml::from_str(&text)
            .map(Some)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Loads the manifest, or starts one for this run. An existing manifest
    /// written for another PHY, seed or config is replaced.
    fn manifest_for(&self, seed: u64, phy: &PhyConfig, train: &TrainConfig, model: &ModelConfig) -> Result<Manifest> {
        let fresh = Manifest {
            seed,
            phy: phy.fingerprint(),
            train: train.clone(),
            model: model.clone(),
            files: BTreeMap::new(),
        };
        Ok(match self.manifest()? {
            Some(m) if m.seed == fresh.seed && m.phy == fresh.phy && m.train == fresh.train && m.model == fresh.model => m,
            _ => fresh,
        })
    }

    /// Writes model bytes into `slot` and records them in the manifest.
    fn store(&self, slot: Slot, bytes: &[u8], fingerprint: &str, manifest: &mut Manifest) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        fs::write(self.dir.join(slot.file()), bytes)?;
        manifest.files.insert(
            slot.file().to_string(),
            ManifestEntry {
                fingerprint: fingerprint.to_string(),
                sha256: sha256_hex(bytes),
                command: slot.command().to_string(),
            },
        );
        let text = toml::to_string(manifest).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(self.dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    /// Reads a slot's bytes, checking them against the manifest digest.
    fn fetch(&self, slot: Slot) -> Result<Vec<u8>> {
        let path = self.dir.join(slot.file());
        let missing = || Error::MissingCheckpoint {
            path: path.display().to_string(),
            command: slot.command(),
        };
        let manifest = self.manifest()?.ok_or_else(missing)?;
        let entry = manifest.files.get(slot.file()).ok_or_else(missing)?;
        let bytes = fs::read(&path).map_err(|_| missing())?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(Error::Format(format!("{}: digest does not match the manifest", path.display())));
        }
        Ok(bytes)
    }

    /// Saves the given models under one run description.
    pub fn save(
        &self,
        run: (&PhyConfig, &TrainConfig, &ModelConfig),
        models: &[(Slot, &dyn SaveModel)],
    ) -> Result<()> {
        let (phy, train, model) = run;
        let mut manifest = self.manifest_for(train.seed, phy, train, model)?;
        for (slot, m) in models {
            let mut bytes = Vec::new();
            m.save_to(&mut bytes)?;
            self.store(*slot, &bytes, m.model_fingerprint(), &mut manifest)?;
        }
        Ok(())
    }

    /// Loads `slot` into `model` after checking that the checkpoint was made
    /// for the same PHY.
    pub fn load(&self, slot: Slot, phy: &PhyConfig, model: &mut dyn LoadModel) -> Result<()> {
        let bytes = self.fetch(slot)?;
        let manifest = self.manifest()?.expect("fetch checked the manifest");
        if manifest.phy != phy.fingerprint() {
            return Err(Error::Format(format!(
                "checkpoint in {} was trained for PHY {}, not {}",
                self.dir.display(),
                manifest.phy,
                phy.fingerprint()
            )));
        }
        model.load_from(&bytes)
    }
}

/// Models that can be written into a checkpoint.
pub trait SaveModel {
    fn save_to(&self, out: &mut Vec<u8>) -> Result<()>;
    fn model_fingerprint(&self) -> &str;
}

pub trait LoadModel {
    fn load_from(&mut self, bytes: &[u8]) -> Result<()>;
}

macro_rules! checkpointed {
    ($($t:ty),*) => {$(
        impl SaveModel for $t {
            fn save_to(&self, out: &mut Vec<u8>) -> Result<()> {
                self.save(out)
            }
            fn model_fingerprint(&self) -> &str {
                self.fingerprint()
            }
        }
        impl LoadModel for $t {
            fn load_from(&mut self, bytes: &[u8]) -> Result<()> {
                self.load(bytes)
            }
        }
    )*};
}

checkpointed!(ToyJscc, Compensator, ProxyModel);
