//! Whole-pipeline configuration, one TOML file.
//!
//! Every section falls back to its module defaults, so an empty file is a
//! valid configuration. [`PipelineConfig::overlay_toml`] applies only the
//! keys a file actually sets, which is how a config file takes precedence
//! over command-line flags without resetting the rest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::MdcParams;
use crate::diversity::MsssimParams;
use crate::error::{Error, Result};
use crate::hyperopt::{GaConfig, HyperBounds};
use crate::kinsim::DatasetConfig;
use crate::pipeline::Preprocess;
use crate::gpca_sift::SiftConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub dataset_root: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiversityConfig {
    pub n_pairs: usize,
    pub seed: u64,
    pub msssim: MsssimParams,
}

impl Default for DiversityConfig {
    fn default() -> Self {
        DiversityConfig {
            n_pairs: 100,
            seed: 0,
            msssim: MsssimParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneConfig {
    pub ga: GaConfig,
    pub bounds: HyperBounds,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub dataset: DatasetConfig,
    pub preprocess: Preprocess,
    pub sift: SiftConfig,
    pub classify: MdcParams,
    pub diversity: DiversityConfig,
    pub tune: TuneConfig,
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Replace exactly the fields `text` sets, keeping the rest of `self`.
    pub fn overlay_toml(&self, text: &str) -> Result<Self> {
        let over: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut base = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, over);
        let cfg: PipelineConfig = base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn overlay_file(&self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.overlay_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.dataset.validate().map_err(cfg)?;
        self.preprocess.stft.validate().map_err(cfg)?;
        if let Some(p) = &self.preprocess.eclean {
            p.validate().map_err(cfg)?;
        }
        self.sift.validate().map_err(cfg)?;
        self.diversity.msssim.validate().map_err(cfg)?;
        self.tune.ga.validate().map_err(cfg)?;
        self.tune.bounds.validate().map_err(cfg)?;
        if self.classify.p1 == 0 || self.classify.p2 == 0 {
            return Err(Error::Config("classifier P1 and P2 must be positive".into()));
        }
        Ok(())
    }
}
