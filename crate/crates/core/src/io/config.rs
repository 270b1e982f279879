use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acpnet::ArchConfig;
use crate::audio::{FeatureConfig, SegmentSpec};
use crate::dataset::{PairConfig, SplitRatios};
use crate::error::Result;
use crate::training::{ProbeConfig, TrainConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Everything a run can be configured with. Unknown keys are rejected, and
/// every table may be omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// When set, replaces the seed of every sub-configuration.
    pub seed: Option<u64>,
    pub train: TrainConfig,
    pub arch: ArchConfig,
    pub features: FeatureConfig,
    pub segments: SegmentSpec,
    pub pairs: PairConfig,
    pub split: SplitRatios,
    pub probe: ProbeConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text)?;
        if let Some(seed) = cfg.seed {
            cfg.train.seed = seed;
            cfg.pairs.seed = seed;
            cfg.probe.seed = seed;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}
