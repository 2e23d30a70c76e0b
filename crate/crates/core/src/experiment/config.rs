use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{BinaryRecordSpec, SyntheticTaskPair};
use crate::error::{Error, Result};
use crate::losses::{AuxSpec, PrimaryLoss};
use crate::models::TrunkSpec;
use crate::source::Transform;
use crate::training::TrainConfig;

pub const CONFIG_VERSION: u32 = 1;

/// The four transfer settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Image classification to image classification.
    IcToIc,
    /// Image classification to multi-label image classification (BCE primary loss).
    IcToMcic,
    /// Image classification to clip classification through a frame transform.
    IcToAc,
    /// Several sources summed into one objective.
    MultiSource,
}

impl Scenario {
    pub fn default_transform(self) -> Transform {
        match self {
            Scenario::IcToAc => Transform::CenterFrame,
            _ => Transform::Identity,
        }
    }
}

/// Train/test record files for real data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryData {
    pub train: PathBuf,
    pub test: PathBuf,
    pub records: BinaryRecordSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSpec {
    Synthetic(SyntheticTaskPair),
    /// Used for both the source and the target splits.
    Binary(BinaryData),
}

/// How to pretrain one source network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceRecipe {
    #[serde(default)]
    pub name: Option<String>,
    /// Overrides of the synthetic source task.
    #[serde(default)]
    pub k_source: Option<usize>,
    #[serde(default)]
    pub overlap: Option<f64>,
    #[serde(default)]
    pub source_variant: Option<u64>,
    /// Defaults to the target trunk on the source input shape.
    #[serde(default)]
    pub trunk: Option<TrunkSpec>,
    pub train: TrainConfig,
}

/// A pretrained source checkpoint attached to a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceRef {
    pub checkpoint: PathBuf,
    /// Defaults to the scenario's transform.
    #[serde(default)]
    pub transform: Option<Transform>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Group label used by `compare`; defaults to `scratch` / `sskt`.
    #[serde(default)]
    pub name: Option<String>,
    pub scenario: Scenario,
    pub data: DataSpec,
    pub trunk: TrunkSpec,
    #[serde(default)]
    pub use_tm: bool,
    #[serde(default)]
    pub tm_width: Option<usize>,
    /// Target training. `loss.aux` holds one entry per source, or a single
    /// entry applied to every source.
    pub train: TrainConfig,
    #[serde(default)]
    pub pretrain: Vec<SourceRecipe>,
    #[serde(default)]
    pub sources: Vec<SourceRef>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub temperature: Option<f64>,
    pub use_tm: Option<bool>,
    pub sources: Option<Vec<PathBuf>>,
    pub out_dir: Option<PathBuf>,
}

fn config_error(path: &str, e: impl std::fmt::Display) -> Error {
    Error::config(path, e.to_string())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_error("<config>", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a `.toml` or `.json` config file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| config_error(&path.display().to_string(), e))?
        } else {
            toml::from_str::<Self>(&text)
                .map_err(|e| config_error(&path.display().to_string(), e))?
        };
        parsed.validate()?;
        Ok(parsed)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_error("<config>", e))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.train.seed = seed;
        }
        if let Some(alpha) = o.alpha {
            self.train.loss.alpha = alpha;
        }
        if let Some(t) = o.temperature {
            if self.train.loss.aux.is_empty() {
                self.train.loss.aux.push(AuxSpec::default());
            }
            self.train
                .loss
                .aux
                .iter_mut()
                .for_each(|a| a.temperature = t);
        }
        if let Some(use_tm) = o.use_tm {
            self.use_tm = use_tm;
        }
        if let Some(paths) = &o.sources {
            self.sources = paths
                .iter()
                .map(|p| SourceRef {
                    checkpoint: p.clone(),
                    transform: None,
                })
                .collect();
        }
        if let Some(out) = &o.out_dir {
            self.out_dir = Some(out.clone());
        }
        self.validate()
    }

    /// Checks field ranges and scenario constraints.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(
                "version",
                format!("expected {CONFIG_VERSION}, got {}", self.version),
            ));
        }
        self.trunk.block_shapes()?;
        self.train.validate()?;
        for (i, r) in self.pretrain.iter().enumerate() {
            r.train
                .validate()
                .map_err(|e| Error::config(format!("pretrain[{i}].train"), e.to_string()))?;
        }
        let (depth, multi_label) = match &self.data {
            DataSpec::Synthetic(p) => {
                p.validate()?;
                (p.depth, p.multi_label)
            }
            DataSpec::Binary(_) => (0, false),
        };
        let m = self.sources.len();
        let aux = self.train.loss.aux.len();
        if m > 0 && aux > 1 && aux != m {
            return Err(Error::config(
                "train.loss.aux",
                format!("{aux} entries for {m} sources; give one per source or a single template"),
            ));
        }
        let primary = self.train.loss.primary;
        match self.scenario {
            Scenario::IcToIc | Scenario::MultiSource => {
                if depth != 0 || multi_label || primary != PrimaryLoss::Ce {
                    return Err(Error::config(
                        "scenario",
                        "image classification needs 2-D single-label data and a CE primary loss",
                    ));
                }
                if self.scenario == Scenario::MultiSource && m == 1 {
                    return Err(Error::config(
                        "sources",
                        "multi_source needs no sources (scratch) or at least two",
                    ));
                }
            }
            Scenario::IcToMcic => {
                if depth != 0 || !multi_label || primary != PrimaryLoss::Bce {
                    return Err(Error::config(
                        "scenario",
                        "ic_to_mcic needs 2-D multi-label data and a BCE primary loss",
                    ));
                }
            }
            Scenario::IcToAc => {
                if depth == 0 || multi_label {
                    return Err(Error::config(
                        "data.synthetic.depth",
                        "ic_to_ac needs clip data (depth > 0)",
                    ));
                }
                if let Some(i) = self
                    .sources
                    .iter()
                    .position(|s| !self.transform_for(s).contains_center_frame())
                {
                    return Err(Error::config(
                        format!("sources[{i}].transform"),
                        "ic_to_ac sources must include the center_frame transform",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn transform_for(&self, source: &SourceRef) -> Transform {
        source
            .transform
            .clone()
            .unwrap_or_else(|| self.scenario.default_transform())
    }

    /// Training config with exactly one auxiliary spec per attached source.
    pub fn resolved_train(&self) -> TrainConfig {
        let mut train = self.train.clone();
        let m = self.sources.len();
        train.loss.aux = match (m, train.loss.aux.as_slice()) {
            (0, _) => Vec::new(),
            (_, []) => vec![AuxSpec::default(); m],
            (_, [one]) => vec![*one; m],
            (_, many) => many.to_vec(),
        };
        train
    }

    /// Label used to group runs in comparisons.
    pub fn group(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None if self.sources.is_empty() => "scratch".into(),
            None => "sskt".into(),
        }
    }
}
