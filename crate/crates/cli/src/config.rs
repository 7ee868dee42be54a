//! Run configuration files. One JSON document fully determines a run; the
//! ablation matrix is a base configuration plus per-run fusion overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mmslu_core::data::AttachMode;
use mmslu_core::embeddings::{OovPolicy, VocabMode};
use mmslu_core::model::{FeatSpec, TrainOptions};
use mmslu_core::schema::{IntentSet, TagSet};
use mmslu_core::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub name: String,
    pub path: PathBuf,
    #[serde(default)]
    pub oov_policy: OovPolicyFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OovPolicyFile {
    #[default]
    ZeroFill,
    TrainableUnk,
}

impl From<OovPolicyFile> for OovPolicy {
    fn from(p: OovPolicyFile) -> OovPolicy {
        match p {
            OovPolicyFile::ZeroFill => OovPolicy::ZeroFill,
            OovPolicyFile::TrainableUnk => OovPolicy::TrainableUnk,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SplitSpec {
    /// Train, dev and eval all use the whole corpus (capacity checks).
    None,
    Fixed {
        test_fraction: f64,
        #[serde(default = "default_dev_fraction")]
        dev_fraction: f64,
    },
    KFold {
        k: usize,
        fold: usize,
        #[serde(default = "default_true")]
        stratified: bool,
        #[serde(default = "default_dev_fraction")]
        dev_fraction: f64,
    },
}

fn default_dev_fraction() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Fixed {
            test_fraction: 0.2,
            dev_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyper {
    pub hidden_dim: usize,
    pub lr: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub patience: usize,
    pub stop_at_dev_f1: Option<f64>,
    pub fine_tune_embeddings: bool,
    pub projection_dim: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            hidden_dim: 64,
            lr: 1e-3,
            lambda: 1.0,
            epochs: 300,
            patience: 10,
            stop_at_dev_f1: None,
            fine_tune_embeddings: false,
            projection_dim: mmslu_core::model::DEFAULT_PROJECTION_DIM,
        }
    }
}

impl Hyper {
    pub fn train_options(&self, seed: u64) -> TrainOptions {
        TrainOptions {
            epochs: self.epochs,
            patience: self.patience,
            lr: self.lr,
            lambda: self.lambda,
            stop_at_dev_f1: self.stop_at_dev_f1,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttachModeFile {
    #[default]
    Strict,
    Lenient,
}

impl From<AttachModeFile> for AttachMode {
    fn from(m: AttachModeFile) -> AttachMode {
        match m {
            AttachModeFile::Strict => AttachMode::Strict,
            AttachModeFile::Lenient => AttachMode::Lenient,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus: PathBuf,
    pub embeddings: Vec<EmbeddingSpec>,
    #[serde(default)]
    pub vocab_mode: VocabMode,
    #[serde(default)]
    pub acoustic_sidecar: Option<PathBuf>,
    #[serde(default)]
    pub visual_cabin_sidecar: Option<PathBuf>,
    #[serde(default)]
    pub visual_road_sidecar: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Enabled utterance-level features in canonical order.
    #[serde(default)]
    pub utterance_feats: Vec<FeatSpec>,
    #[serde(default)]
    pub hyper: Hyper,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub attach_mode: AttachModeFile,
    /// Extra intent labels appended to the canonical nine.
    #[serde(default)]
    pub extra_intents: Vec<String>,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let display = path.as_ref().display().to_string();
        let bytes = fs::read(path.as_ref()).map_err(|e| Error::io(&display, e))?;
        let config: RunConfig = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Config(format!("{}: {}", display, e)))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.embeddings.is_empty() {
            return Err(Error::Config("at least one embedding space is required".into()));
        }
        if !self.corpus.exists() {
            return Err(Error::Config(format!(
                "corpus file {} does not exist",
                self.corpus.display()
            )));
        }
        for spec in &self.embeddings {
            if !spec.path.exists() {
                return Err(Error::Config(format!(
                    "embedding file {} does not exist",
                    spec.path.display()
                )));
            }
        }
        for sidecar in [
            &self.acoustic_sidecar,
            &self.visual_cabin_sidecar,
            &self.visual_road_sidecar,
        ]
        .into_iter()
        .flatten()
        {
            if !sidecar.exists() {
                return Err(Error::Config(format!(
                    "sidecar {} does not exist",
                    sidecar.display()
                )));
            }
        }
        Ok(())
    }

    pub fn tag_set(&self) -> TagSet {
        TagSet::default()
    }

    pub fn intent_set(&self) -> Result<IntentSet> {
        if self.extra_intents.is_empty() {
            return Ok(IntentSet::default());
        }
        let mut labels: Vec<String> = IntentSet::default().labels().to_vec();
        labels.extend(self.extra_intents.iter().cloned());
        IntentSet::new(labels)
    }
}

/// A named fusion variant over a shared base configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblateRun {
    pub name: String,
    pub utterance_feats: Vec<FeatSpec>,
    /// Restrict token spaces to this subset (by name) when given.
    #[serde(default)]
    pub token_spaces: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblateConfig {
    pub base: RunConfig,
    pub runs: Vec<AblateRun>,
}

impl AblateConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<AblateConfig> {
        let display = path.as_ref().display().to_string();
        let bytes = fs::read(path.as_ref()).map_err(|e| Error::io(&display, e))?;
        let config: AblateConfig = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Config(format!("{}: {}", display, e)))?;
        config.base.validate()?;
        if config.runs.is_empty() {
            return Err(Error::Config("ablation needs at least one run".into()));
        }
        Ok(config)
    }
}
