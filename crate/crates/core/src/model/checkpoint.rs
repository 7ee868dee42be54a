//! Self-describing model checkpoints: one JSON document holding the schema,
//! fusion configuration, dimensions, and every parameter matrix by name.
//! JSON floats are written in shortest round-trip form, so save/load/save is
//! byte-identical.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FusionConfig, HJoint2Model, ModelConfig};
use crate::embeddings::{CompositeEmbedder, OovPolicy};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::schema::{IntentSet, TagSet};

const FORMAT: &str = "hjoint2-checkpoint-v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NamedMatrix {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    format: String,
    tag_labels: Vec<String>,
    intent_labels: Vec<String>,
    fusion: FusionConfig,
    hidden_dim: usize,
    embed_dim: usize,
    feat_dims: Vec<usize>,
    space_names: Vec<String>,
    space_dims: Vec<usize>,
    policies: Vec<OovPolicy>,
    fine_tune_embeddings: bool,
    params: Vec<NamedMatrix>,
}

impl Checkpoint {
    pub fn from_model(model: &HJoint2Model) -> Checkpoint {
        let params = model
            .parameter_names()
            .into_iter()
            .zip(model.parameters())
            .map(|(name, m)| NamedMatrix {
                name,
                rows: m.rows(),
                cols: m.cols(),
                data: m.data().to_vec(),
            })
            .collect();
        Checkpoint {
            format: FORMAT.to_string(),
            tag_labels: model.config.tag_set.labels().to_vec(),
            intent_labels: model.config.intent_set.labels().to_vec(),
            fusion: model.config.fusion.clone(),
            hidden_dim: model.config.hidden_dim,
            embed_dim: model.embed_dim,
            feat_dims: model.feat_dims.clone(),
            space_names: model.space_names.clone(),
            space_dims: model.space_dims.clone(),
            policies: model.policies.clone(),
            fine_tune_embeddings: model.config.fine_tune_embeddings,
            params,
        }
    }

    pub fn tag_labels(&self) -> &[String] {
        &self.tag_labels
    }

    pub fn intent_labels(&self) -> &[String] {
        &self.intent_labels
    }

    pub fn fusion(&self) -> &FusionConfig {
        &self.fusion
    }

    /// Rebuilds the model against the embedder it was trained with.
    pub fn into_model(self, embedder: &CompositeEmbedder) -> Result<HJoint2Model> {
        if self.format != FORMAT {
            return Err(Error::Config(format!(
                "unsupported checkpoint format {:?}",
                self.format
            )));
        }
        let names = embedder.space_names();
        if names.len() != self.space_names.len()
            || names.iter().zip(&self.space_names).any(|(a, b)| a != b)
        {
            return Err(Error::Config(format!(
                "checkpoint expects embedding spaces {:?} but the embedder has {:?}",
                self.space_names, names
            )));
        }
        for ((space, &dim), policy) in embedder
            .spaces()
            .iter()
            .zip(&self.space_dims)
            .zip(&self.policies)
        {
            if space.dim() != dim {
                return Err(Error::Config(format!(
                    "space {} has dim {} but the checkpoint expects {}",
                    space.name(),
                    space.dim(),
                    dim
                )));
            }
            let _ = policy;
        }
        if embedder.policies() != self.policies.as_slice() {
            return Err(Error::Config(
                "embedder OOV policies do not match the checkpoint".into(),
            ));
        }
        if embedder.total_dim() != self.embed_dim {
            return Err(Error::Config(format!(
                "embedder total dim {} does not match checkpoint {}",
                embedder.total_dim(),
                self.embed_dim
            )));
        }

        let config = ModelConfig {
            tag_set: TagSet::new(self.tag_labels.clone())?,
            intent_set: IntentSet::new(self.intent_labels.clone())?,
            fusion: self.fusion.clone(),
            hidden_dim: self.hidden_dim,
            fine_tune_embeddings: self.fine_tune_embeddings,
        };
        let mut feat_dims = super::FeatDims::default();
        for (spec, &dim) in self.fusion.utterance_feats.iter().zip(&self.feat_dims) {
            match spec.kind {
                super::FeatKind::Acoustic => feat_dims.acoustic = Some(dim),
                super::FeatKind::VisualCabin => feat_dims.visual_cabin = Some(dim),
                super::FeatKind::VisualRoad => feat_dims.visual_road = Some(dim),
            }
        }
        let mut model = HJoint2Model::new(config, embedder, &feat_dims, 0)?;

        let expected = model.parameter_names();
        if expected.len() != self.params.len() {
            return Err(Error::Config(format!(
                "checkpoint has {} parameter matrices, model expects {}",
                self.params.len(),
                expected.len()
            )));
        }
        let mut targets = model.parameters_mut();
        for ((target, name), stored) in targets.iter_mut().zip(&expected).zip(self.params) {
            if stored.name != *name {
                return Err(Error::Config(format!(
                    "checkpoint parameter {} where {} was expected",
                    stored.name, name
                )));
            }
            if stored.rows != target.rows() || stored.cols != target.cols() {
                return Err(Error::Config(format!(
                    "parameter {} has shape {}x{}, model expects {}x{}",
                    stored.name,
                    stored.rows,
                    stored.cols,
                    target.rows(),
                    target.cols()
                )));
            }
            **target = Matrix::from_vec(stored.rows, stored.cols, stored.data)?;
        }
        Ok(model)
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &HJoint2Model) -> Result<()> {
    let display = path.as_ref().display().to_string();
    let checkpoint = Checkpoint::from_model(model);
    let json = serde_json::to_string(&checkpoint)
        .map_err(|e| Error::Data(format!("serialize checkpoint: {}", e)))?;
    fs::write(path.as_ref(), json).map_err(|e| Error::io(&display, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let display = path.as_ref().display().to_string();
    let bytes = fs::read(path.as_ref()).map_err(|e| Error::io(&display, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(&display, 1, e.to_string()))
}
