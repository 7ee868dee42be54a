//! The two-level hierarchical joint intent/slot model.
//!
//! Level 1 is a Bi-LSTM tagger over token embeddings. Tokens whose predicted
//! tag is not `O` (all of them, when nothing survives the filter) feed a
//! second Bi-LSTM that jointly emits per-token tag distributions and, from
//! its utterance representation fused with optional utterance-level
//! acoustic/visual features, the intent distribution. Fusion is
//! concatenation, with an optional tanh projection per feature to keep
//! high-dimensional modalities from swamping the text representation.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use train::{
    dev_intent_micro_f1, loss_and_gradients, probe_feat_dims, train, EpochRecord, TrainExample,
    TrainOptions,
};

use serde::{Deserialize, Serialize};

use crate::embeddings::{CompositeEmbedder, OovPolicy};
use crate::error::{Error, Result};
use crate::numerics::{
    softmax, BiLstm, BiLstmGrads, DenseGrads, DenseLayer, Matrix,
};
use crate::schema::{IntentSet, TagSet};

/// Utterance-level feature slots, in their fixed fusion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatKind {
    Acoustic,
    VisualCabin,
    VisualRoad,
}

pub const FEAT_ORDER: [FeatKind; 3] = [FeatKind::Acoustic, FeatKind::VisualCabin, FeatKind::VisualRoad];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatSpec {
    pub kind: FeatKind,
    /// 0 projects nothing (raw concatenation); otherwise a dense + tanh
    /// projection to this many dimensions.
    pub projection_dim: usize,
}

pub const DEFAULT_PROJECTION_DIM: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FusionConfig {
    /// Embedding-space names, in concatenation order.
    pub token_spaces: Vec<String>,
    /// Enabled utterance-level features; kept in `FEAT_ORDER`.
    pub utterance_feats: Vec<FeatSpec>,
}

impl FusionConfig {
    pub fn text_only(token_spaces: Vec<String>) -> FusionConfig {
        FusionConfig {
            token_spaces,
            utterance_feats: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut last: Option<FeatKind> = None;
        for spec in &self.utterance_feats {
            if let Some(prev) = last {
                if spec.kind <= prev {
                    return Err(Error::Config(
                        "utterance feats must be unique and in acoustic, visual-cabin, visual-road order".into(),
                    ));
                }
            }
            last = Some(spec.kind);
        }
        Ok(())
    }
}

/// Per-utterance feature vectors handed to the model. Enabled features that
/// are absent here are substituted by zero vectors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureBundle {
    pub acoustic: Option<Vec<f64>>,
    pub visual_cabin: Option<Vec<f64>>,
    pub visual_road: Option<Vec<f64>>,
}

impl FeatureBundle {
    pub fn get(&self, kind: FeatKind) -> Option<&Vec<f64>> {
        match kind {
            FeatKind::Acoustic => self.acoustic.as_ref(),
            FeatKind::VisualCabin => self.visual_cabin.as_ref(),
            FeatKind::VisualRoad => self.visual_road.as_ref(),
        }
    }
}

/// Dimensions of the available utterance-level features.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeatDims {
    pub acoustic: Option<usize>,
    pub visual_cabin: Option<usize>,
    pub visual_road: Option<usize>,
}

impl FeatDims {
    pub fn get(&self, kind: FeatKind) -> Option<usize> {
        match kind {
            FeatKind::Acoustic => self.acoustic,
            FeatKind::VisualCabin => self.visual_cabin,
            FeatKind::VisualRoad => self.visual_road,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub tag_set: TagSet,
    pub intent_set: IntentSet,
    pub fusion: FusionConfig,
    /// Hidden units per LSTM direction.
    pub hidden_dim: usize,
    /// When set, the model owns trainable copies of every embedding table.
    pub fine_tune_embeddings: bool,
}

impl ModelConfig {
    pub fn text_only(token_spaces: Vec<String>, hidden_dim: usize) -> ModelConfig {
        ModelConfig {
            tag_set: TagSet::default(),
            intent_set: IntentSet::default(),
            fusion: FusionConfig::text_only(token_spaces),
            hidden_dim,
            fine_tune_embeddings: false,
        }
    }
}

/// Outcome of the keyword/slot filter between the two levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterOutcome {
    /// Indices of kept tokens, in original order.
    pub kept: Vec<usize>,
    /// True when every tag was `O` and the whole utterance was passed on.
    pub fallback: bool,
}

impl FilterOutcome {
    pub fn apply<'a, T>(&self, items: &'a [T]) -> Vec<&'a T> {
        self.kept.iter().map(|&i| &items[i]).collect()
    }
}

/// Keeps tokens whose tag index is not the outside tag (index 0); if all
/// tags are outside, falls back to the full sequence so level 2 always has
/// input.
pub fn filter_tokens(n_tokens: usize, tag_ids: &[usize]) -> Result<FilterOutcome> {
    if n_tokens != tag_ids.len() {
        return Err(Error::Shape(format!(
            "{} tokens but {} tags in filter",
            n_tokens,
            tag_ids.len()
        )));
    }
    let kept: Vec<usize> = (0..n_tokens)
        .filter(|&i| tag_ids[i] != TagSet::OUTSIDE)
        .collect();
    if kept.is_empty() {
        Ok(FilterOutcome {
            kept: (0..n_tokens).collect(),
            fallback: true,
        })
    } else {
        Ok(FilterOutcome {
            kept,
            fallback: false,
        })
    }
}

/// How one token resolved in one embedding space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SpaceResolution {
    /// Row in the space's table (frozen or fine-tuned).
    Table(usize),
    /// The model's trainable UNK row for that space.
    Unk,
    /// Zero-filled.
    Zero,
}

pub struct Prediction {
    pub intent: String,
    pub intent_distribution: Vec<f64>,
    pub tags: Vec<String>,
    pub keywords: Vec<String>,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HJoint2Model {
    pub(crate) config: ModelConfig,
    pub(crate) space_names: Vec<String>,
    pub(crate) space_dims: Vec<usize>,
    pub(crate) policies: Vec<OovPolicy>,
    pub(crate) embed_dim: usize,
    /// Dim of each enabled feature, aligned with fusion.utterance_feats.
    pub(crate) feat_dims: Vec<usize>,
    pub(crate) level1_bilstm: BiLstm,
    pub(crate) level1_tag_head: DenseLayer,
    pub(crate) level2_bilstm: BiLstm,
    pub(crate) level2_tag_head: DenseLayer,
    pub(crate) intent_head: DenseLayer,
    /// One optional projection per enabled feature (None = raw feature).
    pub(crate) projections: Vec<Option<DenseLayer>>,
    /// Trainable UNK rows, one per space with the trainable-unk policy.
    pub(crate) unk_rows: Vec<Option<Matrix>>,
    /// Trainable copies of the embedding tables when fine-tuning.
    pub(crate) tuned_tables: Vec<Option<Matrix>>,
}

fn layer_seed(seed: u64, tag: u64) -> u64 {
    seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl HJoint2Model {
    pub fn new(
        config: ModelConfig,
        embedder: &CompositeEmbedder,
        feat_dims_avail: &FeatDims,
        seed: u64,
    ) -> Result<HJoint2Model> {
        config.fusion.validate()?;
        if config.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be positive".into()));
        }
        let names = embedder.space_names();
        if config.fusion.token_spaces.len() != names.len()
            || config
                .fusion
                .token_spaces
                .iter()
                .zip(&names)
                .any(|(want, have)| want != have)
        {
            return Err(Error::Config(format!(
                "embedder spaces {:?} do not match configured token spaces {:?}",
                names, config.fusion.token_spaces
            )));
        }

        let embed_dim = embedder.total_dim();
        let hidden = config.hidden_dim;
        let n_tags = config.tag_set.len();
        let n_intents = config.intent_set.len();

        let mut feat_dims = Vec::with_capacity(config.fusion.utterance_feats.len());
        let mut projections = Vec::with_capacity(config.fusion.utterance_feats.len());
        let mut fused_dim = 2 * hidden;
        for (i, spec) in config.fusion.utterance_feats.iter().enumerate() {
            let dim = feat_dims_avail.get(spec.kind).ok_or_else(|| {
                Error::Config(format!(
                    "feature {:?} is enabled but its dimension is unknown (no sidecar loaded)",
                    spec.kind
                ))
            })?;
            feat_dims.push(dim);
            if spec.projection_dim > 0 {
                projections.push(Some(DenseLayer::new(
                    dim,
                    spec.projection_dim,
                    layer_seed(seed, 6 + i as u64),
                )?));
                fused_dim += spec.projection_dim;
            } else {
                projections.push(None);
                fused_dim += dim;
            }
        }

        let unk_rows = embedder
            .policies()
            .iter()
            .zip(embedder.spaces())
            .map(|(policy, space)| match policy {
                OovPolicy::TrainableUnk => Some(Matrix::zeros(space.dim(), 1)),
                OovPolicy::ZeroFill => None,
            })
            .collect();
        let tuned_tables = if config.fine_tune_embeddings {
            embedder
                .spaces()
                .iter()
                .map(|s| Some(s.matrix().clone()))
                .collect()
        } else {
            vec![None; embedder.spaces().len()]
        };

        Ok(HJoint2Model {
            space_names: names.iter().map(|s| s.to_string()).collect(),
            space_dims: embedder.spaces().iter().map(|s| s.dim()).collect(),
            policies: embedder.policies().to_vec(),
            embed_dim,
            feat_dims,
            level1_bilstm: BiLstm::new(embed_dim, hidden, layer_seed(seed, 1))?,
            level1_tag_head: DenseLayer::new(2 * hidden, n_tags, layer_seed(seed, 2))?,
            level2_bilstm: BiLstm::new(embed_dim, hidden, layer_seed(seed, 3))?,
            level2_tag_head: DenseLayer::new(2 * hidden, n_tags, layer_seed(seed, 4))?,
            intent_head: DenseLayer::new(fused_dim, n_intents, layer_seed(seed, 5))?,
            projections,
            unk_rows,
            tuned_tables,
            config,
        })
    }

    /// Fusion-free construction: no projection layers exist and the intent
    /// head reads the bare utterance representation. A model built with
    /// `new` and an empty feature list must behave bit-identically.
    pub fn new_text_only(
        tag_set: TagSet,
        intent_set: IntentSet,
        token_spaces: Vec<String>,
        hidden_dim: usize,
        embedder: &CompositeEmbedder,
        seed: u64,
    ) -> Result<HJoint2Model> {
        let embed_dim = embedder.total_dim();
        let config = ModelConfig {
            tag_set,
            intent_set,
            fusion: FusionConfig::text_only(token_spaces),
            hidden_dim,
            fine_tune_embeddings: false,
        };
        let n_tags = config.tag_set.len();
        let n_intents = config.intent_set.len();
        Ok(HJoint2Model {
            space_names: embedder.space_names().iter().map(|s| s.to_string()).collect(),
            space_dims: embedder.spaces().iter().map(|s| s.dim()).collect(),
            policies: embedder.policies().to_vec(),
            embed_dim,
            feat_dims: Vec::new(),
            level1_bilstm: BiLstm::new(embed_dim, hidden_dim, layer_seed(seed, 1))?,
            level1_tag_head: DenseLayer::new(2 * hidden_dim, n_tags, layer_seed(seed, 2))?,
            level2_bilstm: BiLstm::new(embed_dim, hidden_dim, layer_seed(seed, 3))?,
            level2_tag_head: DenseLayer::new(2 * hidden_dim, n_tags, layer_seed(seed, 4))?,
            intent_head: DenseLayer::new(2 * hidden_dim, n_intents, layer_seed(seed, 5))?,
            projections: Vec::new(),
            unk_rows: embedder.spaces().iter().map(|_| None).collect(),
            tuned_tables: embedder.spaces().iter().map(|_| None).collect(),
            config,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tag_set(&self) -> &TagSet {
        &self.config.tag_set
    }

    pub fn intent_set(&self) -> &IntentSet {
        &self.config.intent_set
    }

    pub fn hidden_dim(&self) -> usize {
        self.config.hidden_dim
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    /// Checks that an embedder matches what this model was built against.
    pub fn check_embedder(&self, embedder: &CompositeEmbedder) -> Result<()> {
        let names = embedder.space_names();
        if names.len() != self.space_names.len()
            || names.iter().zip(&self.space_names).any(|(a, b)| a != b)
        {
            return Err(Error::Config(format!(
                "embedder spaces {:?} do not match model spaces {:?}",
                names, self.space_names
            )));
        }
        for (space, &dim) in embedder.spaces().iter().zip(&self.space_dims) {
            if space.dim() != dim {
                return Err(Error::Config(format!(
                    "space {} has dim {} but the model expects {}",
                    space.name(),
                    space.dim(),
                    dim
                )));
            }
        }
        Ok(())
    }

    /// Embedding lookup with the model's trainable overlays applied.
    pub(crate) fn embed_with_cache(
        &self,
        embedder: &CompositeEmbedder,
        tokens: &[String],
    ) -> (Vec<Vec<f64>>, Vec<Vec<SpaceResolution>>) {
        let mut vectors = Vec::with_capacity(tokens.len());
        let mut resolutions = Vec::with_capacity(tokens.len());
        for token in tokens {
            let mut v = Vec::with_capacity(self.embed_dim);
            let mut res = Vec::with_capacity(self.space_dims.len());
            for (s, index) in embedder.resolve(token).into_iter().enumerate() {
                match index {
                    Some(row) => {
                        let source = match &self.tuned_tables[s] {
                            Some(tuned) => tuned.row(row),
                            None => embedder.spaces()[s].matrix().row(row),
                        };
                        v.extend_from_slice(source);
                        res.push(SpaceResolution::Table(row));
                    }
                    None => match &self.unk_rows[s] {
                        Some(unk) => {
                            v.extend_from_slice(unk.data());
                            res.push(SpaceResolution::Unk);
                        }
                        None => {
                            v.extend(std::iter::repeat(0.0).take(self.space_dims[s]));
                            res.push(SpaceResolution::Zero);
                        }
                    },
                }
            }
            vectors.push(v);
            resolutions.push(res);
        }
        (vectors, resolutions)
    }

    pub fn embed(&self, embedder: &CompositeEmbedder, tokens: &[String]) -> Vec<Vec<f64>> {
        self.embed_with_cache(embedder, tokens).0
    }

    /// Level-1 tagging: one distribution over the tag set per token.
    pub fn level1_tag(
        &self,
        embedder: &CompositeEmbedder,
        tokens: &[String],
    ) -> Result<Vec<Vec<f64>>> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("level-1 tagging of an empty utterance".into()));
        }
        let embeds = self.embed(embedder, tokens);
        let outputs = self.level1_bilstm.forward(&embeds)?;
        Ok(outputs
            .iter()
            .map(|h| softmax(&self.level1_tag_head.forward(h)))
            .collect())
    }

    /// Expected dims of each fused block after projection, aligned with the
    /// enabled features.
    pub(crate) fn fused_block_dims(&self) -> Vec<usize> {
        self.config
            .fusion
            .utterance_feats
            .iter()
            .zip(&self.feat_dims)
            .map(|(spec, &dim)| if spec.projection_dim > 0 { spec.projection_dim } else { dim })
            .collect()
    }

    pub fn fused_dim(&self) -> usize {
        2 * self.config.hidden_dim + self.fused_block_dims().iter().sum::<usize>()
    }

    /// Materializes each enabled feature, substituting zeros when absent and
    /// rejecting wrong dims.
    pub(crate) fn gather_feats(&self, feats: &FeatureBundle) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(self.config.fusion.utterance_feats.len());
        for (spec, &dim) in self.config.fusion.utterance_feats.iter().zip(&self.feat_dims) {
            match feats.get(spec.kind) {
                Some(v) => {
                    if v.len() != dim {
                        return Err(Error::Shape(format!(
                            "feature {:?} has dim {}, model expects {}",
                            spec.kind,
                            v.len(),
                            dim
                        )));
                    }
                    out.push(v.clone());
                }
                None => out.push(vec![0.0; dim]),
            }
        }
        Ok(out)
    }

    /// Concatenates the utterance representation with each enabled feature,
    /// projected through dense + tanh where configured.
    pub fn fuse(&self, utterance_repr: &[f64], feats: &FeatureBundle) -> Result<Vec<f64>> {
        if utterance_repr.len() != 2 * self.config.hidden_dim {
            return Err(Error::Shape(format!(
                "utterance representation has dim {}, expected {}",
                utterance_repr.len(),
                2 * self.config.hidden_dim
            )));
        }
        let inputs = self.gather_feats(feats)?;
        let mut fused = utterance_repr.to_vec();
        for (input, projection) in inputs.iter().zip(&self.projections) {
            match projection {
                Some(layer) => {
                    fused.extend(layer.forward(input).into_iter().map(f64::tanh));
                }
                None => fused.extend_from_slice(input),
            }
        }
        Ok(fused)
    }

    /// Level-2 joint pass over an already-filtered token sequence: the
    /// intent distribution plus auxiliary per-token tag distributions.
    pub fn level2_joint(
        &self,
        embedder: &CompositeEmbedder,
        filtered_tokens: &[String],
        feats: &FeatureBundle,
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if filtered_tokens.is_empty() {
            return Err(Error::EmptyInput("level-2 pass over an empty sequence".into()));
        }
        let embeds = self.embed(embedder, filtered_tokens);
        let outputs = self.level2_bilstm.forward(&embeds)?;
        let tag_dists: Vec<Vec<f64>> = outputs
            .iter()
            .map(|h| softmax(&self.level2_tag_head.forward(h)))
            .collect();
        let repr = self.utterance_repr(&outputs);
        let fused = self.fuse(&repr, feats)?;
        let intent_dist = softmax(&self.intent_head.forward(&fused));
        Ok((intent_dist, tag_dists))
    }

    /// [last forward state || first-position backward state].
    pub(crate) fn utterance_repr(&self, bilstm_outputs: &[Vec<f64>]) -> Vec<f64> {
        let h = self.config.hidden_dim;
        let mut repr = Vec::with_capacity(2 * h);
        repr.extend_from_slice(&bilstm_outputs[bilstm_outputs.len() - 1][..h]);
        repr.extend_from_slice(&bilstm_outputs[0][h..]);
        repr
    }

    /// Full inference: level-1 tags, predicted-tag filtering, level-2 intent.
    pub fn predict(
        &self,
        embedder: &CompositeEmbedder,
        tokens: &[String],
        feats: &FeatureBundle,
    ) -> Result<Prediction> {
        let tag_dists = self.level1_tag(embedder, tokens)?;
        let tag_ids: Vec<usize> = tag_dists.iter().map(|d| argmax(d)).collect();
        let outcome = filter_tokens(tokens.len(), &tag_ids)?;
        let filtered: Vec<String> = outcome.apply(tokens).into_iter().cloned().collect();
        let (intent_dist, _) = self.level2_joint(embedder, &filtered, feats)?;
        let intent_id = argmax(&intent_dist);
        let keyword_tag = self.config.tag_set.index_of("IntentKeyword");
        let keywords = tokens
            .iter()
            .zip(&tag_ids)
            .filter(|(_, &t)| Some(t) == keyword_tag)
            .map(|(tok, _)| tok.clone())
            .collect();
        Ok(Prediction {
            intent: self.config.intent_set.label(intent_id).to_string(),
            intent_distribution: intent_dist,
            tags: tag_ids
                .iter()
                .map(|&t| self.config.tag_set.label(t).to_string())
                .collect(),
            keywords,
            fallback: outcome.fallback,
        })
    }

    /// All trainable matrices in canonical order.
    pub fn parameters(&self) -> Vec<&Matrix> {
        let mut out = Vec::new();
        for cell in [
            &self.level1_bilstm.fwd,
            &self.level1_bilstm.bwd,
        ] {
            for gate in 0..4 {
                out.push(&cell.w[gate]);
                out.push(&cell.u[gate]);
                out.push(&cell.b[gate]);
            }
        }
        out.push(&self.level1_tag_head.weight);
        out.push(&self.level1_tag_head.bias);
        for cell in [
            &self.level2_bilstm.fwd,
            &self.level2_bilstm.bwd,
        ] {
            for gate in 0..4 {
                out.push(&cell.w[gate]);
                out.push(&cell.u[gate]);
                out.push(&cell.b[gate]);
            }
        }
        out.push(&self.level2_tag_head.weight);
        out.push(&self.level2_tag_head.bias);
        out.push(&self.intent_head.weight);
        out.push(&self.intent_head.bias);
        for projection in self.projections.iter().flatten() {
            out.push(&projection.weight);
            out.push(&projection.bias);
        }
        for unk in self.unk_rows.iter().flatten() {
            out.push(unk);
        }
        for table in self.tuned_tables.iter().flatten() {
            out.push(table);
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = Vec::new();
        for cell in [
            &mut self.level1_bilstm.fwd,
            &mut self.level1_bilstm.bwd,
        ] {
            for (w, (u, b)) in cell.w.iter_mut().zip(cell.u.iter_mut().zip(cell.b.iter_mut())) {
                out.push(w);
                out.push(u);
                out.push(b);
            }
        }
        out.push(&mut self.level1_tag_head.weight);
        out.push(&mut self.level1_tag_head.bias);
        for cell in [
            &mut self.level2_bilstm.fwd,
            &mut self.level2_bilstm.bwd,
        ] {
            for (w, (u, b)) in cell.w.iter_mut().zip(cell.u.iter_mut().zip(cell.b.iter_mut())) {
                out.push(w);
                out.push(u);
                out.push(b);
            }
        }
        out.push(&mut self.level2_tag_head.weight);
        out.push(&mut self.level2_tag_head.bias);
        out.push(&mut self.intent_head.weight);
        out.push(&mut self.intent_head.bias);
        for projection in self.projections.iter_mut().flatten() {
            out.push(&mut projection.weight);
            out.push(&mut projection.bias);
        }
        for unk in self.unk_rows.iter_mut().flatten() {
            out.push(unk);
        }
        for table in self.tuned_tables.iter_mut().flatten() {
            out.push(table);
        }
        out
    }

    /// Stable names aligned with [`parameters`], used by checkpoints.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        let gates = ["i", "f", "o", "g"];
        for (level, _) in [(1, &self.level1_bilstm), (2, &self.level2_bilstm)] {
            for dir in ["fwd", "bwd"] {
                for gate in gates {
                    out.push(format!("l{}.{}.w_{}", level, dir, gate));
                    out.push(format!("l{}.{}.u_{}", level, dir, gate));
                    out.push(format!("l{}.{}.b_{}", level, dir, gate));
                }
            }
            if level == 1 {
                out.push("l1.tag.weight".into());
                out.push("l1.tag.bias".into());
            }
        }
        out.push("l2.tag.weight".into());
        out.push("l2.tag.bias".into());
        out.push("intent.weight".into());
        out.push("intent.bias".into());
        for (i, projection) in self.projections.iter().enumerate() {
            if projection.is_some() {
                out.push(format!("proj{}.weight", i));
                out.push(format!("proj{}.bias", i));
            }
        }
        for (s, unk) in self.unk_rows.iter().enumerate() {
            if unk.is_some() {
                out.push(format!("space{}.unk", s));
            }
        }
        for (s, table) in self.tuned_tables.iter().enumerate() {
            if table.is_some() {
                out.push(format!("space{}.table", s));
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|m| m.len()).sum()
    }

    pub(crate) fn zero_grads(&self) -> ModelGrads {
        ModelGrads {
            l1_bilstm: self.level1_bilstm.zero_grads(),
            l1_tag: self.level1_tag_head.zero_grads(),
            l2_bilstm: self.level2_bilstm.zero_grads(),
            l2_tag: self.level2_tag_head.zero_grads(),
            intent: self.intent_head.zero_grads(),
            projections: self
                .projections
                .iter()
                .map(|p| p.as_ref().map(|layer| layer.zero_grads()))
                .collect(),
            unk_rows: self
                .unk_rows
                .iter()
                .map(|u| u.as_ref().map(|m| Matrix::zeros(m.rows(), 1)))
                .collect(),
            tuned_tables: self
                .tuned_tables
                .iter()
                .map(|t| t.as_ref().map(|m| Matrix::zeros(m.rows(), m.cols())))
                .collect(),
        }
    }
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Gradients mirroring the model's parameter structure.
#[derive(Debug, Clone)]
pub(crate) struct ModelGrads {
    pub l1_bilstm: BiLstmGrads,
    pub l1_tag: DenseGrads,
    pub l2_bilstm: BiLstmGrads,
    pub l2_tag: DenseGrads,
    pub intent: DenseGrads,
    pub projections: Vec<Option<DenseGrads>>,
    pub unk_rows: Vec<Option<Matrix>>,
    pub tuned_tables: Vec<Option<Matrix>>,
}

impl ModelGrads {
    /// Flattens into the model's canonical parameter order.
    pub fn flatten(self) -> Vec<Matrix> {
        let mut out = Vec::new();
        for cell in [self.l1_bilstm.fwd, self.l1_bilstm.bwd] {
            for ((w, u), b) in cell.w.into_iter().zip(cell.u).zip(cell.b) {
                out.push(w);
                out.push(u);
                out.push(b);
            }
        }
        out.push(self.l1_tag.weight);
        out.push(self.l1_tag.bias);
        for cell in [self.l2_bilstm.fwd, self.l2_bilstm.bwd] {
            for ((w, u), b) in cell.w.into_iter().zip(cell.u).zip(cell.b) {
                out.push(w);
                out.push(u);
                out.push(b);
            }
        }
        out.push(self.l2_tag.weight);
        out.push(self.l2_tag.bias);
        out.push(self.intent.weight);
        out.push(self.intent.bias);
        for projection in self.projections.into_iter().flatten() {
            out.push(projection.weight);
            out.push(projection.bias);
        }
        for unk in self.unk_rows.into_iter().flatten() {
            out.push(unk);
        }
        for table in self.tuned_tables.into_iter().flatten() {
            out.push(table);
        }
        out
    }

    /// Scatters a per-token embedding gradient into the trainable embedding
    /// parameters according to how the token resolved.
    pub fn scatter_embedding(
        &mut self,
        resolutions: &[SpaceResolution],
        space_dims: &[usize],
        dvec: &[f64],
    ) {
        let mut offset = 0;
        for (s, (&dim, resolution)) in space_dims.iter().zip(resolutions).enumerate() {
            let segment = &dvec[offset..offset + dim];
            match resolution {
                SpaceResolution::Table(row) => {
                    if let Some(table) = &mut self.tuned_tables[s] {
                        let cols = table.cols();
                        let data = table.data_mut();
                        for (k, g) in segment.iter().enumerate() {
                            data[row * cols + k] += g;
                        }
                    }
                }
                SpaceResolution::Unk => {
                    if let Some(unk) = &mut self.unk_rows[s] {
                        for (slot, g) in unk.data_mut().iter_mut().zip(segment) {
                            *slot += g;
                        }
                    }
                }
                SpaceResolution::Zero => {}
            }
            offset += dim;
        }
    }
}
