//! Joint training loop: teacher-forced filtering, per-utterance Adam steps
//! in seeded-shuffle order, early stopping on dev intent micro-F1.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{filter_tokens, FeatureBundle, HJoint2Model, ModelConfig, ModelGrads};
use crate::data::{AttachedFeatures, Corpus};
use crate::embeddings::CompositeEmbedder;
use crate::error::{Error, Result};
use crate::model::FeatDims;
use crate::numerics::{softmax_cross_entropy, AdamConfig, AdamState, Matrix};

/// One training/evaluation item: token sequence, gold tag indices, optional
/// gold intent index, and whatever utterance-level features exist.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub id: String,
    pub tokens: Vec<String>,
    pub tag_ids: Vec<usize>,
    pub intent_id: Option<usize>,
    pub feats: FeatureBundle,
}

impl TrainExample {
    /// Builds examples from a corpus slice and its attached features.
    pub fn from_corpus(
        corpus: &Corpus,
        attached: &AttachedFeatures,
        indices: &[usize],
    ) -> Result<Vec<TrainExample>> {
        indices
            .iter()
            .map(|&i| {
                let utt = &corpus.utterances[i];
                let tag_ids = utt
                    .tags
                    .iter()
                    .map(|t| {
                        corpus.tag_set.index_of(t).ok_or_else(|| {
                            Error::Data(format!("utterance {} has unknown tag {}", utt.id, t))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let intent_id = match &utt.intent {
                    Some(label) => Some(corpus.intent_set.index_of(label).ok_or_else(|| {
                        Error::Data(format!("utterance {} has unknown intent {}", utt.id, label))
                    })?),
                    None => None,
                };
                Ok(TrainExample {
                    id: utt.id.clone(),
                    tokens: utt.tokens.clone(),
                    tag_ids,
                    intent_id,
                    feats: FeatureBundle {
                        acoustic: attached.acoustic.as_ref().map(|v| v[i].clone()),
                        visual_cabin: attached.visual_cabin.as_ref().map(|v| v[i].clone()),
                        visual_road: attached.visual_road.as_ref().map(|v| v[i].clone()),
                    },
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub lr: f64,
    /// Weight of the level-2 auxiliary tag loss.
    pub lambda: f64,
    /// Stop as soon as dev micro-F1 reaches this, when set.
    pub stop_at_dev_f1: Option<f64>,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 300,
            patience: 10,
            lr: 1e-3,
            lambda: 1.0,
            stop_at_dev_f1: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_micro_f1: f64,
}

/// Loss and parameter gradients for one utterance with teacher-forced (gold
/// tag) filtering. Utterances without an intent contribute the level-1 tag
/// loss only.
pub(crate) fn utterance_grads(
    model: &HJoint2Model,
    embedder: &CompositeEmbedder,
    example: &TrainExample,
    lambda: f64,
) -> Result<(f64, ModelGrads)> {
    if example.tokens.is_empty() {
        return Err(Error::EmptyInput(format!("utterance {} has no tokens", example.id)));
    }
    if example.tokens.len() != example.tag_ids.len() {
        return Err(Error::Shape(format!(
            "utterance {}: {} tokens vs {} tags",
            example.id,
            example.tokens.len(),
            example.tag_ids.len()
        )));
    }
    let hidden = model.config.hidden_dim;
    let mut grads = model.zero_grads();
    let mut total_loss = 0.0;

    // ----- level 1: tag every token
    let (embeds, resolutions) = model.embed_with_cache(embedder, &example.tokens);
    let (l1_out, l1_cache) = model.level1_bilstm.forward_cached(&embeds)?;
    let n_tokens = example.tokens.len() as f64;
    let mut l1_dout: Vec<Vec<f64>> = vec![vec![0.0; 2 * hidden]; l1_out.len()];
    for (t, h) in l1_out.iter().enumerate() {
        let logits = model.level1_tag_head.forward(h);
        let (loss, mut dlogits, _) = softmax_cross_entropy(&logits, example.tag_ids[t])?;
        total_loss += loss / n_tokens;
        for d in dlogits.iter_mut() {
            *d /= n_tokens;
        }
        let dh = model.level1_tag_head.backward(h, &dlogits, &mut grads.l1_tag);
        for (a, b) in l1_dout[t].iter_mut().zip(&dh) {
            *a += b;
        }
    }
    let l1_dembeds = model
        .level1_bilstm
        .backward(&l1_cache, &l1_dout, &mut grads.l1_bilstm);
    for (t, dvec) in l1_dembeds.iter().enumerate() {
        grads.scatter_embedding(&resolutions[t], &model.space_dims, dvec);
    }

    // ----- level 2: joint intent + tags over the gold-filtered sequence
    if let Some(intent_id) = example.intent_id {
        let outcome = filter_tokens(example.tokens.len(), &example.tag_ids)?;
        let f_embeds: Vec<Vec<f64>> = outcome.kept.iter().map(|&i| embeds[i].clone()).collect();
        let (l2_out, l2_cache) = model.level2_bilstm.forward_cached(&f_embeds)?;
        let n_filtered = outcome.kept.len() as f64;
        let mut l2_dout: Vec<Vec<f64>> = vec![vec![0.0; 2 * hidden]; l2_out.len()];

        // auxiliary tag head over filtered tokens
        if lambda != 0.0 {
            for (f, &orig) in outcome.kept.iter().enumerate() {
                let h = &l2_out[f];
                let logits = model.level2_tag_head.forward(h);
                let (loss, mut dlogits, _) =
                    softmax_cross_entropy(&logits, example.tag_ids[orig])?;
                total_loss += lambda * loss / n_filtered;
                for d in dlogits.iter_mut() {
                    *d *= lambda / n_filtered;
                }
                let dh = model
                    .level2_tag_head
                    .backward(h, &dlogits, &mut grads.l2_tag);
                for (a, b) in l2_dout[f].iter_mut().zip(&dh) {
                    *a += b;
                }
            }
        }

        // intent head over the fused utterance representation
        let repr = model.utterance_repr(&l2_out);
        let feat_inputs = model.gather_feats(&example.feats)?;
        let mut fused = repr.clone();
        let mut tanh_outputs: Vec<Option<Vec<f64>>> = Vec::with_capacity(feat_inputs.len());
        for (input, projection) in feat_inputs.iter().zip(&model.projections) {
            match projection {
                Some(layer) => {
                    let out: Vec<f64> =
                        layer.forward(input).into_iter().map(f64::tanh).collect();
                    fused.extend_from_slice(&out);
                    tanh_outputs.push(Some(out));
                }
                None => {
                    fused.extend_from_slice(input);
                    tanh_outputs.push(None);
                }
            }
        }
        let logits = model.intent_head.forward(&fused);
        let (loss, dlogits, _) = softmax_cross_entropy(&logits, intent_id)?;
        total_loss += loss;
        let dfused = model
            .intent_head
            .backward(&fused, &dlogits, &mut grads.intent);

        // split the fused gradient back into representation and features
        let drepr = &dfused[..2 * hidden];
        for (a, b) in l2_dout[l2_out.len() - 1][..hidden].iter_mut().zip(&drepr[..hidden]) {
            *a += b;
        }
        for (a, b) in l2_dout[0][hidden..].iter_mut().zip(&drepr[hidden..]) {
            *a += b;
        }
        let mut offset = 2 * hidden;
        for (slot, (input, projection)) in
            feat_inputs.iter().zip(&model.projections).enumerate()
        {
            match (projection, &tanh_outputs[slot]) {
                (Some(layer), Some(out)) => {
                    let dout = &dfused[offset..offset + out.len()];
                    let dz: Vec<f64> = dout
                        .iter()
                        .zip(out)
                        .map(|(d, y)| d * (1.0 - y * y))
                        .collect();
                    let grad_slot = grads.projections[slot].as_mut().unwrap();
                    layer.backward(input, &dz, grad_slot);
                    offset += out.len();
                }
                (None, None) => {
                    // raw concatenation; features are inputs, not parameters
                    offset += input.len();
                }
                _ => unreachable!(),
            }
        }

        let l2_dembeds = model
            .level2_bilstm
            .backward(&l2_cache, &l2_dout, &mut grads.l2_bilstm);
        for (f, &orig) in outcome.kept.iter().enumerate() {
            grads.scatter_embedding(&resolutions[orig], &model.space_dims, &l2_dembeds[f]);
        }
    }

    if !total_loss.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite loss on utterance {}",
            example.id
        )));
    }
    Ok((total_loss, grads))
}

/// Public entry point for gradient checking: the training loss for one
/// utterance together with analytic gradients flattened into the model's
/// canonical parameter order.
pub fn loss_and_gradients(
    model: &HJoint2Model,
    embedder: &CompositeEmbedder,
    example: &TrainExample,
    lambda: f64,
) -> Result<(f64, Vec<Matrix>)> {
    let (loss, grads) = utterance_grads(model, embedder, example, lambda)?;
    Ok((loss, grads.flatten()))
}

/// Feature dimensions observed across a set of examples.
pub fn probe_feat_dims(examples: &[TrainExample]) -> FeatDims {
    let mut dims = FeatDims::default();
    for example in examples {
        if dims.acoustic.is_none() {
            dims.acoustic = example.feats.acoustic.as_ref().map(Vec::len);
        }
        if dims.visual_cabin.is_none() {
            dims.visual_cabin = example.feats.visual_cabin.as_ref().map(Vec::len);
        }
        if dims.visual_road.is_none() {
            dims.visual_road = example.feats.visual_road.as_ref().map(Vec::len);
        }
    }
    dims
}

/// Fraction of dev utterances (those carrying a gold intent) whose predicted
/// intent is correct; for single-label scoring this equals intent micro-F1.
pub fn dev_intent_micro_f1(
    model: &HJoint2Model,
    embedder: &CompositeEmbedder,
    examples: &[TrainExample],
) -> Result<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for example in examples {
        let Some(intent_id) = example.intent_id else {
            continue;
        };
        total += 1;
        let prediction = model.predict(embedder, &example.tokens, &example.feats)?;
        if model.config.intent_set.index_of(&prediction.intent) == Some(intent_id) {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyInput("dev set has no intent-bearing utterances".into()));
    }
    Ok(hits as f64 / total as f64)
}

/// Trains a fresh model. Returns the parameters from the best dev epoch
/// along with the full per-epoch history.
pub fn train(
    config: ModelConfig,
    embedder: &CompositeEmbedder,
    train_set: &[TrainExample],
    dev_set: &[TrainExample],
    opts: &TrainOptions,
) -> Result<(HJoint2Model, Vec<EpochRecord>)> {
    if train_set.is_empty() {
        return Err(Error::EmptyInput("training set is empty".into()));
    }
    let feat_dims = probe_feat_dims(train_set);
    let mut model = HJoint2Model::new(config, embedder, &feat_dims, opts.seed)?;
    let adam_cfg = AdamConfig {
        lr: opts.lr,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(adam_cfg, &model.parameters());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut history = Vec::new();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_params: Vec<Matrix> = model.parameters().into_iter().cloned().collect();
    let mut epochs_since_best = 0usize;

    for epoch in 1..=opts.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &idx in &order {
            let (loss, grads) = utterance_grads(&model, embedder, &train_set[idx], opts.lambda)?;
            epoch_loss += loss;
            let flat = grads.flatten();
            let grad_refs: Vec<&Matrix> = flat.iter().collect();
            adam.step(&mut model.parameters_mut(), &grad_refs)?;
        }
        epoch_loss /= train_set.len() as f64;

        let dev_f1 = dev_intent_micro_f1(&model, embedder, dev_set)?;
        history.push(EpochRecord {
            epoch,
            train_loss: epoch_loss,
            dev_micro_f1: dev_f1,
        });
        if dev_f1 > best_f1 {
            best_f1 = dev_f1;
            best_params = model.parameters().into_iter().cloned().collect();
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= opts.patience {
                break;
            }
        }
        if opts.stop_at_dev_f1.is_some_and(|target| best_f1 >= target) {
            break;
        }
    }

    for (param, best) in model.parameters_mut().into_iter().zip(best_params) {
        *param = best;
    }
    Ok((model, history))
}
