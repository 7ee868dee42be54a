//! Plumbing shared by the train/eval/ablate commands: loading the embedder
//! and feature sidecars, resolving splits, and assembling examples.

use std::path::Path;

use mmslu_core::data::{attach_features, fixed_split, kfold_split, Corpus, FeatureStore};
use mmslu_core::embeddings::{load_table, CompositeEmbedder};
use mmslu_core::model::{FusionConfig, ModelConfig, TrainExample};
use mmslu_core::sidecar;
use mmslu_core::{Error, Result};

use crate::config::{RunConfig, SplitSpec};

pub fn build_embedder(config: &RunConfig, token_spaces: Option<&[String]>) -> Result<CompositeEmbedder> {
    let selected: Vec<&crate::config::EmbeddingSpec> = match token_spaces {
        None => config.embeddings.iter().collect(),
        Some(names) => names
            .iter()
            .map(|name| {
                config
                    .embeddings
                    .iter()
                    .find(|s| s.name == *name)
                    .ok_or_else(|| {
                        Error::Config(format!("token space {} is not a configured embedding", name))
                    })
            })
            .collect::<Result<_>>()?,
    };
    let mut tables = Vec::with_capacity(selected.len());
    let mut policies = Vec::with_capacity(selected.len());
    for spec in selected {
        tables.push(load_table(&spec.path, &spec.name)?);
        policies.push(spec.oov_policy.into());
    }
    CompositeEmbedder::with_mode(tables, policies, config.vocab_mode)
}

pub fn load_corpus(config: &RunConfig) -> Result<Corpus> {
    mmslu_core::data::load_corpus(&config.corpus, config.tag_set(), config.intent_set()?)
}

pub fn load_feature_store(config: &RunConfig) -> Result<FeatureStore> {
    Ok(FeatureStore {
        acoustic: config
            .acoustic_sidecar
            .as_ref()
            .map(sidecar::read_utterance_rows)
            .transpose()?,
        visual_cabin: config
            .visual_cabin_sidecar
            .as_ref()
            .map(sidecar::read_utterance_rows)
            .transpose()?,
        visual_road: config
            .visual_road_sidecar
            .as_ref()
            .map(sidecar::read_utterance_rows)
            .transpose()?,
    })
}

/// Train / dev / test index lists resolved from the split spec. Dev falls
/// back to the train side when the dev fraction rounds to nothing.
pub struct ResolvedSplit {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn resolve_split(corpus: &Corpus, spec: &SplitSpec, seed: u64) -> Result<ResolvedSplit> {
    let all: Vec<usize> = (0..corpus.utterances.len()).collect();
    match *spec {
        SplitSpec::None => Ok(ResolvedSplit {
            train: all.clone(),
            dev: all.clone(),
            test: all,
        }),
        SplitSpec::Fixed {
            test_fraction,
            dev_fraction,
        } => {
            let outer = fixed_split(corpus, test_fraction, seed)?;
            carve_dev(corpus, outer.train, outer.test, dev_fraction, seed)
        }
        SplitSpec::KFold {
            k,
            fold,
            stratified,
            dev_fraction,
        } => {
            let folds = kfold_split(corpus, k, seed, stratified)?;
            let chosen = folds.into_iter().nth(fold).ok_or_else(|| {
                Error::Config(format!("fold index {} out of range for k = {}", fold, k))
            })?;
            carve_dev(corpus, chosen.train, chosen.test, dev_fraction, seed)
        }
    }
}

fn carve_dev(
    corpus: &Corpus,
    rest: Vec<usize>,
    test: Vec<usize>,
    dev_fraction: f64,
    seed: u64,
) -> Result<ResolvedSplit> {
    let n_dev = (rest.len() as f64 * dev_fraction).round() as usize;
    if dev_fraction <= 0.0 || n_dev == 0 || n_dev >= rest.len() {
        return Ok(ResolvedSplit {
            train: rest.clone(),
            dev: rest,
            test,
        });
    }
    let rest_corpus = corpus.subset(&rest);
    let inner = fixed_split(&rest_corpus, dev_fraction, seed ^ 0x5eed)?;
    Ok(ResolvedSplit {
        train: inner.train.iter().map(|&i| rest[i]).collect(),
        dev: inner.test.iter().map(|&i| rest[i]).collect(),
        test,
    })
}

/// Examples for a set of corpus indices with features attached per config.
pub fn make_examples(
    config: &RunConfig,
    corpus: &Corpus,
    indices: &[usize],
) -> Result<Vec<TrainExample>> {
    let store = load_feature_store(config)?;
    let attached = attach_features(corpus, &store, config.attach_mode.into())?;
    for warning in &attached.warnings {
        eprintln!("warning: {}", warning);
    }
    TrainExample::from_corpus(corpus, &attached, indices)
}

pub fn model_config(
    config: &RunConfig,
    token_spaces: Vec<String>,
    utterance_feats: Vec<mmslu_core::model::FeatSpec>,
) -> Result<ModelConfig> {
    Ok(ModelConfig {
        tag_set: config.tag_set(),
        intent_set: config.intent_set()?,
        fusion: FusionConfig {
            token_spaces,
            utterance_feats,
        },
        hidden_dim: config.hyper.hidden_dim,
        fine_tune_embeddings: config.hyper.fine_tune_embeddings,
    })
}

pub fn ensure_out_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| Error::io(path.display().to_string(), e))
}
