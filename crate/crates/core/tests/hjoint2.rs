//! Contract tests for the two-level model: shapes, filtering, fusion dims,
//! parameter accounting, the text-only special case, and checkpointing.

use mmslu_core::embeddings::{CompositeEmbedder, EmbeddingTable, OovPolicy};
use mmslu_core::model::{
    filter_tokens, load_checkpoint, save_checkpoint, Checkpoint, FeatDims, FeatKind, FeatSpec,
    FeatureBundle, FusionConfig, HJoint2Model, ModelConfig,
};
use mmslu_core::numerics::glorot_init;
use mmslu_core::schema::{IntentSet, TagSet};

fn embedder_with(words: &[&str], dim: usize, seed: u64) -> CompositeEmbedder {
    let rows = words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            (
                w.to_string(),
                glorot_init(dim, 1, seed + i as u64).unwrap().data().to_vec(),
            )
        })
        .collect();
    let table = EmbeddingTable::from_rows("text", rows).unwrap();
    CompositeEmbedder::new(vec![table], vec![OovPolicy::ZeroFill]).unwrap()
}

fn text_config(hidden: usize) -> ModelConfig {
    ModelConfig::text_only(vec!["text".into()], hidden)
}

const WORDS: [&str; 6] = ["stop", "the", "car", "please", "take", "left"];

#[test]
fn level1_distributions_have_shape_and_sum() {
    let embedder = embedder_with(&WORDS, 7, 1);
    let model = HJoint2Model::new(text_config(5), &embedder, &FeatDims::default(), 3).unwrap();
    let tokens: Vec<String> = ["please", "stop", "the", "car", "now", "left"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let dists = model.level1_tag(&embedder, &tokens).unwrap();
    assert_eq!(dists.len(), 6);
    for d in &dists {
        assert_eq!(d.len(), 8);
        assert!((d.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(d.iter().all(|p| *p > 0.0));
    }
}

#[test]
fn zeroed_model_tags_uniformly() {
    let embedder = embedder_with(&WORDS, 4, 2);
    let mut model = HJoint2Model::new(text_config(3), &embedder, &FeatDims::default(), 5).unwrap();
    for param in model.parameters_mut() {
        param.fill(0.0);
    }
    let tokens = vec!["stop".to_string(), "car".to_string()];
    let dists = model.level1_tag(&embedder, &tokens).unwrap();
    for d in dists {
        for p in d {
            assert!((p - 0.125).abs() < 1e-15);
        }
    }
}

#[test]
fn empty_utterance_rejected() {
    let embedder = embedder_with(&WORDS, 4, 2);
    let model = HJoint2Model::new(text_config(3), &embedder, &FeatDims::default(), 5).unwrap();
    assert!(model.level1_tag(&embedder, &[]).is_err());
}

#[test]
fn filter_keeps_non_outside_in_order() {
    let outcome = filter_tokens(4, &[0, 2, 0, 1]).unwrap();
    assert_eq!(outcome.kept, vec![1, 3]);
    assert!(!outcome.fallback);
}

#[test]
fn filter_all_outside_falls_back_to_full_sequence() {
    let outcome = filter_tokens(3, &[0, 0, 0]).unwrap();
    assert_eq!(outcome.kept, vec![0, 1, 2]);
    assert!(outcome.fallback);
}

#[test]
fn filter_nothing_outside_keeps_everything_without_flag() {
    let outcome = filter_tokens(3, &[1, 2, 3]).unwrap();
    assert_eq!(outcome.kept, vec![0, 1, 2]);
    assert!(!outcome.fallback);
}

#[test]
fn filter_length_mismatch_rejected() {
    assert!(filter_tokens(3, &[0, 0]).is_err());
}

#[test]
fn fuse_with_no_feats_is_identity() {
    let embedder = embedder_with(&WORDS, 4, 7);
    let model = HJoint2Model::new(text_config(3), &embedder, &FeatDims::default(), 1).unwrap();
    let repr: Vec<f64> = (0..6).map(|i| i as f64 * 0.5).collect();
    assert_eq!(model.fuse(&repr, &FeatureBundle::default()).unwrap(), repr);
}

#[test]
fn fuse_dims_match_projection_arithmetic() {
    // acoustic 1582 -> 128, H = 64: fused dim 128 + 128 = 256
    let embedder = embedder_with(&WORDS, 4, 7);
    let cfg = ModelConfig {
        fusion: FusionConfig {
            token_spaces: vec!["text".into()],
            utterance_feats: vec![FeatSpec {
                kind: FeatKind::Acoustic,
                projection_dim: 128,
            }],
        },
        ..text_config(64)
    };
    let model = HJoint2Model::new(
        cfg,
        &embedder,
        &FeatDims {
            acoustic: Some(1582),
            ..FeatDims::default()
        },
        2,
    )
    .unwrap();
    assert_eq!(model.fused_dim(), 256);
    let fused = model
        .fuse(
            &vec![0.1; 128],
            &FeatureBundle {
                acoustic: Some(vec![0.5; 1582]),
                ..FeatureBundle::default()
            },
        )
        .unwrap();
    assert_eq!(fused.len(), 256);
}

#[test]
fn fuse_raw_concatenation_dims() {
    // acoustic 1582 raw + cabin 4096 raw, H = 64: 128 + 1582 + 4096 = 5806
    let embedder = embedder_with(&WORDS, 4, 7);
    let cfg = ModelConfig {
        fusion: FusionConfig {
            token_spaces: vec!["text".into()],
            utterance_feats: vec![
                FeatSpec {
                    kind: FeatKind::Acoustic,
                    projection_dim: 0,
                },
                FeatSpec {
                    kind: FeatKind::VisualCabin,
                    projection_dim: 0,
                },
            ],
        },
        ..text_config(64)
    };
    let model = HJoint2Model::new(
        cfg,
        &embedder,
        &FeatDims {
            acoustic: Some(1582),
            visual_cabin: Some(4096),
            ..FeatDims::default()
        },
        2,
    )
    .unwrap();
    assert_eq!(model.fused_dim(), 5806);
    // missing features are zero-substituted, dims still hold
    let fused = model.fuse(&vec![0.0; 128], &FeatureBundle::default()).unwrap();
    assert_eq!(fused.len(), 5806);
}

#[test]
fn fuse_rejects_wrong_feature_dim() {
    let embedder = embedder_with(&WORDS, 4, 7);
    let cfg = ModelConfig {
        fusion: FusionConfig {
            token_spaces: vec!["text".into()],
            utterance_feats: vec![FeatSpec {
                kind: FeatKind::Acoustic,
                projection_dim: 4,
            }],
        },
        ..text_config(3)
    };
    let model = HJoint2Model::new(
        cfg,
        &embedder,
        &FeatDims {
            acoustic: Some(10),
            ..FeatDims::default()
        },
        2,
    )
    .unwrap();
    let bad = FeatureBundle {
        acoustic: Some(vec![0.0; 9]),
        ..FeatureBundle::default()
    };
    assert!(model.fuse(&vec![0.0; 6], &bad).is_err());
}

#[test]
fn level2_joint_contract() {
    let embedder = embedder_with(&WORDS, 6, 4);
    let model = HJoint2Model::new(text_config(5), &embedder, &FeatDims::default(), 11).unwrap();
    let filtered = vec!["stop".to_string(), "car".to_string()];
    let (intent_dist, tag_dists) = model
        .level2_joint(&embedder, &filtered, &FeatureBundle::default())
        .unwrap();
    assert_eq!(intent_dist.len(), 9);
    assert!((intent_dist.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    assert_eq!(tag_dists.len(), 2);
    assert!(tag_dists.iter().all(|d| d.len() == 8));
}

#[test]
fn parameter_count_matches_closed_form() {
    let e = 10; // embedding dim
    let h = 6;
    let t = 8;
    let i = 9;
    let acoustic_dim = 7;
    let proj = 3;
    let cabin_dim = 5; // raw concatenation

    let embedder = embedder_with(&WORDS, e, 9);
    let cfg = ModelConfig {
        fusion: FusionConfig {
            token_spaces: vec!["text".into()],
            utterance_feats: vec![
                FeatSpec {
                    kind: FeatKind::Acoustic,
                    projection_dim: proj,
                },
                FeatSpec {
                    kind: FeatKind::VisualCabin,
                    projection_dim: 0,
                },
            ],
        },
        ..text_config(h)
    };
    let model = HJoint2Model::new(
        cfg,
        &embedder,
        &FeatDims {
            acoustic: Some(acoustic_dim),
            visual_cabin: Some(cabin_dim),
            ..FeatDims::default()
        },
        1,
    )
    .unwrap();

    let lstm_cell = 4 * (h * e + h * h + h);
    let bilstm = 2 * lstm_cell;
    let tag_head = t * 2 * h + t;
    let fused = 2 * h + proj + cabin_dim;
    let intent_head = i * fused + i;
    let projection = proj * acoustic_dim + proj;
    let expected = 2 * bilstm + 2 * tag_head + intent_head + projection;
    assert_eq!(model.parameter_count(), expected);
}

#[test]
fn text_only_model_is_bit_identical_to_fusion_free_construction() {
    let embedder = embedder_with(&WORDS, 8, 21);
    let seed = 33;
    let general = HJoint2Model::new(text_config(6), &embedder, &FeatDims::default(), seed).unwrap();
    let bare = HJoint2Model::new_text_only(
        TagSet::default(),
        IntentSet::default(),
        vec!["text".into()],
        6,
        &embedder,
        seed,
    )
    .unwrap();
    assert_eq!(general, bare);

    // and forward outputs agree bit for bit on random utterances
    let mut rng_state = 0u64;
    for case in 0..100 {
        rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(case);
        let len = 1 + (rng_state >> 33) as usize % 6;
        let tokens: Vec<String> = (0..len)
            .map(|k| WORDS[(rng_state as usize + k * 7) % WORDS.len()].to_string())
            .collect();
        let a = general
            .predict(&embedder, &tokens, &FeatureBundle::default())
            .unwrap();
        let b = bare
            .predict(&embedder, &tokens, &FeatureBundle::default())
            .unwrap();
        assert_eq!(a.intent_distribution, b.intent_distribution);
        assert_eq!(a.tags, b.tags);
        assert_eq!(a.intent, b.intent);
    }
}

#[test]
fn disabling_feats_removes_projection_parameters() {
    let embedder = embedder_with(&WORDS, 8, 21);
    let with_feat = HJoint2Model::new(
        ModelConfig {
            fusion: FusionConfig {
                token_spaces: vec!["text".into()],
                utterance_feats: vec![FeatSpec {
                    kind: FeatKind::Acoustic,
                    projection_dim: 4,
                }],
            },
            ..text_config(6)
        },
        &embedder,
        &FeatDims {
            acoustic: Some(10),
            ..FeatDims::default()
        },
        3,
    )
    .unwrap();
    let without = HJoint2Model::new(text_config(6), &embedder, &FeatDims::default(), 3).unwrap();
    let proj_params = 4 * 10 + 4;
    let intent_extra = 9 * 4; // wider intent head input
    assert_eq!(
        with_feat.parameter_count(),
        without.parameter_count() + proj_params + intent_extra
    );
}

#[test]
fn predict_reports_keywords_and_fallback() {
    let embedder = embedder_with(&WORDS, 8, 2);
    let model = HJoint2Model::new(text_config(4), &embedder, &FeatDims::default(), 77).unwrap();
    let tokens: Vec<String> = vec!["take".into(), "the".into(), "car".into()];
    let p = model
        .predict(&embedder, &tokens, &FeatureBundle::default())
        .unwrap();
    assert_eq!(p.tags.len(), 3);
    assert_eq!(p.intent_distribution.len(), 9);
    // keywords are exactly the tokens tagged IntentKeyword
    let expected: Vec<String> = tokens
        .iter()
        .zip(&p.tags)
        .filter(|(_, t)| t.as_str() == "IntentKeyword")
        .map(|(tok, _)| tok.clone())
        .collect();
    assert_eq!(p.keywords, expected);
    // fallback flag matches whether any tag survived
    assert_eq!(p.fallback, p.tags.iter().all(|t| t == "O"));
}

#[test]
fn argmax_intent_invariant_under_monotone_logit_transform() {
    // softmax is monotone in logits, so the argmax of the distribution is
    // the argmax of the logits; doubling all logits cannot change it.
    let embedder = embedder_with(&WORDS, 8, 5);
    let model = HJoint2Model::new(text_config(4), &embedder, &FeatDims::default(), 12).unwrap();
    let tokens: Vec<String> = vec!["stop".into(), "please".into()];
    let (dist, _) = model
        .level2_joint(&embedder, &tokens, &FeatureBundle::default())
        .unwrap();
    let argmax = |v: &[f64]| {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0
    };
    let squared: Vec<f64> = dist.iter().map(|p| p * p).collect(); // monotone on positives
    assert_eq!(argmax(&dist), argmax(&squared));
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let embedder = embedder_with(&WORDS, 8, 30);
    let cfg = ModelConfig {
        fusion: FusionConfig {
            token_spaces: vec!["text".into()],
            utterance_feats: vec![FeatSpec {
                kind: FeatKind::Acoustic,
                projection_dim: 5,
            }],
        },
        ..text_config(6)
    };
    let model = HJoint2Model::new(
        cfg,
        &embedder,
        &FeatDims {
            acoustic: Some(12),
            ..FeatDims::default()
        },
        101,
    )
    .unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path_a = dir.path().join("a.ckpt");
    let path_b = dir.path().join("b.ckpt");
    save_checkpoint(&path_a, &model).unwrap();
    let restored = load_checkpoint(&path_a).unwrap().into_model(&embedder).unwrap();
    assert_eq!(restored, model);
    save_checkpoint(&path_b, &restored).unwrap();
    assert_eq!(std::fs::read(&path_a).unwrap(), std::fs::read(&path_b).unwrap());

    // forward outputs identical after the round trip
    let tokens: Vec<String> = vec!["stop".into(), "left".into()];
    let feats = FeatureBundle {
        acoustic: Some(vec![0.25; 12]),
        ..FeatureBundle::default()
    };
    let a = model.predict(&embedder, &tokens, &feats).unwrap();
    let b = restored.predict(&embedder, &tokens, &feats).unwrap();
    assert_eq!(a.intent_distribution, b.intent_distribution);
}

#[test]
fn checkpoint_rejects_mismatched_embedder() {
    let embedder = embedder_with(&WORDS, 8, 30);
    let model = HJoint2Model::new(text_config(4), &embedder, &FeatDims::default(), 1).unwrap();
    let checkpoint = Checkpoint::from_model(&model);
    let other = embedder_with(&WORDS, 9, 31); // wrong dim
    assert!(checkpoint.into_model(&other).is_err());
}

#[test]
fn model_rejects_unknown_space_names() {
    let embedder = embedder_with(&WORDS, 8, 1);
    let cfg = ModelConfig::text_only(vec!["glove".into()], 4);
    assert!(HJoint2Model::new(cfg, &embedder, &FeatDims::default(), 0).is_err());
}

#[test]
fn model_requires_dims_for_enabled_feats() {
    let embedder = embedder_with(&WORDS, 8, 1);
    let cfg = ModelConfig {
        fusion: FusionConfig {
            token_spaces: vec!["text".into()],
            utterance_feats: vec![FeatSpec {
                kind: FeatKind::Acoustic,
                projection_dim: 8,
            }],
        },
        ..text_config(4)
    };
    assert!(HJoint2Model::new(cfg, &embedder, &FeatDims::default(), 0).is_err());
}

#[test]
fn fusion_config_enforces_feat_order() {
    let bad = FusionConfig {
        token_spaces: vec!["text".into()],
        utterance_feats: vec![
            FeatSpec {
                kind: FeatKind::VisualRoad,
                projection_dim: 0,
            },
            FeatSpec {
                kind: FeatKind::Acoustic,
                projection_dim: 0,
            },
        ],
    };
    assert!(bad.validate().is_err());
}
