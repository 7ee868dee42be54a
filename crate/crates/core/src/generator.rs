//! Synthetic corpus generator with controllable cross-modal ambiguity.
//!
//! Utterances come from per-intent template grammars with slot placeholders
//! filled from closed lexicons; gold tags are assigned by construction. A
//! configurable fraction of utterances instead draw slot-free templates
//! shared between an ambiguous intent pair, so their token sequences are
//! identical across the two intents and only the acoustic vector (a mean
//! shift on the true intent's signal dimensions over Gaussian noise) can
//! tell them apart. That gives text-only models a provable accuracy ceiling
//! of roughly 1 - p/2 while fused models can pass it.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Corpus, Utterance};
use crate::error::{Error, Result};
use crate::schema::{IntentSet, TagSet};

/// Per-intent utterance counts from the in-cabin dataset this generator
/// mirrors, in canonical intent order.
pub const INTENT_REFERENCE_COUNTS: [(&str, usize); 9] = [
    ("SetDestination", 311),
    ("SetRoute", 507),
    ("Park", 151),
    ("PullOver", 34),
    ("Stop", 27),
    ("GoFaster", 73),
    ("GoSlower", 41),
    ("OpenDoor", 136),
    ("Other", 51),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntentDistribution {
    #[default]
    Uniform,
    /// Proportional to the reference per-intent counts.
    Table1Proportional,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_utterances: usize,
    pub intent_distribution: IntentDistribution,
    /// Fraction of utterances whose intent is recoverable only from audio.
    pub ambiguous_fraction: f64,
    pub ambiguous_pairs: Vec<(String, String)>,
    pub acoustic_dim: usize,
    /// Disjoint acoustic dimensions carrying each intent's signal; defaults
    /// to dimension i for intent index i.
    pub signal_dims: BTreeMap<String, Vec<usize>>,
    pub signal_shift: f64,
    pub noise_std: f64,
    pub visual_dim: usize,
    pub visual_frames: usize,
    pub embedding_dim: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_utterances: 200,
            intent_distribution: IntentDistribution::Uniform,
            ambiguous_fraction: 0.0,
            ambiguous_pairs: vec![
                ("Stop".into(), "PullOver".into()),
                ("GoSlower".into(), "GoFaster".into()),
            ],
            acoustic_dim: 16,
            signal_dims: BTreeMap::new(),
            signal_shift: 2.0,
            noise_std: 1.0,
            visual_dim: 8,
            visual_frames: 3,
            embedding_dim: 32,
            seed: 0,
        }
    }
}

/// Everything one generation run produces. The ambiguous id list is
/// diagnostic only and is not serialized into the corpus.
#[derive(Debug, Clone)]
pub struct SyntheticOutput {
    pub corpus: Corpus,
    pub acoustic: BTreeMap<String, Vec<f64>>,
    pub visual_cabin: BTreeMap<String, Vec<Vec<f64>>>,
    pub visual_road: BTreeMap<String, Vec<Vec<f64>>>,
    /// Token -> vector rows covering the whole generated vocabulary.
    pub embedding_rows: Vec<(String, Vec<f64>)>,
    pub ambiguous_ids: Vec<String>,
}

type Token = (&'static str, &'static str); // word or slot marker, tag label

const SLOT: &str = "\u{1}"; // word field set to SLOT means "fill from lexicon of tag"

fn lexicon(tag: &str) -> &'static [&'static str] {
    match tag {
        "Location" => &["airport", "station", "hotel", "mall", "museum", "harbor", "library", "bakery"],
        "PositionDirection" => &["left", "right", "ahead", "behind", "nearby"],
        "Person" => &["john", "mary", "alex", "sam"],
        "TimeGuidance" => &["now", "soon", "later", "tonight"],
        "GestureGaze" => &["here", "there", "this", "that"],
        "Object" => &["door", "window", "radio", "seat", "trunk"],
        other => panic!("no lexicon for tag {}", other),
    }
}

fn intent_templates(intent: &str) -> &'static [&'static [Token]] {
    match intent {
        "SetDestination" => &[
            &[("take", "IntentKeyword"), ("me", "O"), ("to", "O"), ("the", "O"), (SLOT, "Location")],
            &[("drive", "IntentKeyword"), ("us", "O"), ("to", "O"), ("the", "O"), (SLOT, "Location")],
            &[("i", "O"), ("want", "O"), ("to", "O"), ("visit", "IntentKeyword"), ("the", "O"), (SLOT, "Location")],
        ],
        "SetRoute" => &[
            &[("reroute", "IntentKeyword"), ("through", "O"), ("the", "O"), (SLOT, "Location")],
            &[("use", "O"), ("the", "O"), (SLOT, "PositionDirection"), ("route", "IntentKeyword")],
            &[("avoid", "IntentKeyword"), ("the", "O"), (SLOT, "Location"), ("road", "Object")],
        ],
        "Park" => &[
            &[("park", "IntentKeyword"), ("the", "O"), ("car", "Object"), (SLOT, "PositionDirection")],
            &[("find", "O"), ("parking", "IntentKeyword"), ("near", "O"), ("the", "O"), (SLOT, "Location")],
            &[("park", "IntentKeyword"), (SLOT, "TimeGuidance"), ("please", "O")],
        ],
        "PullOver" => &[
            &[("pull", "IntentKeyword"), ("over", "IntentKeyword"), (SLOT, "PositionDirection")],
            &[("pull", "IntentKeyword"), ("over", "IntentKeyword"), ("by", "O"), ("the", "O"), (SLOT, "Location")],
            &[("please", "O"), ("pull", "IntentKeyword"), ("over", "IntentKeyword"), (SLOT, "TimeGuidance")],
        ],
        "Stop" => &[
            &[("stop", "IntentKeyword"), ("the", "O"), ("car", "Object")],
            &[("stop", "IntentKeyword"), (SLOT, "TimeGuidance"), ("please", "O")],
            &[("please", "O"), ("stop", "IntentKeyword"), (SLOT, "GestureGaze")],
        ],
        "GoFaster" => &[
            &[("go", "O"), ("faster", "IntentKeyword"), ("please", "O")],
            &[("speed", "IntentKeyword"), ("up", "IntentKeyword"), ("a", "O"), ("bit", "O")],
            &[("hurry", "IntentKeyword"), ("we", "O"), ("are", "O"), ("late", "O")],
        ],
        "GoSlower" => &[
            &[("slow", "IntentKeyword"), ("down", "IntentKeyword"), ("please", "O")],
            &[("go", "O"), ("slower", "IntentKeyword"), (SLOT, "TimeGuidance")],
            &[("ease", "IntentKeyword"), ("off", "IntentKeyword"), ("a", "O"), ("little", "O")],
        ],
        "OpenDoor" => &[
            &[("open", "IntentKeyword"), ("the", "O"), ("door", "Object")],
            &[("open", "IntentKeyword"), ("the", "O"), ("door", "Object"), ("for", "O"), (SLOT, "Person")],
            &[("unlock", "IntentKeyword"), ("the", "O"), ("door", "Object"), (SLOT, "TimeGuidance")],
        ],
        "Other" => &[
            &[("play", "IntentKeyword"), ("some", "O"), ("music", "Object")],
            &[("turn", "IntentKeyword"), ("on", "IntentKeyword"), ("the", "O"), ("radio", "Object")],
            &[("it", "O"), ("is", "O"), ("cold", "O"), ("in", "O"), (SLOT, "GestureGaze")],
        ],
        other => panic!("no templates for intent {}", other),
    }
}

/// Slot-free templates usable for any ambiguous pair: both pair members emit
/// the exact same token sequence, so text carries no signal.
const SHARED_TEMPLATES: [&[Token]; 4] = [
    &[("please", "O"), ("halt", "IntentKeyword"), ("right", "PositionDirection"), ("there", "GestureGaze")],
    &[("end", "IntentKeyword"), ("the", "O"), ("ride", "Object"), ("here", "GestureGaze")],
    &[("change", "IntentKeyword"), ("the", "O"), ("pace", "Object"), ("now", "TimeGuidance")],
    &[("adjust", "IntentKeyword"), ("the", "O"), ("speed", "Object"), ("please", "O")],
];

fn validate_config(cfg: &GeneratorConfig, intent_set: &IntentSet) -> Result<BTreeMap<String, Vec<usize>>> {
    if cfg.n_utterances == 0 {
        return Err(Error::Config("n_utterances must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.ambiguous_fraction) {
        return Err(Error::Config(format!(
            "ambiguous_fraction must be in [0, 1], got {}",
            cfg.ambiguous_fraction
        )));
    }
    if cfg.noise_std < 0.0 {
        return Err(Error::Config("noise_std must be nonnegative".into()));
    }
    for (a, b) in &cfg.ambiguous_pairs {
        for label in [a, b] {
            if intent_set.index_of(label).is_none() {
                return Err(Error::Config(format!("unknown intent {} in ambiguous pair", label)));
            }
        }
    }
    // default signal dims: one dimension per intent, by index
    let dims = if cfg.signal_dims.is_empty() {
        intent_set
            .labels()
            .iter()
            .enumerate()
            .map(|(i, label)| (label.clone(), vec![i]))
            .collect()
    } else {
        cfg.signal_dims.clone()
    };
    let mut seen = std::collections::HashSet::new();
    for (intent, ds) in &dims {
        if intent_set.index_of(intent).is_none() {
            return Err(Error::Config(format!("signal_dims names unknown intent {}", intent)));
        }
        for d in ds {
            if *d >= cfg.acoustic_dim {
                return Err(Error::Config(format!(
                    "signal dim {} out of range for acoustic_dim {}",
                    d, cfg.acoustic_dim
                )));
            }
            if !seen.insert(*d) {
                return Err(Error::Config(format!(
                    "signal dims overlap at dimension {}",
                    d
                )));
            }
        }
    }
    Ok(dims)
}

/// Largest-remainder allocation of n items over weighted classes; every
/// count is within one of its exact proportional share.
fn allocate_counts(n: usize, weights: &[(String, f64)]) -> Vec<(String, usize)> {
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    let mut counts: Vec<(String, usize, f64)> = weights
        .iter()
        .map(|(label, w)| {
            let share = n as f64 * w / total;
            (label.clone(), share.floor() as usize, share - share.floor())
        })
        .collect();
    let assigned: usize = counts.iter().map(|(_, c, _)| c).sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].2.partial_cmp(&counts[a].2).unwrap());
    for &idx in order.iter().take(n - assigned) {
        counts[idx].1 += 1;
    }
    counts.into_iter().map(|(l, c, _)| (l, c)).collect()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller from two uniform draws
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn generate_synthetic(cfg: &GeneratorConfig) -> Result<SyntheticOutput> {
    let tag_set = TagSet::default();
    let intent_set = IntentSet::default();
    let signal_dims = validate_config(cfg, &intent_set)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let weights: Vec<(String, f64)> = match cfg.intent_distribution {
        IntentDistribution::Uniform => intent_set
            .labels()
            .iter()
            .map(|l| (l.clone(), 1.0))
            .collect(),
        IntentDistribution::Table1Proportional => INTENT_REFERENCE_COUNTS
            .iter()
            .map(|(l, c)| (l.to_string(), *c as f64))
            .collect(),
    };
    let counts = allocate_counts(cfg.n_utterances, &weights);

    // intent per utterance, shuffled deterministically
    let mut intents: Vec<String> = counts
        .iter()
        .flat_map(|(label, count)| std::iter::repeat(label.clone()).take(*count))
        .collect();
    intents.shuffle(&mut rng);

    // choose which utterances are ambiguous among those with paired intents
    let n_ambiguous = (cfg.ambiguous_fraction * cfg.n_utterances as f64).round() as usize;
    let pair_of = |intent: &str| -> Option<(String, String)> {
        cfg.ambiguous_pairs
            .iter()
            .find(|(a, b)| a == intent || b == intent)
            .cloned()
    };
    let mut eligible: Vec<usize> = (0..intents.len())
        .filter(|&i| pair_of(&intents[i]).is_some())
        .collect();
    if eligible.len() < n_ambiguous {
        return Err(Error::Config(format!(
            "ambiguous_fraction {} needs {} utterances with paired intents but only {} exist",
            cfg.ambiguous_fraction,
            n_ambiguous,
            eligible.len()
        )));
    }
    eligible.shuffle(&mut rng);
    let ambiguous: std::collections::HashSet<usize> =
        eligible.into_iter().take(n_ambiguous).collect();

    let mut utterances = Vec::with_capacity(cfg.n_utterances);
    let mut acoustic = BTreeMap::new();
    let mut visual_cabin = BTreeMap::new();
    let mut visual_road = BTreeMap::new();
    let mut ambiguous_ids = Vec::new();

    for (i, intent) in intents.iter().enumerate() {
        let id = format!("u{:05}", i);
        let is_ambiguous = ambiguous.contains(&i);
        let template: &[Token] = if is_ambiguous {
            SHARED_TEMPLATES[rng.gen_range(0..SHARED_TEMPLATES.len())]
        } else {
            let options = intent_templates(intent);
            options[rng.gen_range(0..options.len())]
        };
        let mut tokens = Vec::with_capacity(template.len());
        let mut tags = Vec::with_capacity(template.len());
        for (word, tag) in template {
            let word = if *word == SLOT {
                let options = lexicon(tag);
                options[rng.gen_range(0..options.len())]
            } else {
                word
            };
            tokens.push(word.to_string());
            tags.push(tag.to_string());
        }

        let mut vector: Vec<f64> = (0..cfg.acoustic_dim)
            .map(|_| cfg.noise_std * gaussian(&mut rng))
            .collect();
        if is_ambiguous {
            for &d in &signal_dims[intent] {
                vector[d] += cfg.signal_shift;
            }
            ambiguous_ids.push(id.clone());
        }
        acoustic.insert(id.clone(), vector);

        let frames = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..cfg.visual_frames)
                .map(|_| {
                    (0..cfg.visual_dim)
                        .map(|_| cfg.noise_std * gaussian(rng))
                        .collect()
                })
                .collect()
        };
        visual_cabin.insert(id.clone(), frames(&mut rng));
        visual_road.insert(id.clone(), frames(&mut rng));

        utterances.push(Utterance {
            id: id.clone(),
            session: format!("s{:03}", i / 10),
            tokens,
            tags,
            intent: Some(intent.clone()),
            acoustic_ref: Some(id.clone()),
            visual_cabin_ref: Some(id.clone()),
            visual_road_ref: Some(id),
        });
    }

    let corpus = Corpus::new(utterances, tag_set, intent_set)?;

    // one embedding row per distinct token, in sorted order for determinism
    let scale = 1.0 / (cfg.embedding_dim as f64).sqrt();
    let embedding_rows: Vec<(String, Vec<f64>)> = corpus
        .vocabulary()
        .into_iter()
        .map(|token| {
            let row = (0..cfg.embedding_dim)
                .map(|_| rng.gen_range(-scale..scale))
                .collect();
            (token, row)
        })
        .collect();

    Ok(SyntheticOutput {
        corpus,
        acoustic,
        visual_cabin,
        visual_road,
        embedding_rows,
        ambiguous_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn proportional_counts_match_reference_exactly_at_1331() {
        let cfg = GeneratorConfig {
            n_utterances: 1331,
            intent_distribution: IntentDistribution::Table1Proportional,
            seed: 7,
            ..GeneratorConfig::default()
        };
        let out = generate_synthetic(&cfg).unwrap();
        let stats = out.corpus.stats();
        for (label, expected) in INTENT_REFERENCE_COUNTS {
            let got = stats.intent_counts[label];
            assert!(
                (got as i64 - expected as i64).abs() <= 1,
                "{}: {} vs {}",
                label,
                got,
                expected
            );
        }
        assert_eq!(stats.n_with_intent, 1331);
    }

    #[test]
    fn no_cross_intent_sequence_collisions_without_ambiguity() {
        let cfg = GeneratorConfig {
            n_utterances: 500,
            ambiguous_fraction: 0.0,
            seed: 3,
            ..GeneratorConfig::default()
        };
        let out = generate_synthetic(&cfg).unwrap();
        let mut by_sequence: BTreeMap<String, HashSet<String>> = BTreeMap::new();
        for utt in &out.corpus.utterances {
            by_sequence
                .entry(utt.tokens.join(" "))
                .or_default()
                .insert(utt.intent.clone().unwrap());
        }
        for (seq, intents) in by_sequence {
            assert_eq!(intents.len(), 1, "sequence {:?} spans {:?}", seq, intents);
        }
        assert!(out.ambiguous_ids.is_empty());
    }

    #[test]
    fn ambiguous_count_is_exact() {
        let cfg = GeneratorConfig {
            n_utterances: 1000,
            ambiguous_fraction: 0.3,
            seed: 5,
            ..GeneratorConfig::default()
        };
        let out = generate_synthetic(&cfg).unwrap();
        assert_eq!(out.ambiguous_ids.len(), 300);
    }

    #[test]
    fn ambiguous_utterances_share_exact_token_sequences() {
        let cfg = GeneratorConfig {
            n_utterances: 600,
            ambiguous_fraction: 0.4,
            seed: 11,
            ..GeneratorConfig::default()
        };
        let out = generate_synthetic(&cfg).unwrap();
        let shared: HashSet<String> = SHARED_TEMPLATES
            .iter()
            .map(|t| t.iter().map(|(w, _)| *w).collect::<Vec<_>>().join(" "))
            .collect();
        let amb: HashSet<&String> = out.ambiguous_ids.iter().collect();
        for utt in &out.corpus.utterances {
            let seq = utt.tokens.join(" ");
            if amb.contains(&utt.id) {
                assert!(shared.contains(&seq), "ambiguous {} has sequence {:?}", utt.id, seq);
            } else {
                assert!(!shared.contains(&seq));
            }
        }
    }

    #[test]
    fn ambiguous_signal_lands_on_the_true_intent_dims() {
        let cfg = GeneratorConfig {
            n_utterances: 400,
            ambiguous_fraction: 0.4,
            noise_std: 0.0, // isolate the shift
            seed: 2,
            ..GeneratorConfig::default()
        };
        let out = generate_synthetic(&cfg).unwrap();
        let intent_set = IntentSet::default();
        let amb: HashSet<&String> = out.ambiguous_ids.iter().collect();
        for utt in &out.corpus.utterances {
            let vec = &out.acoustic[&utt.id];
            if amb.contains(&utt.id) {
                let idx = intent_set.index_of(utt.intent.as_ref().unwrap()).unwrap();
                for (d, v) in vec.iter().enumerate() {
                    let expected = if d == idx { 2.0 } else { 0.0 };
                    assert_eq!(*v, expected, "utterance {} dim {}", utt.id, d);
                }
            } else {
                assert!(vec.iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GeneratorConfig {
            n_utterances: 120,
            ambiguous_fraction: 0.25,
            seed: 99,
            ..GeneratorConfig::default()
        };
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.acoustic, b.acoustic);
        assert_eq!(a.visual_cabin, b.visual_cabin);
        assert_eq!(a.embedding_rows, b.embedding_rows);
        assert_eq!(a.ambiguous_ids, b.ambiguous_ids);
    }

    #[test]
    fn generated_corpus_round_trips_through_files() {
        let cfg = GeneratorConfig {
            n_utterances: 60,
            ambiguous_fraction: 0.2,
            seed: 17,
            ..GeneratorConfig::default()
        };
        let out = generate_synthetic(&cfg).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        crate::data::save_corpus(f.path(), &out.corpus).unwrap();
        let loaded =
            crate::data::load_corpus(f.path(), TagSet::default(), IntentSet::default()).unwrap();
        assert_eq!(loaded, out.corpus);
    }

    #[test]
    fn overlapping_signal_dims_rejected() {
        let mut dims = BTreeMap::new();
        dims.insert("Stop".to_string(), vec![0, 1]);
        dims.insert("PullOver".to_string(), vec![1, 2]);
        let cfg = GeneratorConfig {
            signal_dims: dims,
            ..GeneratorConfig::default()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn excessive_ambiguity_for_distribution_rejected() {
        let cfg = GeneratorConfig {
            n_utterances: 1000,
            intent_distribution: IntentDistribution::Table1Proportional,
            ambiguous_fraction: 0.5, // paired intents are ~13% of the reference mix
            seed: 0,
            ..GeneratorConfig::default()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn embedding_rows_cover_vocabulary() {
        let cfg = GeneratorConfig {
            n_utterances: 150,
            seed: 4,
            ..GeneratorConfig::default()
        };
        let out = generate_synthetic(&cfg).unwrap();
        let tokens: HashSet<String> = out.embedding_rows.iter().map(|(t, _)| t.clone()).collect();
        for token in out.corpus.vocabulary() {
            assert!(tokens.contains(&token), "missing embedding for {}", token);
        }
        assert!(out.embedding_rows.iter().all(|(_, v)| v.len() == 32));
    }
}
