//! Corpus schema, validation, splitting, and feature attachment.
//!
//! Corpus files are UTF-8 text with one JSON object per line; see
//! [`Utterance`] for the record fields. Non-command utterances (no intent)
//! are kept in the corpus but excluded from intent training and scoring.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{IntentSet, TagSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub session: String,
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
    pub intent: Option<String>,
    pub acoustic_ref: Option<String>,
    pub visual_cabin_ref: Option<String>,
    pub visual_road_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub utterances: Vec<Utterance>,
    pub tag_set: TagSet,
    pub intent_set: IntentSet,
}

/// Per-label counts for validation reports.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub n_utterances: usize,
    pub n_with_intent: usize,
    pub intent_counts: BTreeMap<String, usize>,
    pub tag_counts: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn new(
        utterances: Vec<Utterance>,
        tag_set: TagSet,
        intent_set: IntentSet,
    ) -> Result<Corpus> {
        let corpus = Corpus {
            utterances,
            tag_set,
            intent_set,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for utt in &self.utterances {
            if !ids.insert(&utt.id) {
                return Err(Error::Data(format!("duplicate utterance id {}", utt.id)));
            }
            if utt.tokens.is_empty() {
                return Err(Error::Data(format!("utterance {} has no tokens", utt.id)));
            }
            if utt.tokens.len() != utt.tags.len() {
                return Err(Error::Data(format!(
                    "utterance {} has {} tokens but {} tags",
                    utt.id,
                    utt.tokens.len(),
                    utt.tags.len()
                )));
            }
            for tag in &utt.tags {
                if self.tag_set.index_of(tag).is_none() {
                    return Err(Error::Data(format!(
                        "utterance {} uses unknown tag {}; allowed: {}",
                        utt.id,
                        tag,
                        self.tag_set.labels().join(", ")
                    )));
                }
            }
            if let Some(intent) = &utt.intent {
                if self.intent_set.index_of(intent).is_none() {
                    return Err(Error::Data(format!(
                        "utterance {} uses unknown intent {}; allowed: {}",
                        utt.id,
                        intent,
                        self.intent_set.labels().join(", ")
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn stats(&self) -> CorpusStats {
        let mut intent_counts = BTreeMap::new();
        let mut tag_counts = BTreeMap::new();
        let mut n_with_intent = 0;
        for utt in &self.utterances {
            if let Some(intent) = &utt.intent {
                *intent_counts.entry(intent.clone()).or_insert(0) += 1;
                n_with_intent += 1;
            }
            for tag in &utt.tags {
                *tag_counts.entry(tag.clone()).or_insert(0) += 1;
            }
        }
        CorpusStats {
            n_utterances: self.utterances.len(),
            n_with_intent,
            intent_counts,
            tag_counts,
        }
    }

    /// Vocabulary of distinct lowercased tokens, sorted.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut vocab: Vec<String> = self
            .utterances
            .iter()
            .flat_map(|u| u.tokens.iter().map(|t| t.to_lowercase()))
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        vocab.sort();
        vocab
    }

    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            utterances: indices.iter().map(|&i| self.utterances[i].clone()).collect(),
            tag_set: self.tag_set.clone(),
            intent_set: self.intent_set.clone(),
        }
    }
}

/// Loads and validates a JSON-lines corpus against the given schema.
pub fn load_corpus(
    path: impl AsRef<Path>,
    tag_set: TagSet,
    intent_set: IntentSet,
) -> Result<Corpus> {
    let display = path.as_ref().display().to_string();
    let file = File::open(path.as_ref()).map_err(|e| Error::io(&display, e))?;
    let mut utterances = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&display, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let utt: Utterance = serde_json::from_str(&line)
            .map_err(|e| Error::format(&display, idx + 1, e.to_string()))?;
        utterances.push(utt);
    }
    Corpus::new(utterances, tag_set, intent_set)
}

/// Writes one JSON object per line; field order is fixed by the struct, so
/// identical corpora give identical bytes.
pub fn save_corpus(path: impl AsRef<Path>, corpus: &Corpus) -> Result<()> {
    let display = path.as_ref().display().to_string();
    let file = File::create(path.as_ref()).map_err(|e| Error::io(&display, e))?;
    let mut w = BufWriter::new(file);
    for utt in &corpus.utterances {
        let line = serde_json::to_string(utt)
            .map_err(|e| Error::Data(format!("serialize {}: {}", utt.id, e)))?;
        writeln!(w, "{}", line).map_err(|e| Error::io(&display, e))?;
    }
    Ok(())
}

/// One cross-validation fold as index lists into the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Deterministic k-fold split. Stratified mode groups utterances by intent
/// (no-intent utterances form their own stratum) and deals each stratum
/// round-robin, so per-class test counts differ by at most one across folds.
pub fn kfold_split(corpus: &Corpus, k: usize, seed: u64, stratified: bool) -> Result<Vec<Fold>> {
    let n = corpus.utterances.len();
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {}", k)));
    }
    if k > n {
        return Err(Error::Config(format!(
            "k = {} exceeds corpus size {}",
            k, n
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_sets: Vec<Vec<usize>> = vec![Vec::new(); k];
    if stratified {
        let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, utt) in corpus.utterances.iter().enumerate() {
            let key = utt.intent.clone().unwrap_or_else(|| "\u{0}no-intent".into());
            strata.entry(key).or_default().push(i);
        }
        for members in strata.values_mut() {
            members.shuffle(&mut rng);
            for (pos, &idx) in members.iter().enumerate() {
                test_sets[pos % k].push(idx);
            }
        }
    } else {
        let mut indices: Vec<usize> = (0..n).collect();
        indices.shuffle(&mut rng);
        for (pos, &idx) in indices.iter().enumerate() {
            test_sets[pos % k].push(idx);
        }
    }
    Ok(test_sets
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let in_test: HashSet<usize> = test.iter().copied().collect();
            let train: Vec<usize> = (0..n).filter(|i| !in_test.contains(i)).collect();
            Fold { train, test }
        })
        .collect())
}

/// Deterministic single train/test split with the test side holding
/// round(n * test_fraction) utterances, stratified by intent.
pub fn fixed_split(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<Fold> {
    if !(0.0..1.0).contains(&test_fraction) || test_fraction <= 0.0 {
        return Err(Error::Config(format!(
            "test fraction must be in (0, 1), got {}",
            test_fraction
        )));
    }
    let n = corpus.utterances.len();
    let n_test = ((n as f64) * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::Config(format!(
            "test fraction {} leaves an empty split for {} utterances",
            test_fraction, n
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, utt) in corpus.utterances.iter().enumerate() {
        let key = utt.intent.clone().unwrap_or_else(|| "\u{0}no-intent".into());
        strata.entry(key).or_default().push(i);
    }
    let mut test: Vec<usize> = Vec::new();
    let mut leftovers: Vec<usize> = Vec::new();
    for members in strata.values_mut() {
        members.shuffle(&mut rng);
        let take = ((members.len() as f64) * test_fraction).floor() as usize;
        test.extend(&members[..take]);
        if (members.len() as f64 * test_fraction) - take as f64 > 1e-12 {
            leftovers.push(members[take]);
        }
    }
    // top up from per-stratum remainders to hit the rounded global count
    leftovers.shuffle(&mut rng);
    for idx in leftovers {
        if test.len() >= n_test {
            break;
        }
        test.push(idx);
    }
    test.sort_unstable();
    test.dedup();
    let in_test: HashSet<usize> = test.iter().copied().collect();
    let train: Vec<usize> = (0..n).filter(|i| !in_test.contains(i)).collect();
    Ok(Fold { train, test })
}

/// How to handle utterances whose feature reference is missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttachMode {
    /// Any missing id is an error naming the utterance.
    Strict,
    /// Missing ids are zero-filled and counted.
    Lenient,
}

/// Loaded sidecar maps, one per modality. Absent maps mean the modality is
/// simply not attached.
#[derive(Debug, Clone, Default)]
pub struct FeatureStore {
    pub acoustic: Option<BTreeMap<String, Vec<f64>>>,
    pub visual_cabin: Option<BTreeMap<String, Vec<f64>>>,
    pub visual_road: Option<BTreeMap<String, Vec<f64>>>,
}

/// Feature vectors aligned with corpus order, zero-filled where lenient
/// attachment found gaps.
#[derive(Debug, Clone, Default)]
pub struct AttachedFeatures {
    pub acoustic: Option<Vec<Vec<f64>>>,
    pub visual_cabin: Option<Vec<Vec<f64>>>,
    pub visual_road: Option<Vec<Vec<f64>>>,
    pub warnings: Vec<String>,
}

fn attach_one(
    corpus: &Corpus,
    map: &BTreeMap<String, Vec<f64>>,
    get_ref: impl Fn(&Utterance) -> Option<&String>,
    modality: &str,
    mode: AttachMode,
    warnings: &mut Vec<String>,
) -> Result<Vec<Vec<f64>>> {
    let dim = map.values().next().map(|v| v.len()).ok_or_else(|| {
        Error::Data(format!("{} feature map is empty, cannot infer dim", modality))
    })?;
    let mut out = Vec::with_capacity(corpus.utterances.len());
    for utt in &corpus.utterances {
        let found = get_ref(utt).and_then(|r| map.get(r));
        match found {
            Some(v) => out.push(v.clone()),
            None => {
                let what = format!(
                    "utterance {} missing {} feature (ref {:?})",
                    utt.id,
                    modality,
                    get_ref(utt)
                );
                if mode == AttachMode::Strict {
                    return Err(Error::Data(what));
                }
                warnings.push(what);
                out.push(vec![0.0; dim]);
            }
        }
    }
    Ok(out)
}

/// Resolves feature references for every provided modality.
pub fn attach_features(
    corpus: &Corpus,
    store: &FeatureStore,
    mode: AttachMode,
) -> Result<AttachedFeatures> {
    let mut attached = AttachedFeatures::default();
    if let Some(map) = &store.acoustic {
        attached.acoustic = Some(attach_one(
            corpus,
            map,
            |u| u.acoustic_ref.as_ref(),
            "acoustic",
            mode,
            &mut attached.warnings,
        )?);
    }
    if let Some(map) = &store.visual_cabin {
        attached.visual_cabin = Some(attach_one(
            corpus,
            map,
            |u| u.visual_cabin_ref.as_ref(),
            "cabin-view visual",
            mode,
            &mut attached.warnings,
        )?);
    }
    if let Some(map) = &store.visual_road {
        attached.visual_road = Some(attach_one(
            corpus,
            map,
            |u| u.visual_road_ref.as_ref(),
            "road-view visual",
            mode,
            &mut attached.warnings,
        )?);
    }
    Ok(attached)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn utt(id: &str, tokens: &[&str], tags: &[&str], intent: Option<&str>) -> Utterance {
        Utterance {
            id: id.into(),
            session: "s0".into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            tags: tags.iter().map(|s| s.to_string()).collect(),
            intent: intent.map(|s| s.to_string()),
            acoustic_ref: Some(id.into()),
            visual_cabin_ref: None,
            visual_road_ref: None,
        }
    }

    fn small_corpus() -> Corpus {
        Corpus::new(
            vec![
                utt("u1", &["stop", "the", "car"], &["IntentKeyword", "O", "Object"], Some("Stop")),
                utt("u2", &["take", "me", "home"], &["IntentKeyword", "O", "Location"], Some("SetDestination")),
                utt("u3", &["nice", "view"], &["O", "O"], None),
            ],
            TagSet::default(),
            IntentSet::default(),
        )
        .unwrap()
    }

    #[test]
    fn valid_corpus_round_trips() {
        let corpus = small_corpus();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_corpus(f.path(), &corpus).unwrap();
        let loaded = load_corpus(f.path(), TagSet::default(), IntentSet::default()).unwrap();
        assert_eq!(loaded, corpus);
    }

    #[test]
    fn tag_length_mismatch_names_utterance() {
        let bad = utt("u9", &["a", "b", "c", "d"], &["O", "O", "O"], None);
        let err = Corpus::new(vec![bad], TagSet::default(), IntentSet::default()).unwrap_err();
        assert!(err.to_string().contains("u9"));
    }

    #[test]
    fn unknown_tag_lists_allowed_labels() {
        let bad = utt("u7", &["x"], &["Vehicle"], None);
        let err = Corpus::new(vec![bad], TagSet::default(), IntentSet::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Vehicle"));
        assert!(msg.contains("IntentKeyword"));
        assert!(msg.contains("GestureGaze"));
    }

    #[test]
    fn duplicate_id_rejected() {
        let a = utt("dup", &["x"], &["O"], None);
        let b = utt("dup", &["y"], &["O"], None);
        let err = Corpus::new(vec![a, b], TagSet::default(), IntentSet::default()).unwrap_err();
        assert!(err.to_string().contains("dup"));
    }

    #[test]
    fn stats_count_intents_and_tags() {
        let stats = small_corpus().stats();
        assert_eq!(stats.n_utterances, 3);
        assert_eq!(stats.n_with_intent, 2);
        assert_eq!(stats.intent_counts["Stop"], 1);
        assert_eq!(stats.tag_counts["O"], 4);
    }

    fn labeled_corpus(counts: &[(&str, usize)]) -> Corpus {
        let mut utterances = Vec::new();
        let mut n = 0;
        for (intent, count) in counts {
            for _ in 0..*count {
                utterances.push(utt(
                    &format!("u{:04}", n),
                    &["go"],
                    &["IntentKeyword"],
                    Some(intent),
                ));
                n += 1;
            }
        }
        Corpus::new(utterances, TagSet::default(), IntentSet::default()).unwrap()
    }

    #[test]
    fn kfold_disjoint_union() {
        let corpus = labeled_corpus(&[("Stop", 10)]);
        let folds = kfold_split(&corpus, 5, 3, false).unwrap();
        assert_eq!(folds.len(), 5);
        let mut all: Vec<usize> = Vec::new();
        for fold in &folds {
            assert_eq!(fold.test.len(), 2);
            assert_eq!(fold.train.len(), 8);
            all.extend(&fold.test);
        }
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn kfold_deterministic() {
        let corpus = labeled_corpus(&[("Stop", 12), ("Park", 8)]);
        assert_eq!(
            kfold_split(&corpus, 4, 9, true).unwrap(),
            kfold_split(&corpus, 4, 9, true).unwrap()
        );
        assert_ne!(
            kfold_split(&corpus, 4, 9, false).unwrap(),
            kfold_split(&corpus, 4, 10, false).unwrap()
        );
    }

    #[test]
    fn stratified_preserves_exact_proportions() {
        let corpus = labeled_corpus(&[("Stop", 90), ("Park", 10)]);
        let folds = kfold_split(&corpus, 10, 42, true).unwrap();
        for fold in &folds {
            let stops = fold
                .test
                .iter()
                .filter(|&&i| corpus.utterances[i].intent.as_deref() == Some("Stop"))
                .count();
            let parks = fold.test.len() - stops;
            assert_eq!(stops, 9);
            assert_eq!(parks, 1);
        }
    }

    #[test]
    fn kfold_k_too_large_rejected() {
        let corpus = labeled_corpus(&[("Stop", 3)]);
        assert!(matches!(
            kfold_split(&corpus, 4, 0, false),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn fixed_split_sizes() {
        let corpus = labeled_corpus(&[("Stop", 80), ("Park", 20)]);
        let fold = fixed_split(&corpus, 0.2, 5).unwrap();
        assert_eq!(fold.test.len(), 20);
        assert_eq!(fold.train.len(), 80);
        let test_parks = fold
            .test
            .iter()
            .filter(|&&i| corpus.utterances[i].intent.as_deref() == Some("Park"))
            .count();
        assert_eq!(test_parks, 4); // stratification holds exactly here
    }

    #[test]
    fn attach_all_present_no_warnings() {
        let corpus = small_corpus();
        let mut map = BTreeMap::new();
        for utt in &corpus.utterances {
            map.insert(utt.id.clone(), vec![1.0, 2.0]);
        }
        let store = FeatureStore {
            acoustic: Some(map),
            ..FeatureStore::default()
        };
        let attached = attach_features(&corpus, &store, AttachMode::Strict).unwrap();
        assert!(attached.warnings.is_empty());
        assert_eq!(attached.acoustic.unwrap().len(), 3);
    }

    #[test]
    fn attach_missing_lenient_zero_fills() {
        let corpus = small_corpus();
        let mut map = BTreeMap::new();
        map.insert("u1".to_string(), vec![1.0, 2.0]);
        map.insert("u2".to_string(), vec![3.0, 4.0]);
        // u3 has acoustic_ref = u3 but no entry
        let store = FeatureStore {
            acoustic: Some(map),
            ..FeatureStore::default()
        };
        let attached = attach_features(&corpus, &store, AttachMode::Lenient).unwrap();
        assert_eq!(attached.warnings.len(), 1);
        assert!(attached.warnings[0].contains("u3"));
        assert_eq!(attached.acoustic.unwrap()[2], vec![0.0, 0.0]);
    }

    #[test]
    fn attach_missing_strict_errors_with_id() {
        let corpus = small_corpus();
        let mut map = BTreeMap::new();
        map.insert("u1".to_string(), vec![1.0]);
        map.insert("u2".to_string(), vec![2.0]);
        let store = FeatureStore {
            acoustic: Some(map),
            ..FeatureStore::default()
        };
        let err = attach_features(&corpus, &store, AttachMode::Strict).unwrap_err();
        assert!(err.to_string().contains("u3"));
    }
}
