//! Per-utterance visual vectors from precomputed per-frame CNN descriptors:
//! load frame rows, pool them to one vector per utterance, and combine the
//! cabin and road camera views by concatenation in that fixed order.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sidecar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum View {
    Cabin,
    Road,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatureSet {
    pub utterance_id: String,
    pub view: View,
    /// One descriptor per sampled frame, ordered by frame index.
    pub frames: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolPolicy {
    #[default]
    Mean,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceVisuals {
    pub vector: Vec<f64>,
    pub views_included: Vec<View>,
}

impl UtteranceVisuals {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Loads a frame-feature sidecar; utterances absent from the file are simply
/// absent from the result.
pub fn load_frame_features(path: impl AsRef<Path>, view: View) -> Result<Vec<FrameFeatureSet>> {
    Ok(sidecar::read_frame_rows(path)?
        .into_iter()
        .map(|(utterance_id, frames)| FrameFeatureSet {
            utterance_id,
            view,
            frames,
        })
        .collect())
}

/// Element-wise mean or max across a set's frames.
pub fn pool_frames(set: &FrameFeatureSet, policy: PoolPolicy) -> Result<Vec<f64>> {
    if set.frames.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no frames to pool for utterance {}",
            set.utterance_id
        )));
    }
    let dim = set.frames[0].len();
    let mut out = match policy {
        PoolPolicy::Mean => vec![0.0; dim],
        PoolPolicy::Max => vec![f64::NEG_INFINITY; dim],
    };
    for frame in &set.frames {
        if frame.len() != dim {
            return Err(Error::Shape(format!(
                "ragged frame dims for utterance {}",
                set.utterance_id
            )));
        }
        match policy {
            PoolPolicy::Mean => {
                for (o, v) in out.iter_mut().zip(frame) {
                    *o += v;
                }
            }
            PoolPolicy::Max => {
                for (o, v) in out.iter_mut().zip(frame) {
                    if *v > *o {
                        *o = *v;
                    }
                }
            }
        }
    }
    if policy == PoolPolicy::Mean {
        let n = set.frames.len() as f64;
        for o in out.iter_mut() {
            *o /= n;
        }
    }
    Ok(out)
}

/// Concatenates pooled view vectors in fixed (cabin, road) order.
pub fn combine_views(cabin: Option<&[f64]>, road: Option<&[f64]>) -> Result<UtteranceVisuals> {
    if cabin.is_none() && road.is_none() {
        return Err(Error::EmptyInput("combine_views with no views".into()));
    }
    let mut vector = Vec::new();
    let mut views_included = Vec::new();
    if let Some(v) = cabin {
        vector.extend_from_slice(v);
        views_included.push(View::Cabin);
    }
    if let Some(v) = road {
        vector.extend_from_slice(v);
        views_included.push(View::Road);
    }
    Ok(UtteranceVisuals {
        vector,
        views_included,
    })
}

/// Pools every set in a sidecar with one policy, keyed by utterance id.
pub fn pool_all(
    sets: &[FrameFeatureSet],
    policy: PoolPolicy,
) -> Result<BTreeMap<String, Vec<f64>>> {
    sets.iter()
        .map(|s| Ok((s.utterance_id.clone(), pool_frames(s, policy)?)))
        .collect()
}
