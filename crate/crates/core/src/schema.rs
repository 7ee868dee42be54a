//! Label schemas: the word-level tag set and the utterance-level intent set.
//!
//! The outside tag `O` is always index 0. The default intent set ships nine
//! labels and stays configurable so deployments can add classes (for
//! example a drop-off intent) without code changes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OUTSIDE_TAG: &str = "O";

pub const DEFAULT_TAGS: [&str; 8] = [
    "O",
    "IntentKeyword",
    "Location",
    "PositionDirection",
    "Person",
    "TimeGuidance",
    "GestureGaze",
    "Object",
];

pub const DEFAULT_INTENTS: [&str; 9] = [
    "SetDestination",
    "SetRoute",
    "Park",
    "PullOver",
    "Stop",
    "GoFaster",
    "GoSlower",
    "OpenDoor",
    "Other",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSet {
    labels: Vec<String>,
}

impl Default for TagSet {
    fn default() -> Self {
        TagSet {
            labels: DEFAULT_TAGS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl TagSet {
    pub fn new(labels: Vec<String>) -> Result<TagSet> {
        if labels.first().map(String::as_str) != Some(OUTSIDE_TAG) {
            return Err(Error::Config(format!(
                "tag set must start with {}",
                OUTSIDE_TAG
            )));
        }
        check_unique(&labels)?;
        Ok(TagSet { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub const OUTSIDE: usize = 0;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentSet {
    labels: Vec<String>,
}

impl Default for IntentSet {
    fn default() -> Self {
        IntentSet {
            labels: DEFAULT_INTENTS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl IntentSet {
    pub fn new(labels: Vec<String>) -> Result<IntentSet> {
        if labels.is_empty() {
            return Err(Error::Config("intent set cannot be empty".into()));
        }
        check_unique(&labels)?;
        Ok(IntentSet { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }
}

fn check_unique(labels: &[String]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for label in labels {
        if !seen.insert(label) {
            return Err(Error::Config(format!("duplicate label {}", label)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_have_expected_sizes() {
        assert_eq!(TagSet::default().len(), 8);
        assert_eq!(IntentSet::default().len(), 9);
        assert_eq!(TagSet::default().label(0), "O");
    }

    #[test]
    fn tag_set_requires_outside_first() {
        assert!(TagSet::new(vec!["Location".into(), "O".into()]).is_err());
    }

    #[test]
    fn duplicate_labels_rejected() {
        assert!(TagSet::new(vec!["O".into(), "A".into(), "A".into()]).is_err());
        assert!(IntentSet::new(vec!["X".into(), "X".into()]).is_err());
    }

    #[test]
    fn intent_set_is_extensible() {
        let mut labels: Vec<String> = DEFAULT_INTENTS.iter().map(|s| s.to_string()).collect();
        labels.push("DropOff".into());
        let set = IntentSet::new(labels).unwrap();
        assert_eq!(set.len(), 10);
        assert_eq!(set.index_of("DropOff"), Some(9));
    }
}
