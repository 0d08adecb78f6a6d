//! Dataset schemas, ingestion, text normalization and split management.

mod io;
mod normalize;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use io::{
    load_dataset, write_dataset, write_examples, FileFormat, IngestionStats, LabelMap, Schema,
    SplitSpec,
};
pub use normalize::{normalize_conversation, normalize_text, Profile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    NotOffensive = 0,
    Offensive = 1,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::NotOffensive, Label::Offensive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::NotOffensive),
            1 => Some(Label::Offensive),
            _ => None,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::NotOffensive => Label::Offensive,
            Label::Offensive => Label::NotOffensive,
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l as u8
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        Label::from_index(v as usize).ok_or_else(|| format!("label {v} is not 0 or 1"))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::NotOffensive => "NOT",
            Label::Offensive => "OFF",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub source: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            source: String::new(),
        }
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Human,
    Weak,
    Augmented,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    #[serde(flatten)]
    pub doc: Document,
    pub label: Label,
    pub provenance: Provenance,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_id: Option<String>,
}

impl LabeledExample {
    pub fn human(doc: Document, label: Label) -> Self {
        LabeledExample {
            doc,
            label,
            provenance: Provenance::Human,
            confidence: 1.0,
            origin_id: None,
        }
    }

    pub fn weak(doc: Document, label: Label, confidence: f64) -> Self {
        LabeledExample {
            doc,
            label,
            provenance: Provenance::Weak,
            confidence,
            origin_id: None,
        }
    }

    /// A noised copy of a weak example. The label and confidence are
    /// inherited from the clean origin.
    pub fn augmented_from(origin: &LabeledExample, id: String, text: String) -> Self {
        LabeledExample {
            doc: Document {
                id,
                text,
                source: origin.doc.source.clone(),
            },
            label: origin.label,
            provenance: Provenance::Augmented,
            confidence: origin.confidence,
            origin_id: Some(origin.doc.id.clone()),
        }
    }

    pub fn id(&self) -> &str {
        &self.doc.id
    }

    pub fn text(&self) -> &str {
        &self.doc.text
    }

    /// Human labels are trained as the labelled side of the combined loss,
    /// everything else as the inferred side.
    pub fn is_human(&self) -> bool {
        self.provenance == Provenance::Human
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    #[serde(rename = "0")]
    pub not_offensive: usize,
    #[serde(rename = "1")]
    pub offensive: usize,
}

impl ClassCounts {
    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::NotOffensive => self.not_offensive,
            Label::Offensive => self.offensive,
        }
    }

    pub fn add(&mut self, label: Label) {
        match label {
            Label::NotOffensive => self.not_offensive += 1,
            Label::Offensive => self.offensive += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.not_offensive + self.offensive
    }
}

pub fn class_distribution(examples: &[LabeledExample]) -> ClassCounts {
    let mut counts = ClassCounts::default();
    for ex in examples {
        counts.add(ex.label);
    }
    counts
}

/// Majority vote over annotator labels. Ties go to `NotOffensive`.
pub fn consolidate_annotations(votes: &[Label]) -> Result<Label> {
    if votes.is_empty() {
        return Err(Error::EmptyVotes);
    }
    let offensive = votes.iter().filter(|&&v| v == Label::Offensive).count();
    if 2 * offensive > votes.len() {
        Ok(Label::Offensive)
    } else {
        Ok(Label::NotOffensive)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
    Unlabelled,
}

impl Split {
    pub fn parse(s: &str) -> Option<Split> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" | "training" => Some(Split::Train),
            "dev" | "valid" | "validation" => Some(Split::Dev),
            "test" => Some(Split::Test),
            "unlabelled" | "unlabeled" | "pool" => Some(Split::Unlabelled),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
            Split::Unlabelled => "unlabelled",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub train: Vec<LabeledExample>,
    #[serde(default)]
    pub dev: Option<Vec<LabeledExample>>,
    pub test: Vec<LabeledExample>,
    #[serde(default)]
    pub unlabelled: Vec<Document>,
}

impl DatasetBundle {
    pub fn split(&self, split: Split) -> &[LabeledExample] {
        match split {
            Split::Train => &self.train,
            Split::Dev => self.dev.as_deref().unwrap_or(&[]),
            Split::Test => &self.test,
            Split::Unlabelled => &[],
        }
    }

    fn ids(&self) -> impl Iterator<Item = &str> {
        self.train
            .iter()
            .chain(self.dev.iter().flatten())
            .chain(self.test.iter())
            .map(|e| e.id())
            .chain(self.unlabelled.iter().map(|d| d.id.as_str()))
    }

    /// Checks that no id occurs twice across all splits.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for id in self.ids() {
            if !seen.insert(id) {
                return Err(Error::DuplicateId(id.to_string()));
            }
        }
        Ok(())
    }

    /// Appends every split of `other`, rejecting ids already present.
    pub fn merge(&mut self, other: DatasetBundle) -> Result<()> {
        self.train.extend(other.train);
        if let Some(dev) = other.dev {
            self.dev.get_or_insert_with(Vec::new).extend(dev);
        }
        self.test.extend(other.test);
        self.unlabelled.extend(other.unlabelled);
        self.validate()
    }
}
