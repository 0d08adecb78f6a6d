//! Tokenization, hashed n-gram features and vocabularies.

use std::collections::BTreeSet;
use std::hash::Hasher;
use std::ops::Deref;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::seed::mix64;
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence(pub Vec<String>);

impl Deref for TokenSequence {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl TokenSequence {
    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence(iter.into_iter().map(Into::into).collect())
    }
}

/// Lowercased runs of alphanumeric characters.
pub fn tokenize(text: &str) -> TokenSequence {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub const DEFAULT_DIMENSION: usize = 1 << 18;
pub const MIN_DIMENSION: usize = 1 << 10;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const TOKEN_SEP: u8 = 0x1f;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpace {
    dimension: usize,
    ngram_orders: Vec<usize>,
    hash_seed: u64,
}

impl Default for FeatureSpace {
    fn default() -> Self {
        FeatureSpace {
            dimension: DEFAULT_DIMENSION,
            ngram_orders: vec![1, 2],
            hash_seed: 0,
        }
    }
}

impl FeatureSpace {
    pub fn new(dimension: usize, ngram_orders: &[usize], hash_seed: u64) -> Result<Self> {
        if !dimension.is_power_of_two() || dimension < MIN_DIMENSION {
            return Err(Error::InvalidConfig(format!(
                "feature dimension {dimension} must be a power of two >= {MIN_DIMENSION}"
            )));
        }
        let mut orders = ngram_orders.to_vec();
        orders.sort_unstable();
        orders.dedup();
        if orders.is_empty() || orders[0] == 0 {
            return Err(Error::InvalidConfig(
                "n-gram orders must be a non-empty set of positive integers".into(),
            ));
        }
        Ok(FeatureSpace {
            dimension,
            ngram_orders: orders,
            hash_seed,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn ngram_orders(&self) -> &[usize] {
        &self.ngram_orders
    }

    pub fn hash_seed(&self) -> u64 {
        self.hash_seed
    }

    /// Bucket of one n-gram: seeded FNV-1a over the order byte and the
    /// 0x1f-terminated token bytes, finalized with splitmix64.
    pub fn index_of(&self, ngram: &[String]) -> u32 {
        let mut h = FnvHasher::with_key(FNV_OFFSET ^ mix64(self.hash_seed));
        h.write(&[ngram.len() as u8]);
        for tok in ngram {
            h.write(tok.as_bytes());
            h.write(&[TOKEN_SEP]);
        }
        (mix64(h.finish()) & (self.dimension as u64 - 1)) as u32
    }

    /// Unnormalized n-gram counts, sorted by index.
    pub fn hashed_counts(&self, seq: &[String]) -> Vec<(u32, f64)> {
        let mut raw = Vec::new();
        for &n in &self.ngram_orders {
            if seq.len() < n {
                continue;
            }
            for w in seq.windows(n) {
                raw.push((self.index_of(w), 1.0));
            }
        }
        merge_sorted(raw)
    }

    pub fn featurize(&self, seq: &[String]) -> FeatureVector {
        FeatureVector::from_raw(self.hashed_counts(seq))
    }

    pub fn featurize_text(&self, text: &str) -> FeatureVector {
        self.featurize(&tokenize(text))
    }
}

fn merge_sorted(mut raw: Vec<(u32, f64)>) -> Vec<(u32, f64)> {
    raw.sort_unstable_by_key(|&(i, _)| i);
    let mut out: Vec<(u32, f64)> = Vec::with_capacity(raw.len());
    for (i, v) in raw {
        match out.last_mut() {
            Some((j, acc)) if *j == i => *acc += v,
            _ => out.push((i, v)),
        }
    }
    out
}

/// Sparse, L2-normalized feature vector.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureVector {
    entries: Vec<(u32, f64)>,
    norm: f64,
}

impl FeatureVector {
    /// Accumulates duplicate indices and scales to unit L2 norm. An all-zero
    /// input stays the zero vector with norm 0.
    pub fn from_raw(raw: Vec<(u32, f64)>) -> Self {
        let mut entries = merge_sorted(raw);
        entries.retain(|&(_, v)| v != 0.0);
        let sq: f64 = entries.iter().map(|&(_, v)| v * v).sum();
        if sq == 0.0 {
            return FeatureVector::default();
        }
        let inv = 1.0 / sq.sqrt();
        for (_, v) in &mut entries {
            *v *= inv;
        }
        let norm = entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        FeatureVector { entries, norm }
    }

    /// Takes sorted, de-duplicated entries as-is (no normalization), e.g.
    /// after dropout.
    pub(crate) fn from_entries_unchecked(entries: Vec<(u32, f64)>) -> Self {
        let norm = entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        FeatureVector { entries, norm }
    }

    /// Multiplies every entry by `factor` without renormalizing.
    pub fn scaled(&self, factor: f64) -> Self {
        FeatureVector::from_entries_unchecked(
            self.entries.iter().map(|&(i, v)| (i, v * factor)).collect(),
        )
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary(BTreeSet<String>);

impl Vocabulary {
    pub fn size(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn add_text(&mut self, text: &str) {
        self.0.extend(tokenize(text).0);
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

pub fn build_vocabulary(docs: &[Document]) -> Vocabulary {
    let mut v = Vocabulary::default();
    for d in docs {
        v.add_text(&d.text);
    }
    v
}
