use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// Token → synonyms, all lowercase, never listing a key as its own synonym.
///
/// File format: one entry per line, `word<TAB>syn1,syn2,...`. Blank lines
/// and lines starting with `#` are ignored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    entries: BTreeMap<String, Vec<String>>,
}

impl SynonymLexicon {
    pub fn new(entries: BTreeMap<String, Vec<String>>) -> Result<Self> {
        for (key, syns) in &entries {
            if key.is_empty() || *key != key.to_lowercase() {
                return Err(Error::InvalidConfig(format!(
                    "lexicon key {key:?} must be non-empty lowercase"
                )));
            }
            if syns.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "lexicon entry {key:?} has no synonyms"
                )));
            }
            if syns.contains(key) {
                return Err(Error::InvalidConfig(format!(
                    "lexicon entry {key:?} lists itself"
                )));
            }
            if let Some(bad) = syns
                .iter()
                .find(|s| s.is_empty() || s.chars().any(char::is_whitespace))
            {
                return Err(Error::InvalidConfig(format!(
                    "synonym {bad:?} of {key:?} is not a single token"
                )));
            }
        }
        Ok(SynonymLexicon { entries })
    }

    pub fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = (&'a str, &'a [&'a str])>,
    ) -> Result<Self> {
        SynonymLexicon::new(
            pairs
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
                .collect(),
        )
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, syns) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: origin.into(),
                line: i + 1,
                message: "expected word<TAB>synonyms".into(),
            })?;
            let word = word.trim().to_lowercase();
            let syns: Vec<String> = syns
                .split(',')
                .map(|s| s.trim().to_lowercase())
                .filter(|s| !s.is_empty() && *s != word)
                .collect();
            if syns.is_empty() {
                continue;
            }
            let slot = entries.entry(word).or_default();
            for s in syns {
                if !slot.contains(&s) {
                    slot.push(s);
                }
            }
        }
        SynonymLexicon::new(entries)
    }

    /// The small general-purpose lexicon shipped with the crate.
    pub fn builtin() -> Self {
        SynonymLexicon::parse(include_str!("../../data/lexicon.tsv"), Path::new("builtin"))
            .expect("valid builtin lexicon")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SynonymLexicon::parse(&text, path)
    }

    pub fn synonyms(&self, token: &str) -> Option<&[String]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
