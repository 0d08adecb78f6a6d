//! Text augmenters used to noise weak-label sets.
//!
//! Word swap and synonym substitution act on whitespace tokens and are
//! seeded per document. Backtranslation round-trips text through a pivot
//! language via a [`Translator`].

mod lexicon;
mod translate;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, LabeledExample, Provenance};
use crate::exec::Execution;
use crate::seed;
use crate::{Error, Result};

pub use lexicon::SynonymLexicon;
pub use translate::{
    backtranslate, DictionaryTranslator, IdentityTranslator, LanguagePair, TranslateRequest,
    TranslationService, Translator, TransportTranslator, MAX_BATCH,
};

pub const DEFAULT_RATE: f64 = 0.3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugmenterKind {
    #[default]
    None,
    #[serde(alias = "ws")]
    WordSwap,
    #[serde(alias = "ss")]
    Synonym,
    #[serde(alias = "bt")]
    Backtranslation,
}

impl AugmenterKind {
    pub const ALL: [AugmenterKind; 4] = [
        AugmenterKind::None,
        AugmenterKind::WordSwap,
        AugmenterKind::Synonym,
        AugmenterKind::Backtranslation,
    ];

    /// Short tag used in ids and report rows.
    pub fn tag(self) -> &'static str {
        match self {
            AugmenterKind::None => "none",
            AugmenterKind::WordSwap => "ws",
            AugmenterKind::Synonym => "ss",
            AugmenterKind::Backtranslation => "bt",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AugmenterKind::None => "none",
            AugmenterKind::WordSwap => "word-swap",
            AugmenterKind::Synonym => "synonym",
            AugmenterKind::Backtranslation => "backtranslation",
        }
    }
}

impl fmt::Display for AugmenterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AugmenterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AugmenterKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s || k.tag() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown augmenter {s:?}")))
    }
}

#[derive(Clone)]
pub struct AugmentConfig {
    pub kind: AugmenterKind,
    pub rate: f64,
    pub lexicon: Option<Arc<SynonymLexicon>>,
    pub translator: Option<Arc<dyn Translator>>,
    pub languages: LanguagePair,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            kind: AugmenterKind::None,
            rate: DEFAULT_RATE,
            lexicon: None,
            translator: None,
            languages: LanguagePair::default(),
        }
    }
}

impl fmt::Debug for AugmentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AugmentConfig")
            .field("kind", &self.kind)
            .field("rate", &self.rate)
            .field("lexicon_entries", &self.lexicon.as_ref().map(|l| l.len()))
            .field(
                "translator",
                &self.translator.as_ref().map(|t| t.name().to_string()),
            )
            .field("languages", &self.languages)
            .finish()
    }
}

impl AugmentConfig {
    pub fn new(kind: AugmenterKind) -> Self {
        AugmentConfig {
            kind,
            ..AugmentConfig::default()
        }
    }

    pub fn with_lexicon(mut self, lexicon: SynonymLexicon) -> Self {
        self.lexicon = Some(Arc::new(lexicon));
        self
    }

    pub fn with_translator(mut self, translator: Arc<dyn Translator>) -> Self {
        self.translator = Some(translator);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::InvalidConfig(format!(
                "augmentation rate {} outside [0, 1]",
                self.rate
            )));
        }
        match self.kind {
            AugmenterKind::Synonym if self.lexicon.is_none() => Err(Error::InvalidConfig(
                "synonym augmentation needs a lexicon".into(),
            )),
            AugmenterKind::Backtranslation if self.translator.is_none() => Err(
                Error::InvalidConfig("backtranslation needs a translator".into()),
            ),
            _ => Ok(()),
        }
    }
}

/// Number of edits for a sequence of `len` tokens: `max(1, floor(rate * len))`,
/// or 0 when the rate is 0.
pub fn edit_count(rate: f64, len: usize) -> usize {
    if rate <= 0.0 || len == 0 {
        return 0;
    }
    ((rate * len as f64).floor() as usize).max(1)
}

/// Swaps `edit_count` adjacent pairs at distinct, uniformly sampled
/// positions, applied in sampled order. At most `len - 1` swaps.
pub fn word_swap<S: Clone>(tokens: &[S], rate: f64, rng: &mut seed::Rng) -> Vec<S> {
    let mut out = tokens.to_vec();
    if out.len() < 2 {
        return out;
    }
    let k = edit_count(rate, out.len()).min(out.len() - 1);
    for i in index::sample(rng, out.len() - 1, k).into_iter() {
        out.swap(i, i + 1);
    }
    out
}

/// Replaces up to `edit_count` lexicon-covered tokens with a uniformly chosen
/// synonym. Lookup is case-insensitive.
pub fn synonym_substitute(
    tokens: &[String],
    rate: f64,
    lexicon: &SynonymLexicon,
    rng: &mut seed::Rng,
) -> Vec<String> {
    let mut out = tokens.to_vec();
    let eligible: Vec<usize> = (0..tokens.len())
        .filter(|&i| lexicon.synonyms(&tokens[i].to_lowercase()).is_some())
        .collect();
    let k = edit_count(rate, tokens.len()).min(eligible.len());
    for j in index::sample(rng, eligible.len(), k).into_iter() {
        let pos = eligible[j];
        let syns = lexicon
            .synonyms(&tokens[pos].to_lowercase())
            .expect("eligible");
        out[pos] = syns[rng.gen_range(0..syns.len())].clone();
    }
    out
}

fn split_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Augments each text independently. The per-text seed is derived from
/// `seed` and the text's key so results do not depend on batch order.
pub fn augment_texts(
    keyed: &[(&str, &str)],
    config: &AugmentConfig,
    seed: u64,
    exec: Execution,
) -> Result<Vec<String>> {
    config.validate()?;
    let per_doc = |f: &(dyn Fn(&[String], &mut seed::Rng) -> Vec<String> + Sync)| {
        exec.map(keyed, |(key, text)| {
            let mut rng = seed::rng(seed::derive_str(seed, key));
            f(&split_tokens(text), &mut rng).join(" ")
        })
    };
    Ok(match config.kind {
        AugmenterKind::None => keyed.iter().map(|(_, t)| t.to_string()).collect(),
        AugmenterKind::WordSwap => per_doc(&|toks, rng| word_swap(toks, config.rate, rng)),
        AugmenterKind::Synonym => {
            let lex = config.lexicon.as_deref().expect("validated");
            per_doc(&|toks, rng| synonym_substitute(toks, config.rate, lex, rng))
        }
        AugmenterKind::Backtranslation => {
            let texts: Vec<String> = keyed.iter().map(|(_, t)| t.to_string()).collect();
            backtranslate(
                &texts,
                config.translator.as_deref().expect("validated"),
                &config.languages,
            )?
        }
    })
}

/// Augmented copies of `docs`, index-aligned, with ids `<id>#<tag>`.
pub fn augment_documents(
    docs: &[Document],
    config: &AugmentConfig,
    seed: u64,
    exec: Execution,
) -> Result<Vec<Document>> {
    let keyed: Vec<(&str, &str)> = docs
        .iter()
        .map(|d| (d.id.as_str(), d.text.as_str()))
        .collect();
    let texts = augment_texts(&keyed, config, seed, exec)?;
    let tag = config.kind.tag();
    Ok(docs
        .iter()
        .zip(texts)
        .map(|(d, text)| Document {
            id: format!("{}#{tag}", d.id),
            text,
            source: d.source.clone(),
        })
        .collect())
}

/// Doubles a weak set: the originals followed by one augmented copy each,
/// in the same order. Copy ids are `<id>#<tag>`. With no augmenter the set
/// is returned unchanged.
pub fn augment_weak_set(
    weak: &[LabeledExample],
    config: &AugmentConfig,
    seed: u64,
    exec: Execution,
) -> Result<Vec<LabeledExample>> {
    if let Some(bad) = weak.iter().find(|e| e.provenance != Provenance::Weak) {
        return Err(Error::InvalidConfig(format!(
            "only weak examples can be augmented, {} is {:?}",
            bad.id(),
            bad.provenance
        )));
    }
    if config.kind == AugmenterKind::None {
        return Ok(weak.to_vec());
    }
    let keyed: Vec<(&str, &str)> = weak.iter().map(|e| (e.id(), e.text())).collect();
    let texts = augment_texts(&keyed, config, seed, exec)?;
    let tag = config.kind.tag();
    let mut out = Vec::with_capacity(weak.len() * 2);
    out.extend_from_slice(weak);
    out.extend(
        weak.iter()
            .zip(texts)
            .map(|(e, t)| LabeledExample::augmented_from(e, format!("{}#{tag}", e.id()), t)),
    );
    Ok(out)
}
