//! Seeded keyword corpus for desk-scale experiments.
//!
//! Each class owns a small keyword list drawn with Zipf-like frequencies, so
//! a few keywords are common and the rest are rare enough to be missing from
//! a small labelled sample. Documents mix keywords with a shared noise
//! vocabulary; some keywords leak into the other class and some labels are
//! flipped.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{DatasetBundle, Document, Label, LabeledExample};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub unlabelled: usize,
    pub keywords_per_class: usize,
    pub noise_vocab: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability that a token is a keyword rather than noise.
    pub keyword_rate: f64,
    /// Probability that a keyword comes from the other class.
    pub ambiguity: f64,
    pub label_noise: f64,
    pub offensive_fraction: f64,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            train: 100,
            dev: 0,
            test: 400,
            unlabelled: 5000,
            keywords_per_class: 10,
            noise_vocab: 500,
            min_len: 8,
            max_len: 16,
            keyword_rate: 0.2,
            ambiguity: 0.1,
            label_noise: 0.05,
            offensive_fraction: 0.5,
            zipf_exponent: 1.0,
            seed: 0,
        }
    }
}

pub fn keyword(label: Label, rank: usize) -> String {
    match label {
        Label::NotOffensive => format!("calm{rank:02}"),
        Label::Offensive => format!("rude{rank:02}"),
    }
}

pub fn noise_word(rank: usize) -> String {
    format!("w{rank:03}")
}

fn zipf(n: usize, s: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|r| (r as f64).powf(-s))).expect("non-empty vocabulary")
}

struct Sampler<'a> {
    spec: &'a SyntheticSpec,
    keywords: WeightedIndex<f64>,
    noise: WeightedIndex<f64>,
}

impl Sampler<'_> {
    fn example(&self, rng: &mut seed::Rng, id: String) -> LabeledExample {
        let spec = self.spec;
        let label = if rng.gen_bool(spec.offensive_fraction) {
            Label::Offensive
        } else {
            Label::NotOffensive
        };
        let len = rng.gen_range(spec.min_len..=spec.max_len);
        let tokens: Vec<String> = (0..len)
            .map(|_| {
                if rng.gen_bool(spec.keyword_rate) {
                    let from = if rng.gen_bool(spec.ambiguity) {
                        label.flipped()
                    } else {
                        label
                    };
                    keyword(from, self.keywords.sample(rng))
                } else {
                    noise_word(self.noise.sample(rng))
                }
            })
            .collect();
        let label = if rng.gen_bool(spec.label_noise) {
            label.flipped()
        } else {
            label
        };
        LabeledExample::human(
            Document {
                id,
                text: tokens.join(" "),
                source: "synthetic".into(),
            },
            label,
        )
    }
}

/// Generates train/dev/test with gold labels and an unlabelled pool. Each
/// split draws from its own seeded stream, so changing one split's size
/// leaves the others unchanged.
pub fn generate(spec: &SyntheticSpec) -> DatasetBundle {
    let sampler = Sampler {
        spec,
        keywords: zipf(spec.keywords_per_class, spec.zipf_exponent),
        noise: zipf(spec.noise_vocab, spec.zipf_exponent),
    };
    let split = |name: &str, n: usize| -> Vec<LabeledExample> {
        let mut rng = seed::rng(seed::derive_str(spec.seed, name));
        (0..n)
            .map(|i| sampler.example(&mut rng, format!("{name}-{i:05}")))
            .collect()
    };
    let dev = split("dev", spec.dev);
    DatasetBundle {
        train: split("train", spec.train),
        dev: (!dev.is_empty()).then_some(dev),
        test: split("test", spec.test),
        unlabelled: split("unlabelled", spec.unlabelled)
            .into_iter()
            .map(|e| e.doc)
            .collect(),
    }
}
