//! Acceptance suite. Each criterion runs against an independent oracle at
//! its stated tolerance and time budget, and prints one PASS/FAIL line.
//!
//! Real-data ingestion checks are opt-in: set `SELFTRAIN_OLID_TRAIN`,
//! `SELFTRAIN_OLID_TEST` (merged TSV with a `subtask_a` column) or
//! `SELFTRAIN_CONVABUSE_DEV` (JSON Lines with `turns` and `votes`).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Deserialize;

use selftrain_core::analysis::{label_shift, vocabulary_growth, ShiftScope};
use selftrain_core::augment::{
    augment_weak_set, backtranslate, edit_count, synonym_substitute, word_swap, AugmentConfig,
    AugmenterKind, IdentityTranslator, LanguagePair, SynonymLexicon,
};
use selftrain_core::classifier::{
    combined_loss, LinearBackend, LinearModel, LossBatch, Model, ProbabilityDistribution,
    TrainConfig,
};
use selftrain_core::corpus::{load_dataset, Schema, Split, SplitSpec};
use selftrain_core::features::{FeatureSpace, FeatureVector};
use selftrain_core::metrics::{f1_macro, f1_macro_of, ConfusionMatrix};
use selftrain_core::selftrain::{
    balance_downsample, confidence_filter, infer_weak_labels, run_experiment_suite,
    run_self_training, SelfTrainConfig,
};
use selftrain_core::synthetic::{generate, SyntheticSpec};
use selftrain_core::{seed, Document, Execution, Label, LabeledExample, Provenance};

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn label_of(rng: &mut seed::Rng) -> Label {
    if rng.gen_bool(0.5) {
        Label::Offensive
    } else {
        Label::NotOffensive
    }
}

fn doc(id: String, text: String) -> Document {
    Document {
        id,
        text,
        source: String::new(),
    }
}

// ---------------------------------------------------------------------------
// combined loss

fn random_vector(rng: &mut seed::Rng, dim: u32) -> FeatureVector {
    let nnz = rng.gen_range(1..=dim.min(8));
    FeatureVector::from_raw(
        (0..nnz)
            .map(|_| (rng.gen_range(0..dim), rng.gen_range(0.1..2.0)))
            .collect(),
    )
}

struct Instance {
    model: LinearModel,
    labelled: Vec<(FeatureVector, Label)>,
    inferred: Vec<(FeatureVector, Label)>,
}

impl Instance {
    fn random(rng: &mut seed::Rng, n: usize, m: usize) -> Self {
        let space = FeatureSpace::new(1024, &[1], 0).unwrap();
        let dim = rng.gen_range(1..=64u32);
        let mut weights = vec![0.0; 2 * space.dimension()];
        for c in 0..2 {
            for i in 0..dim as usize {
                weights[c * space.dimension() + i] = rng.gen_range(-2.0..2.0);
            }
        }
        let bias = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let mut side = |k: usize| {
            (0..k)
                .map(|_| (random_vector(rng, dim), label_of(rng)))
                .collect::<Vec<_>>()
        };
        let labelled = side(n);
        let inferred = side(m);
        Instance {
            model: LinearModel::from_parts(space, weights, bias).unwrap(),
            labelled,
            inferred,
        }
    }

    fn batch(&self) -> LossBatch<'_> {
        LossBatch {
            labelled: self.labelled.iter().map(|(x, l)| (x, *l)).collect(),
            inferred: self.inferred.iter().map(|(x, l)| (x, *l)).collect(),
        }
    }
}

/// Mean softmax cross-entropy of one side, from dense logits via log-sum-exp.
fn oracle_side(w: &[f64], d: usize, b: [f64; 2], side: &[(FeatureVector, Label)]) -> f64 {
    if side.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for (x, y) in side {
        let mut z = b;
        for &(i, v) in x.entries() {
            z[0] += w[i as usize] * v;
            z[1] += w[d + i as usize] * v;
        }
        let hi = z[0].max(z[1]);
        let lse = hi + ((z[0] - hi).exp() + (z[1] - hi).exp()).ln();
        total += lse - z[*y as usize];
    }
    total / side.len() as f64
}

fn oracle_loss(inst: &Instance) -> f64 {
    let m = &inst.model;
    let d = m.feature_space().dimension();
    oracle_side(m.weights(), d, m.bias(), &inst.labelled)
        + oracle_side(m.weights(), d, m.bias(), &inst.inferred)
}

fn eq1_oracle() -> Check {
    let mut rng = seed::rng(11);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let (n, m) = match k {
            0 => (0, rng.gen_range(1..=16)),
            1 => (rng.gen_range(1..=16), 0),
            2 => (0, 0),
            _ => (rng.gen_range(0..=16), rng.gen_range(0..=16)),
        };
        let inst = Instance::random(&mut rng, n, m);
        let got = inst.model.loss(&inst.batch());
        let want = oracle_loss(&inst);
        // the probability-level entry point on the same instance
        let probs = |s: &[(FeatureVector, Label)]| -> Vec<(ProbabilityDistribution, Label)> {
            s.iter()
                .map(|(x, l)| (inst.model.proba_features(x), *l))
                .collect()
        };
        let direct = combined_loss(&probs(&inst.labelled), &probs(&inst.inferred));
        let err = (got - want).abs().max((direct - want).abs());
        worst = worst.max(err);
        ensure(err <= 1e-9, || {
            format!("instance {k} (n={n}, m={m}): {got} vs oracle {want}")
        })?;
    }
    Ok(format!("1000 instances, max |diff| {worst:.2e}"))
}

fn gradient_check() -> Check {
    const H: f64 = 1e-5;
    let mut rng = seed::rng(12);
    let mut worst: f64 = 0.0;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-4);
    for k in 0..100 {
        let n = rng.gen_range(0..=8);
        let m = rng.gen_range(if n == 0 { 1 } else { 0 }..=8);
        let mut inst = Instance::random(&mut rng, n, m);
        let (_, grad) = inst.model.loss_and_gradient(&inst.batch());
        let d = inst.model.feature_space().dimension();
        let touched: BTreeSet<u32> = inst
            .labelled
            .iter()
            .chain(&inst.inferred)
            .flat_map(|(x, _)| x.entries().iter().map(|e| e.0))
            .collect();
        for &i in &touched {
            for c in 0..2 {
                let slot = c * d + i as usize;
                let orig = inst.model.weights()[slot];
                inst.model.weights_mut()[slot] = orig + H;
                let up = inst.model.loss(&inst.batch());
                inst.model.weights_mut()[slot] = orig - H;
                let down = inst.model.loss(&inst.batch());
                inst.model.weights_mut()[slot] = orig;
                let numeric = (up - down) / (2.0 * H);
                let e = rel(grad.weight(i, c), numeric);
                worst = worst.max(e);
                ensure(e <= 1e-5, || {
                    format!(
                        "instance {k} w[{c}][{i}]: analytic {} numeric {numeric}",
                        grad.weight(i, c)
                    )
                })?;
            }
        }
        for c in 0..2 {
            let shifted = |delta: f64| {
                let mut b = inst.model.bias();
                b[c] += delta;
                let m = LinearModel::from_parts(
                    inst.model.feature_space().clone(),
                    inst.model.weights().to_vec(),
                    b,
                )
                .unwrap();
                m.loss(&inst.batch())
            };
            let numeric = (shifted(H) - shifted(-H)) / (2.0 * H);
            let e = rel(grad.bias[c], numeric);
            worst = worst.max(e);
            ensure(e <= 1e-5, || {
                format!("instance {k} bias[{c}]: {} vs {numeric}", grad.bias[c])
            })?;
        }
    }
    Ok(format!("100 instances, max relative error {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// loop invariants

struct RandomModel(u64);

impl Model for RandomModel {
    fn predict_proba(
        &self,
        docs: &[Document],
    ) -> selftrain_core::Result<Vec<ProbabilityDistribution>> {
        Ok(docs
            .iter()
            .map(|d| {
                let p: f64 = seed::rng(seed::derive_str(self.0, &d.id)).gen();
                ProbabilityDistribution([1.0 - p, p])
            })
            .collect())
    }
}

fn lexicon() -> SynonymLexicon {
    SynonymLexicon::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/lexicon.tsv")).unwrap()
}

fn augment_configs() -> Vec<AugmentConfig> {
    vec![
        AugmentConfig::default(),
        AugmentConfig::new(AugmenterKind::WordSwap),
        AugmentConfig::new(AugmenterKind::Synonym).with_lexicon(lexicon()),
        AugmentConfig::new(AugmenterKind::Backtranslation)
            .with_translator(Arc::new(IdentityTranslator)),
    ]
}

fn loop_invariants() -> Check {
    let mut rng = seed::rng(13);
    let configs = augment_configs();
    let words: Vec<&str> = "good bad people hate love game city team stupid nice"
        .split(' ')
        .collect();
    let mut pools = 0;
    for k in 0..200u64 {
        let size = rng.gen_range(0..300);
        let docs: Vec<Document> = (0..size)
            .map(|i| {
                let len = rng.gen_range(1..12);
                let text: Vec<&str> = (0..len).map(|_| *words.choose(&mut rng).unwrap()).collect();
                doc(format!("p{k}-{i}"), text.join(" "))
            })
            .collect();
        let threshold = rng.gen_range(0.5000001..=1.0);
        let weak = infer_weak_labels(&RandomModel(k), &docs).map_err(|e| e.to_string())?;
        ensure(weak.len() == docs.len(), || {
            "one weak example per document".into()
        })?;
        let filtered = confidence_filter(&weak, threshold);
        ensure(filtered.iter().all(|e| e.confidence >= threshold), || {
            format!("pool {k}: confidence below threshold")
        })?;
        let expected = weak.iter().filter(|e| e.confidence >= threshold).count();
        ensure(filtered.len() == expected, || {
            format!("pool {k}: filter dropped a qualifying example")
        })?;
        let balanced = balance_downsample(&filtered, k);
        let c = balanced.counts;
        ensure(c.not_offensive == c.offensive, || {
            format!("pool {k}: unbalanced {c:?}")
        })?;
        let min = filtered
            .iter()
            .filter(|e| e.label == Label::Offensive)
            .count();
        let min = min.min(filtered.len() - min);
        ensure(c.offensive == min, || {
            format!("pool {k}: kept {} per class, expected {min}", c.offensive)
        })?;
        for cfg in &configs {
            let out = augment_weak_set(&balanced.examples, cfg, k, Execution::default())
                .map_err(|e| e.to_string())?;
            let factor = if cfg.kind == AugmenterKind::None {
                1
            } else {
                2
            };
            ensure(out.len() == factor * balanced.examples.len(), || {
                format!(
                    "pool {k} {}: size {} vs {}",
                    cfg.kind,
                    out.len(),
                    balanced.examples.len()
                )
            })?;
            let origin: BTreeMap<&str, &LabeledExample> =
                balanced.examples.iter().map(|e| (e.id(), e)).collect();
            for copy in out.iter().filter(|e| e.provenance == Provenance::Augmented) {
                let o = origin[copy.origin_id.as_deref().unwrap()];
                ensure(
                    copy.label == o.label && copy.confidence == o.confidence,
                    || format!("pool {k}: copy {} changed label", copy.id()),
                )?;
            }
        }
        pools += 1;
    }

    // end-to-end records on a small synthetic corpus
    let bundle = generate(&SyntheticSpec {
        train: 60,
        test: 60,
        unlabelled: 400,
        ..SyntheticSpec::default()
    });
    let backend = LinearBackend::new(FeatureSpace::new(1 << 12, &[1, 2], 0).unwrap());
    for cfg in augment_configs() {
        let config = SelfTrainConfig {
            generations: 3,
            augment: cfg,
            train: TrainConfig {
                epochs: 4,
                ..TrainConfig::default()
            },
            ..SelfTrainConfig::default()
        };
        let recs = run_self_training(&backend, &bundle, &config, Execution::default())
            .map_err(|e| e.to_string())?;
        ensure(recs.len() == 3, || "record count".into())?;
        for r in &recs[1..] {
            let w = r.weak;
            let factor = if config.augment.kind == AugmenterKind::None {
                1
            } else {
                2
            };
            ensure(
                w.post_filter <= w.pre_filter
                    && w.post_balance <= w.post_filter
                    && w.post_augment == factor * w.post_balance,
                || format!("{}: sizes {w:?}", config.augment.kind),
            )?;
        }
    }
    Ok(format!(
        "{pools} random pools x 4 augmenters, 4 end-to-end runs"
    ))
}

// ---------------------------------------------------------------------------
// augmenters

fn inversions(p: &[usize]) -> usize {
    let mut n = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            n += usize::from(p[i] > p[j]);
        }
    }
    n
}

fn augmenter_properties() -> Check {
    const CASES: usize = 10_000;
    let mut rng = seed::rng(14);
    let vocab: Vec<String> = (0..12).map(|i| format!("t{i}")).collect();
    for case in 0..CASES {
        let len = rng.gen_range(2..=50);
        // distinct tokens expose the exact number of adjacent swaps
        let ids: Vec<usize> = (0..len).collect();
        let out = word_swap(&ids, 0.3, &mut seed::rng(case as u64));
        let k = ((0.3 * len as f64).floor() as usize).max(1);
        ensure(inversions(&out) == k, || {
            format!(
                "case {case}: len {len}, {} swaps, expected {k}",
                inversions(&out)
            )
        })?;
        // repeated tokens: multiset and length are kept
        let toks: Vec<String> = (0..len)
            .map(|_| vocab.choose(&mut rng).unwrap().clone())
            .collect();
        let out = word_swap(&toks, 0.3, &mut seed::rng(case as u64));
        let mut a = toks.clone();
        let mut b = out.clone();
        a.sort();
        b.sort();
        ensure(a == b, || format!("case {case}: multiset changed"))?;
    }

    let lex = lexicon();
    let covered: Vec<&str> = ["good", "bad", "stupid", "hate", "people", "friend"].to_vec();
    let uncovered: Vec<&str> = ["zebra", "quartz", "Qx", "the", "of", "w042"].to_vec();
    for case in 0..CASES {
        let len = rng.gen_range(1..=40);
        let toks: Vec<String> = (0..len)
            .map(|_| {
                let w = if rng.gen_bool(0.3) {
                    covered.choose(&mut rng)
                } else {
                    uncovered.choose(&mut rng)
                };
                w.unwrap().to_string()
            })
            .collect();
        let out = synonym_substitute(&toks, 0.3, &lex, &mut seed::rng(case as u64));
        ensure(out.len() == toks.len(), || {
            format!("case {case}: length changed")
        })?;
        let mut changed = 0;
        for (a, b) in toks.iter().zip(&out) {
            match lex.synonyms(&a.to_lowercase()) {
                None => ensure(a == b, || {
                    format!("case {case}: uncovered token {a} became {b}")
                })?,
                Some(syns) if a != b => {
                    changed += 1;
                    ensure(syns.contains(b), || {
                        format!("case {case}: {b} is not a synonym of {a}")
                    })?;
                }
                Some(_) => {}
            }
        }
        let eligible = toks
            .iter()
            .filter(|t| lex.synonyms(&t.to_lowercase()).is_some())
            .count();
        let k = edit_count(0.3, len).min(eligible);
        ensure(changed == k, || {
            format!("case {case}: {changed} substitutions, expected {k}")
        })?;
    }

    let texts: Vec<String> = (0..CASES)
        .map(|i| {
            if i % 97 == 0 {
                String::new()
            } else {
                let len = rng.gen_range(1..10);
                (0..len)
                    .map(|_| vocab.choose(&mut rng).unwrap().as_str())
                    .collect::<Vec<_>>()
                    .join(" ")
            }
        })
        .collect();
    let back = backtranslate(&texts, &IdentityTranslator, &LanguagePair::default())
        .map_err(|e| e.to_string())?;
    ensure(back == texts, || {
        "identity backtranslation changed text".into()
    })?;
    Ok(format!(
        "{CASES} cases each for word swap, synonym substitution, backtranslation"
    ))
}

// ---------------------------------------------------------------------------
// metrics

/// Per-class precision and recall from raw prediction lists.
fn brute_force_f1(preds: &[u8], golds: &[u8]) -> f64 {
    let mut total = 0.0;
    for class in 0..2u8 {
        let predicted = preds.iter().filter(|&&p| p == class).count() as f64;
        let actual = golds.iter().filter(|&&g| g == class).count() as f64;
        let hit = preds
            .iter()
            .zip(golds)
            .filter(|(p, g)| **p == class && **g == class)
            .count() as f64;
        let precision = if predicted > 0.0 {
            hit / predicted
        } else {
            0.0
        };
        let recall = if actual > 0.0 { hit / actual } else { 0.0 };
        total += if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }
    total / 2.0
}

fn metrics_oracle() -> Check {
    let mut rng = seed::rng(15);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let n = rng.gen_range(1..200);
        let bias = rng.gen_range(0.0..1.0);
        let golds: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(bias))).collect();
        let noise = rng.gen_range(0.0..1.0);
        let preds: Vec<u8> = golds
            .iter()
            .map(|&g| if rng.gen_bool(noise) { 1 - g } else { g })
            .collect();
        let to = |xs: &[u8]| {
            xs.iter()
                .map(|&x| Label::from_index(x as usize).unwrap())
                .collect::<Vec<_>>()
        };
        let got = f1_macro_of(&to(&preds), &to(&golds)).map_err(|e| e.to_string())?;
        let want = brute_force_f1(&preds, &golds);
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 1e-12, || {
            format!("case {k}: {got} vs {want}")
        })?;
    }
    let worked = f1_macro(&ConfusionMatrix {
        tp: 2,
        fp: 1,
        fn_: 1,
        tn: 6,
    })
    .unwrap();
    ensure((worked - 0.761905).abs() < 1e-6, || {
        format!("worked case gave {worked}")
    })?;
    Ok(format!(
        "1000 cases, max |diff| {worst:.2e}; worked case {worked:.6}"
    ))
}

// ---------------------------------------------------------------------------
// analysis

/// Offensive iff the text contains a listed slur-like keyword.
struct KeywordModel;

impl Model for KeywordModel {
    fn predict_proba(
        &self,
        docs: &[Document],
    ) -> selftrain_core::Result<Vec<ProbabilityDistribution>> {
        Ok(docs
            .iter()
            .map(|d| {
                let hits = d
                    .text
                    .split_whitespace()
                    .filter(|t| ["idiot", "trash", "vile"].contains(t))
                    .count();
                match hits {
                    0 => ProbabilityDistribution([0.85, 0.15]),
                    1 => ProbabilityDistribution([0.3, 0.7]),
                    _ => ProbabilityDistribution([0.05, 0.95]),
                }
            })
            .collect())
    }
}

fn oracle_vocab(docs: &[Document]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for d in docs {
        let mut cur = String::new();
        for ch in d.text.chars().chain(std::iter::once(' ')) {
            if ch.is_alphanumeric() {
                cur.extend(ch.to_lowercase());
            } else if !cur.is_empty() {
                out.insert(std::mem::take(&mut cur));
            }
        }
    }
    out
}

fn analysis_oracle() -> Check {
    // (clean, augmented); hand-labelled with the keyword model's argmax
    let fixture: [(&str, &str); 20] = [
        ("you are an idiot", "you are a fool"),           // O -> N
        ("what a lovely day", "what a lovely day"),       // N -> N
        ("this is trash", "this is rubbish"),             // O -> N
        ("nice game", "trash game"),                      // N -> O
        ("the team played well", "team the played well"), // N -> N
        ("vile and trash", "trash and vile"),             // O -> O (0.95)
        ("see you later", "see you later idiot"),         // N -> O
        ("good morning", "Good morning!"),                // N -> N
        ("idiot", "idiot idiot"),                         // O -> O (0.7 -> 0.95)
        ("a calm reply", "a vile reply"),                 // N -> O
        ("such trash talk", "such garbage talk"),         // O -> N
        ("hello", "hallo"),                               // N -> N
        ("no comment", "no comment trash"),               // N -> O
        ("vile people", "vile folks"),                    // O -> O
        ("quiet night", "silent night"),                  // N -> N
        ("the music was fine", "the music was vile"),     // N -> O
        ("what a vile take", "what a terrible take"),     // O -> N
        ("thanks a lot", "thanks a lot"),                 // N -> N
        ("idiot move", "idiotic move"),                   // O -> N
        ("fair point", "fair point"),                     // N -> N
    ];
    let clean: Vec<Document> = fixture
        .iter()
        .enumerate()
        .map(|(i, (c, _))| doc(format!("a{i}"), c.to_string()))
        .collect();
    let aug: Vec<Document> = fixture
        .iter()
        .enumerate()
        .map(|(i, (_, a))| doc(format!("a{i}#x"), a.to_string()))
        .collect();

    let (r, pairs) = label_shift(
        &KeywordModel,
        &clean,
        &aug,
        AugmenterKind::Synonym,
        ShiftScope::FullPool,
    )
    .map_err(|e| e.to_string())?;
    // shifted: 0, 2, 3, 6, 9, 10, 12, 15, 16, 18 -> 5 positive, 5 negative
    let expect_ids = [
        "a0", "a2", "a3", "a6", "a9", "a10", "a12", "a15", "a16", "a18",
    ];
    let got_ids: Vec<&str> = pairs.iter().map(|p| p.id.as_str()).collect();
    ensure(got_ids == expect_ids, || format!("shifted ids {got_ids:?}"))?;
    ensure(
        (r.n_examples, r.n_shifted, r.n_pos_shift, r.n_neg_shift) == (20, 10, 5, 5),
        || format!("{r:?}"),
    )?;
    ensure(
        (
            r.total_shift_pct,
            r.positive_shift_pct,
            r.negative_shift_pct,
        ) == (50.0, 50.0, 50.0),
        || format!("{r:?}"),
    )?;

    // confident scope: clean predictions at 0.85 (N) and 0.95 (O) only
    let (rc, _) = label_shift(
        &KeywordModel,
        &clean,
        &aug,
        AugmenterKind::Synonym,
        ShiftScope::Confident(0.8),
    )
    .map_err(|e| e.to_string())?;
    // in scope: 12 clean N examples + "vile and trash"; shifted: 3, 6, 9, 12, 15
    ensure(
        (rc.n_examples, rc.n_shifted, rc.n_pos_shift, rc.n_neg_shift) == (13, 5, 5, 0),
        || format!("{rc:?}"),
    )?;
    ensure(
        rc.positive_shift_pct + rc.negative_shift_pct == 100.0,
        || "shares do not sum to 100".into(),
    )?;

    // uneven split exercises the exact-sum rule
    let (ru, _) = label_shift(
        &KeywordModel,
        &clean[..4],
        &aug[..4],
        AugmenterKind::Synonym,
        ShiftScope::FullPool,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        ru.n_shifted == 3 && ru.positive_shift_pct + ru.negative_shift_pct == 100.0,
        || format!("{ru:?}"),
    )?;

    let v = vocabulary_growth(&clean, &aug, AugmenterKind::Synonym).map_err(|e| e.to_string())?;
    let base = oracle_vocab(&clean);
    let combined: BTreeSet<String> = base.union(&oracle_vocab(&aug)).cloned().collect();
    let want = 100.0 * (combined.len() - base.len()) as f64 / base.len() as f64;
    ensure(
        v.base_vocab_size == base.len()
            && v.combined_vocab_size == combined.len()
            && v.growth_pct == want,
        || format!("{v:?} vs base {} combined {}", base.len(), combined.len()),
    )?;
    let swapped: Vec<Document> = clean
        .iter()
        .map(|d| {
            let mut t: Vec<&str> = d.text.split(' ').collect();
            t.reverse();
            doc(d.id.clone(), t.join(" "))
        })
        .collect();
    let vs =
        vocabulary_growth(&clean, &swapped, AugmenterKind::WordSwap).map_err(|e| e.to_string())?;
    ensure(vs.growth_pct == 0.0, || {
        "reordering grew the vocabulary".into()
    })?;
    Ok(format!(
        "20-example oracle: total {:.1}%, positive {:.1}%, negative {:.1}%; vocabulary +{:.2}%",
        r.total_shift_pct, r.positive_shift_pct, r.negative_shift_pct, v.growth_pct
    ))
}

// ---------------------------------------------------------------------------
// ingestion

#[derive(Deserialize)]
struct FixtureSpec {
    file: String,
    schema: String,
    split: String,
    rows_read: usize,
    rows_dropped: usize,
    not_offensive: usize,
    offensive: usize,
}

fn schema_named(name: &str) -> Schema {
    match name {
        "olid" => Schema::olid(),
        "convabuse" => Schema::convabuse(),
        other => panic!("unknown schema {other}"),
    }
}

fn check_counts(
    path: &Path,
    schema: &Schema,
    split: Split,
    counts: (usize, usize),
) -> std::result::Result<(), String> {
    let (_, stats) =
        load_dataset(path, schema, SplitSpec::Fixed(split)).map_err(|e| e.to_string())?;
    let c = stats.counts(split);
    ensure((c.not_offensive, c.offensive) == counts, || {
        format!(
            "{}: counts {:?} expected {counts:?}",
            path.display(),
            (c.not_offensive, c.offensive)
        )
    })?;
    ensure(
        stats.rows_read == stats.rows_kept + stats.rows_dropped,
        || "row accounting".into(),
    )
}

fn ingestion_counts() -> Check {
    let specs: Vec<FixtureSpec> =
        serde_json::from_str(&std::fs::read_to_string(data_dir().join("fixtures.json")).unwrap())
            .unwrap();
    for s in &specs {
        let split = Split::parse(&s.split).unwrap();
        let path = data_dir().join(&s.file);
        let (_, stats) = load_dataset(&path, &schema_named(&s.schema), SplitSpec::Fixed(split))
            .map_err(|e| e.to_string())?;
        let c = stats.counts(split);
        ensure(
            (
                stats.rows_read,
                stats.rows_dropped,
                c.not_offensive,
                c.offensive,
            ) == (s.rows_read, s.rows_dropped, s.not_offensive, s.offensive),
            || format!("{}: {stats:?}", s.file),
        )?;
        ensure(
            stats.rows_kept == c.total() && stats.rows_read == stats.rows_kept + stats.rows_dropped,
            || format!("{}: row accounting", s.file),
        )?;
    }
    let mut real = Vec::new();
    for (var, schema, split, counts) in [
        (
            "SELFTRAIN_OLID_TRAIN",
            Schema::olid(),
            Split::Train,
            (8840, 4400),
        ),
        (
            "SELFTRAIN_OLID_TEST",
            Schema::olid(),
            Split::Test,
            (620, 240),
        ),
        (
            "SELFTRAIN_CONVABUSE_DEV",
            Schema::convabuse(),
            Split::Dev,
            (719, 112),
        ),
    ] {
        if let Ok(p) = std::env::var(var) {
            check_counts(Path::new(&p), &schema, split, counts)?;
            real.push(var);
        }
    }
    let real = if real.is_empty() {
        "real data not supplied".to_string()
    } else {
        real.join(", ")
    };
    Ok(format!("{} fixtures; {real}", specs.len()))
}

// ---------------------------------------------------------------------------
// synthetic experiment and determinism

fn calibrated_margin() -> f64 {
    let doc: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(data_dir().join("calibration.json")).unwrap(),
    )
    .unwrap();
    doc["margin"].as_f64().expect("margin")
}

fn directional_synthetic() -> Check {
    let bundle = generate(&SyntheticSpec::default());
    let backend = LinearBackend::new(FeatureSpace::default());
    let report = run_experiment_suite(
        &backend,
        &bundle,
        &[SelfTrainConfig::default()],
        &[0, 1, 2],
        Execution::default(),
    )
    .map_err(|e| e.to_string())?;
    let (df, st) = (&report.columns[0], &report.columns[1]);
    let margin = calibrated_margin();
    ensure(st.mean >= df.mean + margin, || {
        format!("ST {:.4} < DF {:.4} + margin {margin}", st.mean, df.mean)
    })?;
    let gen4_vs_gen1 = st
        .runs
        .iter()
        .map(|r| r.generations[3].test_f1_macro.unwrap() - r.generations[0].test_f1_macro.unwrap())
        .sum::<f64>()
        / 3.0;
    Ok(format!(
        "DF {} vs ST {} (F1 %), margin {margin}, mean gen4-gen1 {:+.4}",
        df.summary().display_pct(),
        st.summary().display_pct(),
        gen4_vs_gen1
    ))
}

fn determinism() -> Check {
    let bundle = generate(&SyntheticSpec::default());
    let backend = LinearBackend::new(FeatureSpace::default());
    let config = SelfTrainConfig {
        augment: AugmentConfig::new(AugmenterKind::WordSwap),
        ..SelfTrainConfig::default()
    };
    let run = |exec| -> std::result::Result<String, String> {
        let report =
            run_experiment_suite(&backend, &bundle, std::slice::from_ref(&config), &[5], exec)
                .map_err(|e| e.to_string())?;
        serde_json::to_string(&report.columns).map_err(|e| e.to_string())
    };
    let a = run(Execution::default())?;
    let b = run(Execution::default())?;
    let c = run(Execution::Sequential)?;
    ensure(a == b && a == c, || {
        "metrics JSON differs between repeated runs".into()
    })?;
    Ok(format!("{} bytes identical across 3 runs", a.len()))
}

// ---------------------------------------------------------------------------

/// Name, time budget and check of one criterion.
type Criterion = (&'static str, Duration, fn() -> Check);

fn main() {
    let criteria: [Criterion; 9] = [
        ("combined loss oracle", Duration::from_secs(5), eq1_oracle),
        ("gradient check", Duration::from_secs(30), gradient_check),
        ("loop invariants", Duration::from_secs(10), loop_invariants),
        (
            "augmenter properties",
            Duration::from_secs(30),
            augmenter_properties,
        ),
        ("metrics oracle", Duration::from_secs(5), metrics_oracle),
        ("analysis oracle", Duration::from_secs(5), analysis_oracle),
        ("ingestion counts", Duration::from_secs(5), ingestion_counts),
        (
            "directional synthetic experiment",
            Duration::from_secs(120),
            directional_synthetic,
        ),
        ("determinism", Duration::from_secs(60), determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, budget, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed <= budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; over time budget {budget:?}"))
            }
        });
        match outcome {
            Ok(detail) => println!("PASS  {name:<34} {elapsed:>9.2?}  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name:<34} {elapsed:>9.2?}  {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
