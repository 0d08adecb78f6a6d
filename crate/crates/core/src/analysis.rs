//! Augmentation audits: how often an augmenter flips a classifier's
//! prediction, and how many new tokens it introduces.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmenterKind;
use crate::classifier::Model;
use crate::corpus::{Document, Label};
use crate::features::build_vocabulary;
use crate::{Error, Result};

/// Which clean examples take part in the shift audit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scope", content = "threshold")]
pub enum ShiftScope {
    /// Every document in the pool.
    #[default]
    FullPool,
    /// Only documents whose clean prediction reaches the confidence threshold.
    Confident(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub method: AugmenterKind,
    pub total_shift_pct: f64,
    /// Share of shifted examples that went from not offensive to offensive.
    pub positive_shift_pct: f64,
    pub negative_shift_pct: f64,
    pub n_examples: usize,
    pub n_shifted: usize,
    pub n_pos_shift: usize,
    pub n_neg_shift: usize,
}

impl ShiftReport {
    pub fn from_counts(
        method: AugmenterKind,
        n_examples: usize,
        n_pos_shift: usize,
        n_neg_shift: usize,
    ) -> Self {
        let n_shifted = n_pos_shift + n_neg_shift;
        let (positive_shift_pct, negative_shift_pct) = shares(n_pos_shift, n_neg_shift);
        ShiftReport {
            method,
            total_shift_pct: if n_examples == 0 {
                0.0
            } else {
                100.0 * n_shifted as f64 / n_examples as f64
            },
            positive_shift_pct,
            negative_shift_pct,
            n_examples,
            n_shifted,
            n_pos_shift,
            n_neg_shift,
        }
    }
}

/// Percentages of `a` and `b` in `a + b` that sum to exactly 100. The larger
/// share is divided out and the smaller obtained by a subtraction that is
/// exact in floating point.
fn shares(a: usize, b: usize) -> (f64, f64) {
    let n = a + b;
    if n == 0 {
        return (0.0, 0.0);
    }
    let pct = |k: usize| 100.0 * k as f64 / n as f64;
    if a >= b {
        let pa = pct(a);
        (pa, 100.0 - pa)
    } else {
        let pb = pct(b);
        (100.0 - pb, pb)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftedPair {
    pub id: String,
    pub clean_text: String,
    pub augmented_text: String,
    pub clean_label: Label,
    pub augmented_label: Label,
    pub method: AugmenterKind,
}

/// Predicts clean and augmented documents and counts label changes.
pub fn label_shift<M: Model + ?Sized>(
    model: &M,
    docs: &[Document],
    augmented: &[Document],
    method: AugmenterKind,
    scope: ShiftScope,
) -> Result<(ShiftReport, Vec<ShiftedPair>)> {
    if docs.len() != augmented.len() {
        return Err(Error::LengthMismatch {
            left: docs.len(),
            right: augmented.len(),
        });
    }
    let clean = model.predict_proba(docs)?;
    let noisy = model.predict_proba(augmented)?;
    let (mut n, mut pos, mut neg) = (0, 0, 0);
    let mut pairs = Vec::new();
    for i in 0..docs.len() {
        if let ShiftScope::Confident(t) = scope {
            if clean[i].confidence() < t {
                continue;
            }
        }
        n += 1;
        let (a, b) = (clean[i].argmax(), noisy[i].argmax());
        if a == b {
            continue;
        }
        match b {
            Label::Offensive => pos += 1,
            Label::NotOffensive => neg += 1,
        }
        pairs.push(ShiftedPair {
            id: docs[i].id.clone(),
            clean_text: docs[i].text.clone(),
            augmented_text: augmented[i].text.clone(),
            clean_label: a,
            augmented_label: b,
            method,
        });
    }
    Ok((ShiftReport::from_counts(method, n, pos, neg), pairs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VocabGrowthReport {
    pub method: AugmenterKind,
    pub base_vocab_size: usize,
    pub combined_vocab_size: usize,
    pub growth_pct: f64,
}

/// Relative growth of the token vocabulary when augmented text is added.
pub fn vocabulary_growth(
    clean: &[Document],
    augmented: &[Document],
    method: AugmenterKind,
) -> Result<VocabGrowthReport> {
    let base = build_vocabulary(clean);
    if base.size() == 0 {
        return Err(Error::EmptyInput("clean corpus vocabulary"));
    }
    let mut combined = base.clone();
    for d in augmented {
        combined.add_text(&d.text);
    }
    let (b, c) = (base.size(), combined.size());
    Ok(VocabGrowthReport {
        method,
        base_vocab_size: b,
        combined_vocab_size: c,
        growth_pct: 100.0 * (c - b) as f64 / b as f64,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub shift: Vec<ShiftReport>,
    pub vocabulary: Vec<VocabGrowthReport>,
}

/// Report order: backtranslation, synonym, word swap, then none.
fn method_rank(kind: AugmenterKind) -> u8 {
    match kind {
        AugmenterKind::Backtranslation => 0,
        AugmenterKind::Synonym => 1,
        AugmenterKind::WordSwap => 2,
        AugmenterKind::None => 3,
    }
}

impl AnalysisReport {
    pub fn sorted(mut self) -> Self {
        self.shift.sort_by_key(|r| method_rank(r.method));
        self.vocabulary.sort_by_key(|r| method_rank(r.method));
        self
    }

    /// Human-readable table, one row per method, one decimal.
    pub fn to_table(&self) -> String {
        let report = self.clone().sorted();
        let mut out = format!(
            "{:<16}{:>8}{:>10}{:>10}{:>12}\n",
            "method", "total", "positive", "negative", "vocab_growth"
        );
        let mut methods: Vec<AugmenterKind> = report.shift.iter().map(|r| r.method).collect();
        for v in &report.vocabulary {
            if !methods.contains(&v.method) {
                methods.push(v.method);
            }
        }
        methods.sort_by_key(|&m| method_rank(m));
        let cell = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"));
        for m in methods {
            let s = report.shift.iter().find(|r| r.method == m);
            let v = report.vocabulary.iter().find(|r| r.method == m);
            out.push_str(&format!(
                "{:<16}{:>8}{:>10}{:>10}{:>12}\n",
                m.as_str(),
                cell(s.map(|r| r.total_shift_pct)),
                cell(s.map(|r| r.positive_shift_pct)),
                cell(s.map(|r| r.negative_shift_pct)),
                cell(v.map(|r| r.growth_pct)),
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisFiles {
    pub json: PathBuf,
    pub table: PathBuf,
    pub pairs: Vec<PathBuf>,
}

/// Writes `analysis.json`, `analysis.txt` and one `shifted_pairs_<tag>.jsonl`
/// per method with at most `pair_cap` pairs each.
pub fn emit_analysis_report(
    report: &AnalysisReport,
    pairs: &[ShiftedPair],
    dir: &Path,
    pair_cap: usize,
) -> Result<AnalysisFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let report = report.clone().sorted();
    let json = dir.join("analysis.json");
    let body = serde_json::to_string_pretty(&report)? + "\n";
    fs::write(&json, body).map_err(|e| Error::io(&json, e))?;
    let table = dir.join("analysis.txt");
    fs::write(&table, report.to_table()).map_err(|e| Error::io(&table, e))?;
    let mut written = Vec::new();
    for r in &report.shift {
        let path = dir.join(format!("shifted_pairs_{}.jsonl", r.method.tag()));
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for p in pairs.iter().filter(|p| p.method == r.method).take(pair_cap) {
            serde_json::to_writer(&mut w, p)?;
            w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(AnalysisFiles {
        json,
        table,
        pairs: written,
    })
}
