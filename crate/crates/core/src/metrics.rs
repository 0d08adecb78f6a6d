//! Binary classification metrics and cross-seed aggregation.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::{Error, Result};

/// Confusion counts with `Offensive` as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Swaps the roles of the two classes.
    pub fn transposed(&self) -> Self {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    /// F1 of one class treated as positive; 0 when precision + recall = 0.
    pub fn class_f1(&self, label: Label) -> f64 {
        let (tp, fp, fn_) = match label {
            Label::Offensive => (self.tp, self.fp, self.fn_),
            Label::NotOffensive => (self.tn, self.fn_, self.fp),
        };
        // 2PR/(P+R) reduces to 2tp/(2tp+fp+fn); zero whenever tp = 0
        let denom = 2 * tp + fp + fn_;
        if tp == 0 || denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

pub fn confusion(preds: &[Label], golds: &[Label]) -> Result<ConfusionMatrix> {
    if preds.len() != golds.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: golds.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &g) in preds.iter().zip(golds) {
        match (p, g) {
            (Label::Offensive, Label::Offensive) => cm.tp += 1,
            (Label::Offensive, Label::NotOffensive) => cm.fp += 1,
            (Label::NotOffensive, Label::Offensive) => cm.fn_ += 1,
            (Label::NotOffensive, Label::NotOffensive) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Unweighted mean of the two per-class F1 scores.
pub fn f1_macro(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 {
        return Err(Error::EmptyInput("confusion matrix"));
    }
    Ok((cm.class_f1(Label::NotOffensive) + cm.class_f1(Label::Offensive)) / 2.0)
}

pub fn f1_macro_of(preds: &[Label], golds: &[Label]) -> Result<f64> {
    f1_macro(&confusion(preds, golds)?)
}

/// Mean and population standard deviation over runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub mean: f64,
    pub std: f64,
    pub n_runs: usize,
    pub per_run: Vec<f64>,
}

impl ScoreSummary {
    /// `mean ± std` in percent with one decimal, the usual table format.
    pub fn display_pct(&self) -> String {
        format!("{:.1} ± {:.1}", 100.0 * self.mean, 100.0 * self.std)
    }
}

pub fn aggregate(per_run: &[f64]) -> Result<ScoreSummary> {
    if per_run.is_empty() {
        return Err(Error::EmptyInput("run list"));
    }
    let n = per_run.len() as f64;
    // sorted summation so the result does not depend on run order
    let mut sorted = per_run.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / n;
    let var = if per_run.len() == 1 {
        0.0
    } else {
        sorted.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
    };
    Ok(ScoreSummary {
        mean,
        std: var.sqrt(),
        n_runs: per_run.len(),
        per_run: per_run.to_vec(),
    })
}
