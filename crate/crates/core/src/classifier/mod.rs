//! The trainable-model abstraction, the built-in hashed-feature logistic
//! regression, and the client for remote backends.

mod linear;
mod loss;
pub mod remote;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Label, LabeledExample};
use crate::metrics::{confusion, f1_macro, ConfusionMatrix};
use crate::{Error, Result};

pub use linear::{EpochRecord, LinearBackend, LinearModel, MODEL_FORMAT_VERSION};
pub use loss::{combined_loss, cross_entropy, LossBatch, LossGradient, PROB_FLOOR};

/// Class probabilities `[p(NotOffensive), p(Offensive)]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbabilityDistribution(pub [f64; 2]);

impl ProbabilityDistribution {
    pub const UNIFORM: ProbabilityDistribution = ProbabilityDistribution([0.5, 0.5]);

    /// Softmax of two logits.
    pub fn from_logits(logits: [f64; 2]) -> Self {
        // p1 = sigmoid(z1 - z0), computed on the stable side
        let d = logits[1] - logits[0];
        let p1 = if d >= 0.0 {
            1.0 / (1.0 + (-d).exp())
        } else {
            let e = d.exp();
            e / (1.0 + e)
        };
        ProbabilityDistribution([1.0 - p1, p1])
    }

    /// Checks the distribution invariants: finite components in `[0, 1]`
    /// summing to one within `tol`.
    pub fn validate(&self, tol: f64) -> std::result::Result<(), String> {
        let [a, b] = self.0;
        if !(a.is_finite() && b.is_finite()) {
            return Err(format!("non-finite probabilities [{a}, {b}]"));
        }
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
            return Err(format!("probabilities [{a}, {b}] outside [0, 1]"));
        }
        if ((a + b) - 1.0).abs() > tol {
            return Err(format!("probabilities [{a}, {b}] sum to {}", a + b));
        }
        Ok(())
    }

    pub fn p(&self, label: Label) -> f64 {
        self.0[label.index()]
    }

    /// Most probable class; exact ties go to `NotOffensive`.
    pub fn argmax(&self) -> Label {
        if self.0[1] > self.0[0] {
            Label::Offensive
        } else {
            Label::NotOffensive
        }
    }

    pub fn confidence(&self) -> f64 {
        self.0[0].max(self.0[1])
    }
}

/// Optimization and regularization settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Only meaningful for transformer backends; the linear model uses all
    /// tokens.
    pub max_tokens: usize,
    pub learning_rate: f64,
    pub warmup_fraction: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

/// Optimizer settings of the built-in linear backend, fixed by the
/// synthetic calibration run (see `examples/calibrate.rs`).
pub const BUILTIN_LEARNING_RATE: f64 = 1.0;
pub const BUILTIN_BATCH_SIZE: usize = 8;
/// Settings handed to transformer fine-tuning backends.
pub const REMOTE_LEARNING_RATE: f64 = 1e-5;
pub const REMOTE_BATCH_SIZE: usize = 128;

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: BUILTIN_BATCH_SIZE,
            max_tokens: 128,
            learning_rate: BUILTIN_LEARNING_RATE,
            warmup_fraction: 0.15,
            weight_decay: 0.001,
            epochs: 20,
            dropout_rate: 0.10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Defaults for fine-tuning pre-trained transformers remotely.
    pub fn remote_defaults() -> Self {
        TrainConfig {
            batch_size: REMOTE_BATCH_SIZE,
            learning_rate: REMOTE_LEARNING_RATE,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            ));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return bad(format!(
                "warmup_fraction {} not in [0, 1]",
                self.warmup_fraction
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay * self.learning_rate < 1.0) {
            return bad(format!(
                "weight_decay {} must be >= 0 with learning_rate * weight_decay < 1",
                self.weight_decay
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} not in [0, 1)", self.dropout_rate));
        }
        Ok(())
    }
}

/// A trained classifier.
pub trait Model: Send + Sync {
    fn predict_proba(&self, docs: &[Document]) -> Result<Vec<ProbabilityDistribution>>;

    fn predict(&self, docs: &[Document]) -> Result<Vec<Label>> {
        Ok(self
            .predict_proba(docs)?
            .iter()
            .map(ProbabilityDistribution::argmax)
            .collect())
    }

    /// Training loss at the selected epoch, when the backend reports one.
    fn selected_loss(&self) -> Option<f64> {
        None
    }
}

/// Something that turns labelled (human and weak) examples into a [`Model`].
///
/// Examples with `Human` provenance form the labelled side of the combined
/// loss; `Weak` and `Augmented` examples form the inferred side.
pub trait Backend: Sync {
    type Model: Model;

    fn train(
        &self,
        train: &[LabeledExample],
        dev: Option<&[LabeledExample]>,
        config: &TrainConfig,
    ) -> Result<Self::Model>;
}

/// Rejects empty and single-class training sets.
pub fn check_trainable(train: &[LabeledExample]) -> Result<()> {
    let first = train.first().ok_or(Error::EmptyTrainingSet)?.label;
    if train.iter().all(|e| e.label == first) {
        return Err(Error::SingleClass(first));
    }
    Ok(())
}

/// Confusion matrix of a model's predictions against gold labels.
pub fn evaluate<M: Model + ?Sized>(
    model: &M,
    examples: &[LabeledExample],
) -> Result<ConfusionMatrix> {
    let docs: Vec<Document> = examples.iter().map(|e| e.doc.clone()).collect();
    let preds = model.predict(&docs)?;
    let golds: Vec<Label> = examples.iter().map(|e| e.label).collect();
    confusion(&preds, &golds)
}

pub fn evaluate_f1<M: Model + ?Sized>(model: &M, examples: &[LabeledExample]) -> Result<f64> {
    f1_macro(&evaluate(model, examples)?)
}
