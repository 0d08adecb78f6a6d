//! Hashed n-gram logistic regression trained with mini-batch SGD on the
//! combined labelled + inferred cross-entropy.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::loss::{combined_loss, LossBatch, LossGradient};
use super::{check_trainable, Backend, Model, ProbabilityDistribution, TrainConfig};
use crate::corpus::{Document, Label, LabeledExample};
use crate::exec::Execution;
use crate::features::{FeatureSpace, FeatureVector};
use crate::metrics::{confusion, f1_macro};
use crate::seed::{self, stream};
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"STLM";
const INIT_SCALE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_f1_macro: Option<f64>,
}

/// A trained (or hand-built) linear model: a 2 x d weight matrix stored
/// class-major, and a bias per class.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    weights: Vec<f64>,
    bias: [f64; 2],
    feature_space: FeatureSpace,
    train_config: TrainConfig,
    selected_epoch: usize,
    history: Vec<EpochRecord>,
}

impl LinearModel {
    pub fn zeros(feature_space: FeatureSpace) -> Self {
        LinearModel {
            weights: vec![0.0; 2 * feature_space.dimension()],
            bias: [0.0; 2],
            feature_space,
            train_config: TrainConfig::default(),
            selected_epoch: 0,
            history: Vec::new(),
        }
    }

    pub fn from_parts(
        feature_space: FeatureSpace,
        weights: Vec<f64>,
        bias: [f64; 2],
    ) -> Result<Self> {
        if weights.len() != 2 * feature_space.dimension() {
            return Err(Error::LengthMismatch {
                left: weights.len(),
                right: 2 * feature_space.dimension(),
            });
        }
        Ok(LinearModel {
            weights,
            bias,
            ..LinearModel::zeros(feature_space)
        })
    }

    pub fn feature_space(&self) -> &FeatureSpace {
        &self.feature_space
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.train_config
    }

    /// 1-based epoch whose snapshot was kept.
    pub fn selected_epoch(&self) -> usize {
        self.selected_epoch
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.history
    }

    /// Training loss recorded for the selected epoch.
    pub fn selected_loss(&self) -> Option<f64> {
        self.history
            .iter()
            .find(|r| r.epoch == self.selected_epoch)
            .map(|r| r.train_loss)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> [f64; 2] {
        self.bias
    }

    pub fn logits(&self, x: &FeatureVector) -> [f64; 2] {
        logits(
            &self.weights,
            1.0,
            self.bias,
            self.feature_space.dimension(),
            x,
        )
    }

    pub fn proba_features(&self, x: &FeatureVector) -> ProbabilityDistribution {
        ProbabilityDistribution::from_logits(self.logits(x))
    }

    pub fn predict_proba_with(
        &self,
        docs: &[Document],
        exec: Execution,
    ) -> Vec<ProbabilityDistribution> {
        exec.map(docs, |d| {
            self.proba_features(&self.feature_space.featurize_text(&d.text))
        })
    }

    /// Combined loss of a feature-level batch under the current weights.
    pub fn loss(&self, batch: &LossBatch<'_>) -> f64 {
        let side = |xs: &[(&FeatureVector, Label)]| -> Vec<(ProbabilityDistribution, Label)> {
            xs.iter()
                .map(|(x, l)| (self.proba_features(x), *l))
                .collect()
        };
        combined_loss(&side(&batch.labelled), &side(&batch.inferred))
    }

    /// Loss and its analytic gradient. For softmax cross-entropy the
    /// per-example logit gradient is `p - onehot(y)`, scaled by `1/n` or
    /// `1/m` depending on the side.
    pub fn loss_and_gradient(&self, batch: &LossBatch<'_>) -> (f64, LossGradient) {
        loss_and_gradient(
            &self.weights,
            1.0,
            self.bias,
            self.feature_space.dimension(),
            batch,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let header = Header {
            format_version: MODEL_FORMAT_VERSION,
            feature_space: self.feature_space.clone(),
            train_config: self.train_config.clone(),
            selected_epoch: self.selected_epoch,
            history: self.history.clone(),
        };
        let header = serde_json::to_vec(&header)?;
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&MODEL_FORMAT_VERSION.to_le_bytes())
            .map_err(io)?;
        w.write_all(&(header.len() as u64).to_le_bytes())
            .map_err(io)?;
        w.write_all(&header).map_err(io)?;
        for v in self.weights.iter().chain(self.bias.iter()) {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bad = |message: String| Error::ModelFormat {
            path: path.into(),
            message,
        };
        let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
        if buf.len() < 16 || &buf[..4] != MAGIC {
            return Err(bad("missing magic bytes".into()));
        }
        let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
        if version != MODEL_FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let hlen = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
        let body = buf.get(16..).ok_or_else(|| bad("truncated".into()))?;
        if body.len() < hlen {
            return Err(bad("truncated header".into()));
        }
        let header: Header =
            serde_json::from_slice(&body[..hlen]).map_err(|e| bad(e.to_string()))?;
        let dim = header.feature_space.dimension();
        let floats = &body[hlen..];
        if floats.len() != (2 * dim + 2) * 8 {
            return Err(bad(format!(
                "expected {} parameter bytes, found {}",
                (2 * dim + 2) * 8,
                floats.len()
            )));
        }
        let mut values: Vec<f64> = floats
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let b1 = values.pop().unwrap();
        let b0 = values.pop().unwrap();
        Ok(LinearModel {
            weights: values,
            bias: [b0, b1],
            feature_space: header.feature_space,
            train_config: header.train_config,
            selected_epoch: header.selected_epoch,
            history: header.history,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    feature_space: FeatureSpace,
    train_config: TrainConfig,
    selected_epoch: usize,
    history: Vec<EpochRecord>,
}

impl Model for LinearModel {
    fn predict_proba(&self, docs: &[Document]) -> Result<Vec<ProbabilityDistribution>> {
        Ok(self.predict_proba_with(docs, Execution::default()))
    }

    fn selected_loss(&self) -> Option<f64> {
        LinearModel::selected_loss(self)
    }
}

fn logits(w: &[f64], scale: f64, bias: [f64; 2], dim: usize, x: &FeatureVector) -> [f64; 2] {
    let (w0, w1) = w.split_at(dim);
    let mut z = [0.0, 0.0];
    for &(i, v) in x.entries() {
        z[0] += w0[i as usize] * v;
        z[1] += w1[i as usize] * v;
    }
    [bias[0] + scale * z[0], bias[1] + scale * z[1]]
}

fn loss_and_gradient(
    w: &[f64],
    scale: f64,
    bias: [f64; 2],
    dim: usize,
    batch: &LossBatch<'_>,
) -> (f64, LossGradient) {
    let mut grad = LossGradient::default();
    let mut loss = 0.0;
    for side in [&batch.labelled, &batch.inferred] {
        if side.is_empty() {
            continue;
        }
        let inv = 1.0 / side.len() as f64;
        let mut side_loss = 0.0;
        for &(x, label) in side.iter() {
            let p = ProbabilityDistribution::from_logits(logits(w, scale, bias, dim, x));
            side_loss += super::cross_entropy(&p, label);
            let mut d = p.0;
            d[label.index()] -= 1.0;
            grad.accumulate(x, [d[0] * inv, d[1] * inv]);
        }
        loss += side_loss * inv;
    }
    grad.compact();
    (loss, grad)
}

/// Trains [`LinearModel`]s in a fixed feature space.
#[derive(Clone, Debug, Default)]
pub struct LinearBackend {
    pub feature_space: FeatureSpace,
    pub execution: Execution,
}

impl LinearBackend {
    pub fn new(feature_space: FeatureSpace) -> Self {
        LinearBackend {
            feature_space,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

impl Backend for LinearBackend {
    type Model = LinearModel;

    fn train(
        &self,
        train: &[LabeledExample],
        dev: Option<&[LabeledExample]>,
        config: &TrainConfig,
    ) -> Result<LinearModel> {
        config.validate()?;
        check_trainable(train)?;
        let space = &self.feature_space;
        let dim = space.dimension();
        let featurize = |e: &LabeledExample| space.featurize_text(e.text());
        let xs: Vec<FeatureVector> = self.execution.map(train, featurize);
        let dev_xs: Option<Vec<FeatureVector>> = dev.map(|d| self.execution.map(d, featurize));
        let dev_gold: Option<Vec<Label>> = dev.map(|d| d.iter().map(|e| e.label).collect());

        let mut init_rng = seed::rng(seed::derive(config.seed, stream::INIT));
        let mut shuffle_rng = seed::rng(seed::derive(config.seed, stream::SHUFFLE));
        let mut drop_rng = seed::rng(seed::derive(config.seed, stream::DROPOUT));

        // effective weights are scale * w; decoupled decay only touches scale
        let mut w: Vec<f64> = (0..2 * dim)
            .map(|_| init_rng.gen_range(-INIT_SCALE..INIT_SCALE))
            .collect();
        let mut scale = 1.0f64;
        let mut bias = [0.0f64; 2];

        let steps_per_epoch = train.len().div_ceil(config.batch_size);
        let total_steps = steps_per_epoch * config.epochs;
        let warmup_steps = (config.warmup_fraction * total_steps as f64).round() as usize;
        let keep = 1.0 - config.dropout_rate;

        let full_batch = {
            let mut b = LossBatch::default();
            for (x, e) in xs.iter().zip(train) {
                let side = if e.is_human() {
                    &mut b.labelled
                } else {
                    &mut b.inferred
                };
                side.push((x, e.label));
            }
            b
        };

        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut step = 0usize;
        let mut history = Vec::with_capacity(config.epochs);
        let mut best: Option<(f64, usize, Vec<f64>, [f64; 2])> = None;

        for epoch in 1..=config.epochs {
            order.shuffle(&mut shuffle_rng);
            for chunk in order.chunks(config.batch_size) {
                let dropped: Vec<FeatureVector> = chunk
                    .iter()
                    .map(|&i| dropout(&xs[i], config.dropout_rate, keep, &mut drop_rng))
                    .collect();
                let mut batch = LossBatch::default();
                for (x, &i) in dropped.iter().zip(chunk) {
                    let side = if train[i].is_human() {
                        &mut batch.labelled
                    } else {
                        &mut batch.inferred
                    };
                    side.push((x, train[i].label));
                }
                let (_, grad) = loss_and_gradient(&w, scale, bias, dim, &batch);

                let lr = if warmup_steps > 0 && step < warmup_steps {
                    config.learning_rate * (step + 1) as f64 / warmup_steps as f64
                } else {
                    config.learning_rate
                };
                scale *= 1.0 - lr * config.weight_decay;
                let step_w = lr / scale;
                for (i, g) in &grad.weights {
                    w[*i as usize] -= step_w * g[0];
                    w[dim + *i as usize] -= step_w * g[1];
                }
                bias[0] -= lr * grad.bias[0];
                bias[1] -= lr * grad.bias[1];
                if scale < 1e-6 {
                    w.iter_mut().for_each(|v| *v *= scale);
                    scale = 1.0;
                }
                step += 1;
            }

            let effective: Vec<f64> = w.iter().map(|v| v * scale).collect();
            let (train_loss, _) = loss_and_gradient(&effective, 1.0, bias, dim, &full_batch);
            let dev_f1 = match (&dev_xs, &dev_gold) {
                (Some(dx), Some(dg)) if !dx.is_empty() => {
                    let preds: Vec<Label> = dx
                        .iter()
                        .map(|x| {
                            ProbabilityDistribution::from_logits(logits(
                                &effective, 1.0, bias, dim, x,
                            ))
                            .argmax()
                        })
                        .collect();
                    Some(f1_macro(&confusion(&preds, dg)?)?)
                }
                _ => None,
            };
            history.push(EpochRecord {
                epoch,
                train_loss,
                dev_f1_macro: dev_f1,
            });
            // higher dev F1 wins; without a dev set, lower training loss
            let score = match dev_f1 {
                Some(f) => f,
                None => -train_loss,
            };
            if best.as_ref().is_none_or(|(s, ..)| score > *s) {
                best = Some((score, epoch, effective, bias));
            }
        }

        let (_, selected_epoch, weights, bias) = best.expect("at least one epoch");
        Ok(LinearModel {
            weights,
            bias,
            feature_space: space.clone(),
            train_config: config.clone(),
            selected_epoch,
            history,
        })
    }
}

/// Inverted dropout over the non-zero features.
fn dropout(x: &FeatureVector, rate: f64, keep: f64, rng: &mut seed::Rng) -> FeatureVector {
    if rate == 0.0 {
        return x.clone();
    }
    let entries = x
        .entries()
        .iter()
        .filter(|_| rng.gen::<f64>() >= rate)
        .map(|&(i, v)| (i, v / keep))
        .collect();
    FeatureVector::from_entries_unchecked(entries)
}
