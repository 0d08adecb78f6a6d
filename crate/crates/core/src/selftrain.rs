//! The teacher-student loop and the multi-seed experiment runner.

use std::collections::BTreeSet;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::augment::{augment_weak_set, AugmentConfig, AugmenterKind};
use crate::classifier::{evaluate, Backend, Model, TrainConfig};
use crate::corpus::{
    class_distribution, ClassCounts, DatasetBundle, Document, Label, LabeledExample,
};
use crate::exec::Execution;
use crate::metrics::{aggregate, f1_macro, ConfusionMatrix, ScoreSummary};
use crate::seed::{self, stream};
use crate::{Error, Result};

pub const DEFAULT_GENERATIONS: usize = 4;
pub const DEFAULT_THRESHOLD: f64 = 0.8;

#[derive(Clone, Debug)]
pub struct SelfTrainConfig {
    /// Total number of trained models, the initial teacher included.
    pub generations: usize,
    pub confidence_threshold: f64,
    pub augment: AugmentConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        SelfTrainConfig {
            generations: DEFAULT_GENERATIONS,
            confidence_threshold: DEFAULT_THRESHOLD,
            augment: AugmentConfig::default(),
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

impl SelfTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.generations == 0 {
            return Err(Error::InvalidConfig("generations must be >= 1".into()));
        }
        if !(self.confidence_threshold > 0.5 && self.confidence_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "confidence_threshold {} not in (0.5, 1]",
                self.confidence_threshold
            )));
        }
        self.augment.validate()?;
        self.train.validate()
    }

    /// Default fine-tuning: the teacher alone.
    pub fn baseline(&self) -> Self {
        SelfTrainConfig {
            generations: 1,
            augment: AugmentConfig::default(),
            ..self.clone()
        }
    }

    /// Column name in experiment reports: `DF`, `ST`, `ST+WS`, ...
    pub fn column_name(&self) -> String {
        match (self.generations, self.augment.kind) {
            (1, _) => "DF".into(),
            (_, AugmenterKind::None) => "ST".into(),
            (_, k) => format!("ST+{}", k.tag().to_uppercase()),
        }
    }

    /// Stable identifier of the loop settings (seed excluded).
    pub fn config_id(&self) -> String {
        if self.generations == 1 {
            return "df".into();
        }
        format!(
            "st-g{}-t{}-{}",
            self.generations,
            self.confidence_threshold,
            self.augment.kind.tag()
        )
    }

    /// Seed of generation `g` (1-based). Independent of the generation count.
    pub fn generation_seed(&self, g: usize) -> u64 {
        seed::derive(seed::derive(self.seed, stream::GENERATION), g as u64)
    }
}

/// Weak examples after balancing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeakSet {
    pub examples: Vec<LabeledExample>,
    pub counts: ClassCounts,
    pub warning: Option<String>,
}

/// One weak example per document: argmax label and its probability.
pub fn infer_weak_labels<M: Model + ?Sized>(
    model: &M,
    unlabelled: &[Document],
) -> Result<Vec<LabeledExample>> {
    if unlabelled.is_empty() {
        return Ok(Vec::new());
    }
    let probs = model.predict_proba(unlabelled)?;
    if probs.len() != unlabelled.len() {
        return Err(Error::LengthMismatch {
            left: probs.len(),
            right: unlabelled.len(),
        });
    }
    Ok(unlabelled
        .iter()
        .zip(probs)
        .map(|(d, p)| LabeledExample::weak(d.clone(), p.argmax(), p.confidence()))
        .collect())
}

/// Keeps examples with confidence at or above `threshold`, in order.
pub fn confidence_filter(weak: &[LabeledExample], threshold: f64) -> Vec<LabeledExample> {
    weak.iter()
        .filter(|e| e.confidence >= threshold)
        .cloned()
        .collect()
}

/// Uniformly downsamples the larger class to the size of the smaller one.
/// Survivors keep their input order.
pub fn balance_downsample(weak: &[LabeledExample], rng_seed: u64) -> WeakSet {
    let by_class = |label: Label| -> Vec<usize> {
        (0..weak.len())
            .filter(|&i| weak[i].label == label)
            .collect()
    };
    let neg = by_class(Label::NotOffensive);
    let pos = by_class(Label::Offensive);
    let c = neg.len().min(pos.len());
    if c == 0 {
        let warning = format!(
            "weak set has no examples of one class ({} not offensive, {} offensive); student trains on human data only",
            neg.len(),
            pos.len()
        );
        log::warn!("{warning}");
        return WeakSet {
            warning: Some(warning),
            ..WeakSet::default()
        };
    }
    let mut rng = seed::rng(rng_seed);
    let mut keep: Vec<usize> = Vec::with_capacity(2 * c);
    for class in [&neg, &pos] {
        keep.extend(
            index::sample(&mut rng, class.len(), c)
                .into_iter()
                .map(|j| class[j]),
        );
    }
    keep.sort_unstable();
    let examples: Vec<LabeledExample> = keep.into_iter().map(|i| weak[i].clone()).collect();
    WeakSet {
        counts: class_distribution(&examples),
        examples,
        warning: None,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeakSizes {
    pub pre_filter: usize,
    pub post_filter: usize,
    pub post_balance: usize,
    pub post_augment: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    /// 1-based; generation 1 is the initial teacher.
    pub generation: usize,
    pub seed: u64,
    pub weak: WeakSizes,
    pub train_size: usize,
    pub dev_f1_macro: Option<f64>,
    pub test_f1_macro: Option<f64>,
    pub test_confusion: Option<ConfusionMatrix>,
    pub selected_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Everything produced by one generation, handed to an observer so callers
/// can persist models and weak sets without the loop holding on to them.
pub struct GenerationArtifacts<'a, M> {
    pub record: &'a GenerationRecord,
    pub model: &'a M,
    pub weak: &'a [LabeledExample],
}

fn score<M: Model>(model: &M, set: &[LabeledExample]) -> Result<Option<(f64, ConfusionMatrix)>> {
    if set.is_empty() {
        return Ok(None);
    }
    let cm = evaluate(model, set)?;
    Ok(Some((f1_macro(&cm)?, cm)))
}

/// Runs the loop and returns one record per generation.
pub fn run_self_training<B: Backend>(
    backend: &B,
    bundle: &DatasetBundle,
    config: &SelfTrainConfig,
    exec: Execution,
) -> Result<Vec<GenerationRecord>> {
    run_self_training_with(backend, bundle, config, exec, |_| Ok(()))
}

pub fn run_self_training_with<B, F>(
    backend: &B,
    bundle: &DatasetBundle,
    config: &SelfTrainConfig,
    exec: Execution,
    mut observe: F,
) -> Result<Vec<GenerationRecord>>
where
    B: Backend,
    F: FnMut(GenerationArtifacts<'_, B::Model>) -> Result<()>,
{
    config.validate()?;
    if bundle.train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if config.generations > 1 && bundle.unlabelled.is_empty() {
        return Err(Error::EmptyInput("unlabelled pool"));
    }
    let dev = bundle.dev.as_deref().filter(|d| !d.is_empty());
    let mut records = Vec::with_capacity(config.generations);
    let mut teacher: Option<B::Model> = None;
    for g in 1..=config.generations {
        let gen_seed = config.generation_seed(g);
        let mut sizes = WeakSizes::default();
        let mut warning = None;
        let mut weak: Vec<LabeledExample> = Vec::new();
        if let Some(t) = &teacher {
            let inferred = infer_weak_labels(t, &bundle.unlabelled)?;
            let filtered = confidence_filter(&inferred, config.confidence_threshold);
            let balanced = balance_downsample(&filtered, seed::derive(gen_seed, stream::BALANCE));
            let augmented = if balanced.examples.is_empty() {
                Vec::new()
            } else {
                augment_weak_set(
                    &balanced.examples,
                    &config.augment,
                    seed::derive(gen_seed, stream::AUGMENT),
                    exec,
                )?
            };
            sizes = WeakSizes {
                pre_filter: inferred.len(),
                post_filter: filtered.len(),
                post_balance: balanced.examples.len(),
                post_augment: augmented.len(),
            };
            warning = balanced.warning;
            weak = augmented;
        }
        let mut train = bundle.train.clone();
        train.extend(weak.iter().cloned());
        let train_config = TrainConfig {
            seed: gen_seed,
            ..config.train.clone()
        };
        let model = backend.train(&train, dev, &train_config)?;
        let dev_score = match dev {
            Some(d) => score(&model, d)?,
            None => None,
        };
        let test_score = score(&model, &bundle.test)?;
        let record = GenerationRecord {
            generation: g,
            seed: gen_seed,
            weak: sizes,
            train_size: train.len(),
            dev_f1_macro: dev_score.map(|s| s.0),
            test_f1_macro: test_score.map(|s| s.0),
            test_confusion: test_score.map(|s| s.1),
            selected_loss: model.selected_loss(),
            warning,
        };
        observe(GenerationArtifacts {
            record: &record,
            model: &model,
            weak: &weak,
        })?;
        records.push(record);
        teacher = Some(model);
    }
    Ok(records)
}

/// Test result of one (config, seed) run, scored at the final generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub f1_macro: f64,
    /// Indexed by label: `[not offensive, offensive]`.
    pub per_class_f1: [f64; 2],
    /// Generation with the best dev score, when a dev set exists.
    pub best_dev_generation: Option<usize>,
    pub generations: Vec<GenerationRecord>,
}

impl RunResult {
    pub fn from_records(seed: u64, generations: Vec<GenerationRecord>) -> Result<Self> {
        let last = generations
            .last()
            .ok_or(Error::EmptyInput("generation records"))?;
        let (f1, cm) = last
            .test_f1_macro
            .zip(last.test_confusion)
            .ok_or(Error::EmptyInput("test split"))?;
        let mut best: Option<(usize, f64)> = None;
        for r in &generations {
            if let Some(f) = r.dev_f1_macro {
                if best.is_none_or(|(_, b)| f > b) {
                    best = Some((r.generation, f));
                }
            }
        }
        Ok(RunResult {
            seed,
            f1_macro: f1,
            per_class_f1: [
                cm.class_f1(Label::NotOffensive),
                cm.class_f1(Label::Offensive),
            ],
            best_dev_generation: best.map(|b| b.0),
            generations,
        })
    }
}

/// Metrics of one report column across seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnMetrics {
    pub column: String,
    pub config_id: String,
    pub runs: Vec<RunResult>,
    pub mean: f64,
    pub std: f64,
}

impl ColumnMetrics {
    pub fn from_runs(column: String, config_id: String, mut runs: Vec<RunResult>) -> Result<Self> {
        runs.sort_by_key(|r| r.seed);
        let summary = aggregate(&runs.iter().map(|r| r.f1_macro).collect::<Vec<_>>())?;
        Ok(ColumnMetrics {
            column,
            config_id,
            runs,
            mean: summary.mean,
            std: summary.std,
        })
    }

    pub fn summary(&self) -> ScoreSummary {
        ScoreSummary {
            mean: self.mean,
            std: self.std,
            n_runs: self.runs.len(),
            per_run: self.runs.iter().map(|r| r.f1_macro).collect(),
        }
    }
}

/// Mean ± std test F1-macro per column, DF first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub columns: Vec<ColumnMetrics>,
}

impl ExperimentReport {
    pub fn column(&self, name: &str) -> Option<&ColumnMetrics> {
        self.columns.iter().find(|c| c.column == name)
    }

    /// One header row and one score row, scores in percent.
    pub fn to_table(&self, row_label: &str) -> String {
        let mut header = format!("{:<16}", "");
        let mut row = format!("{row_label:<16}");
        for c in &self.columns {
            header.push_str(&format!("{:>14}", c.column));
            row.push_str(&format!("{:>14}", c.summary().display_pct()));
        }
        format!("{}\n{}\n", header.trim_end(), row.trim_end())
    }
}

/// One (config, seed) unit of work in an experiment suite.
#[derive(Clone, Debug)]
pub struct SuiteCell {
    pub column: String,
    pub config_id: String,
    pub config: SelfTrainConfig,
}

impl SuiteCell {
    pub fn seed(&self) -> u64 {
        self.config.seed
    }
}

/// Expands configs x seeds into cells: the default fine-tuning baseline
/// first, then each self-training config, seeds in the given order.
///
/// The baseline depends only on the training settings, so it is planned once
/// from the first config. Generation 1 of every self-training cell is
/// trained exactly like the baseline cell of the same seed.
pub fn plan_suite(configs: &[SelfTrainConfig], seeds: &[u64]) -> Result<Vec<SuiteCell>> {
    if seeds.is_empty() {
        return Err(Error::EmptyInput("seed list"));
    }
    if configs.is_empty() {
        return Err(Error::EmptyInput("config list"));
    }
    let unique: BTreeSet<u64> = seeds.iter().copied().collect();
    if unique.len() != seeds.len() {
        return Err(Error::InvalidConfig("duplicate seeds".into()));
    }
    let mut ids = BTreeSet::new();
    for c in configs {
        c.validate()?;
        if c.generations > 1 && !ids.insert(c.config_id()) {
            return Err(Error::InvalidConfig(format!(
                "duplicate config {}",
                c.config_id()
            )));
        }
    }
    let base = configs[0].baseline();
    let columns = std::iter::once(&base).chain(configs.iter().filter(|c| c.generations > 1));
    let mut cells = Vec::new();
    for c in columns {
        for &s in seeds {
            cells.push(SuiteCell {
                column: c.column_name(),
                config_id: c.config_id(),
                config: SelfTrainConfig {
                    seed: s,
                    ..c.clone()
                },
            });
        }
    }
    Ok(cells)
}

/// Groups per-cell results into report columns, in planning order.
pub fn assemble_report(cells: &[SuiteCell], runs: Vec<RunResult>) -> Result<ExperimentReport> {
    if cells.len() != runs.len() {
        return Err(Error::LengthMismatch {
            left: cells.len(),
            right: runs.len(),
        });
    }
    let mut grouped: Vec<(String, String, Vec<RunResult>)> = Vec::new();
    for (cell, run) in cells.iter().zip(runs) {
        match grouped.iter_mut().find(|g| g.1 == cell.config_id) {
            Some(g) => g.2.push(run),
            None => grouped.push((cell.column.clone(), cell.config_id.clone(), vec![run])),
        }
    }
    let columns = grouped
        .into_iter()
        .map(|(column, id, runs)| ColumnMetrics::from_runs(column, id, runs))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport { columns })
}

/// Runs default fine-tuning plus every config for every seed. Cells are
/// independent and run under `exec`; generations within a cell are
/// sequential.
pub fn run_experiment_suite<B: Backend>(
    backend: &B,
    bundle: &DatasetBundle,
    configs: &[SelfTrainConfig],
    seeds: &[u64],
    exec: Execution,
) -> Result<ExperimentReport> {
    let cells = plan_suite(configs, seeds)?;
    let runs: Vec<RunResult> = exec.try_map(&cells, |cell| {
        let records = run_self_training(backend, bundle, &cell.config, Execution::Sequential)?;
        RunResult::from_records(cell.seed(), records)
    })?;
    assemble_report(&cells, runs)
}
