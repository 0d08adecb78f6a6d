//! Experiment configuration: a TOML file with one section per component,
//! plus command-line overrides of any field.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Value;

use selftrain_core::augment::{AugmenterKind, DEFAULT_RATE};
use selftrain_core::classifier::TrainConfig;
use selftrain_core::corpus::{Profile, Schema};
use selftrain_core::features::{FeatureSpace, DEFAULT_DIMENSION};
use selftrain_core::selftrain::{DEFAULT_GENERATIONS, DEFAULT_THRESHOLD};

use crate::error::{CliError, CliResult};

pub const BUILTIN_BACKEND: &str = "builtin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// `builtin` or the base URL of a remote classifier.
    pub backend: String,
    pub backend_timeout_secs: u64,
    pub data: DataConfig,
    pub features: FeatureConfig,
    /// Missing fields default per backend: calibrated values for the
    /// built-in model, transformer fine-tuning values for remote ones.
    pub train: toml::Table,
    pub selftrain: LoopConfig,
    pub augment: AugmentSection,
    pub analysis: AnalysisSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: vec![0, 1, 2],
            output: PathBuf::from("runs/default"),
            backend: BUILTIN_BACKEND.into(),
            backend_timeout_secs: 3600,
            data: DataConfig::default(),
            features: FeatureConfig::default(),
            train: toml::Table::new(),
            selftrain: LoopConfig::default(),
            augment: AugmentSection::default(),
            analysis: AnalysisSection::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// A normalized bundle written by `ingest`. Takes precedence over `files`.
    pub bundle: Option<PathBuf>,
    pub files: Vec<DataFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFile {
    pub path: PathBuf,
    #[serde(default = "default_schema")]
    pub schema: SchemaRef,
    /// `train`, `dev`, `test`, `unlabelled`, or `column` to read each row's
    /// split from the schema's split field.
    pub split: String,
}

fn default_schema() -> SchemaRef {
    SchemaRef::Preset("jsonl".into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaRef {
    /// `olid`, `convabuse`, `jsonl` or `tweets`.
    Preset(String),
    Custom(Schema),
}

impl SchemaRef {
    pub fn resolve(&self) -> CliResult<Schema> {
        match self {
            SchemaRef::Custom(s) => Ok(s.clone()),
            SchemaRef::Preset(name) => match name.as_str() {
                "olid" => Ok(Schema::olid()),
                "convabuse" => Ok(Schema::convabuse()),
                "jsonl" => Ok(Schema::default()),
                "tweets" => Ok(Schema {
                    profile: Some(Profile::Tweet),
                    ..Schema::default()
                }),
                other => Err(CliError::usage(format!(
                    "unknown schema preset {other:?} (expected olid, convabuse, jsonl or tweets)"
                ))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub dimension: usize,
    pub ngram_orders: Vec<usize>,
    pub hash_seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            dimension: DEFAULT_DIMENSION,
            ngram_orders: vec![1, 2],
            hash_seed: 0,
        }
    }
}

impl FeatureConfig {
    pub fn space(&self) -> CliResult<FeatureSpace> {
        FeatureSpace::new(self.dimension, &self.ngram_orders, self.hash_seed)
            .map_err(CliError::from)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub generations: usize,
    pub confidence_threshold: f64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            generations: DEFAULT_GENERATIONS,
            confidence_threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    /// One report column per method.
    pub methods: Vec<AugmenterKind>,
    pub rate: f64,
    /// Synonym lexicon file; the shipped lexicon when unset.
    pub lexicon: Option<PathBuf>,
    /// `identity` or the base URL of a translation service.
    pub translator: Option<String>,
    pub source_lang: String,
    pub pivot_lang: String,
}

impl Default for AugmentSection {
    fn default() -> Self {
        AugmentSection {
            methods: vec![AugmenterKind::None],
            rate: DEFAULT_RATE,
            lexicon: None,
            translator: None,
            source_lang: "en".into(),
            pivot_lang: "de".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftScopeName {
    #[default]
    Full,
    Confident,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub scope: ShiftScopeName,
    pub pair_cap: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            scope: ShiftScopeName::Full,
            pair_cap: 50,
        }
    }
}

/// Overrides collected from the command line, applied in this order:
/// generic `key=value` pairs first, then the dedicated flags.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub set: Vec<String>,
    pub seeds: Vec<u64>,
    pub output: Option<PathBuf>,
    pub backend: Option<String>,
    pub augment: Vec<AugmenterKind>,
    pub threshold: Option<f64>,
    pub generations: Option<usize>,
}

fn parse_scalar(raw: &str) -> Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    }
}

fn set_path(root: &mut toml::Table, key: &str, value: Value) -> CliResult<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::usage(format!("invalid override key {key:?}")));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::usage(format!("{key}: {part} is not a section")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut root = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| {
                    CliError::usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| CliError::usage(format!("invalid config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in &overrides.set {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("override {item:?} is not key=value")))?;
            set_path(&mut root, key.trim(), parse_scalar(raw.trim()))?;
        }
        let mut cfg: ExperimentConfig = Value::Table(root)
            .try_into()
            .map_err(|e| CliError::usage(format!("invalid config: {e}")))?;
        if !overrides.seeds.is_empty() {
            cfg.seeds = overrides.seeds.clone();
        }
        if let Some(o) = &overrides.output {
            cfg.output = o.clone();
        }
        if let Some(b) = &overrides.backend {
            cfg.backend = b.clone();
        }
        if !overrides.augment.is_empty() {
            cfg.augment.methods = overrides.augment.clone();
        }
        if let Some(t) = overrides.threshold {
            cfg.selftrain.confidence_threshold = t;
        }
        if let Some(g) = overrides.generations {
            cfg.selftrain.generations = g;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        if self.seeds.is_empty() {
            return Err(CliError::usage("at least one seed is required"));
        }
        if self.augment.methods.is_empty() {
            return Err(CliError::usage(
                "at least one augmentation method is required",
            ));
        }
        self.train_config()?;
        self.features.space()?;
        Ok(())
    }

    pub fn is_builtin(&self) -> bool {
        self.backend == BUILTIN_BACKEND
    }

    pub fn train_config(&self) -> CliResult<TrainConfig> {
        let base = if self.is_builtin() {
            TrainConfig::default()
        } else {
            TrainConfig::remote_defaults()
        };
        let mut table = toml::Table::try_from(&base).expect("train config serializes");
        for (k, v) in &self.train {
            if !table.contains_key(k) {
                return Err(CliError::usage(format!("unknown train setting {k:?}")));
            }
            table.insert(k.clone(), v.clone());
        }
        let cfg: TrainConfig = Value::Table(table)
            .try_into()
            .map_err(|e| CliError::usage(format!("invalid train section: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the settings shared by every cell of a run directory.
    /// Seeds, loop settings and augmentation methods select cells and are
    /// left out, so one directory can hold runs of several of them.
    pub fn hash(&self) -> String {
        let mut shared = self.clone();
        shared.seeds.clear();
        shared.output = PathBuf::new();
        shared.backend_timeout_secs = 0;
        shared.selftrain = LoopConfig::default();
        shared.augment.methods.clear();
        shared.analysis = AnalysisSection::default();
        let mut value = serde_json::to_value(&shared).expect("config serializes");
        value["train"] =
            serde_json::to_value(self.train_config().expect("validated")).expect("serializes");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}
