//! On-disk layout of an experiment run:
//!
//! ```text
//! manifest.json
//! data/bundle.jsonl, data/ingest_stats.json
//! cells/<config_id>/seed-<s>/gen-<g>/{model.bin | model.json, weak.jsonl}
//! cells/<config_id>/seed-<s>/run.json
//! metrics/<config_id>.json
//! report.json, report.txt
//! ```
//!
//! `run.json` is written last, so a cell with one is complete and is skipped
//! when the run is resumed.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;

use selftrain_core::classifier::MODEL_FORMAT_VERSION;
use selftrain_core::corpus::{load_dataset, write_dataset, IngestionStats, Schema, SplitSpec};
use selftrain_core::selftrain::{ColumnMetrics, ExperimentReport, RunResult};
use selftrain_core::DatasetBundle;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub versions: Versions,
    pub created_unix: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Versions {
    pub selftrain: String,
    pub layout: u32,
    pub model_format: u32,
}

#[derive(Debug, Serialize)]
struct MetricsFile<'a> {
    config_id: &'a str,
    column: &'a str,
    runs: Vec<serde_json::Value>,
    mean: f64,
    std: f64,
}

pub struct RunDir {
    root: PathBuf,
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, serde_json::to_string_pretty(value)? + "\n")
        .map_err(|e| CliError::data(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

impl RunDir {
    /// Opens (or creates) the output directory of `config`. An existing
    /// directory written under different shared settings is refused.
    pub fn open(config: &ExperimentConfig) -> CliResult<Self> {
        let root = config.output.clone();
        fs::create_dir_all(&root)
            .map_err(|e| CliError::data(format!("{}: {e}", root.display())))?;
        let dir = RunDir { root };
        let path = dir.manifest_path();
        let hash = config.hash();
        if path.exists() {
            let existing: Manifest = read_json(&path)?;
            if existing.config_hash != hash {
                return Err(CliError::usage(format!(
                    "{} was created with different settings (config hash {} vs {}); choose another --output",
                    dir.root.display(),
                    &existing.config_hash[..12],
                    &hash[..12]
                )));
            }
        } else {
            let manifest = Manifest {
                config_hash: hash,
                config: config.clone(),
                seeds: config.seeds.clone(),
                versions: Versions {
                    selftrain: env!("CARGO_PKG_VERSION").into(),
                    layout: LAYOUT_VERSION,
                    model_format: MODEL_FORMAT_VERSION,
                },
                created_unix: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map_or(0, |d| d.as_secs()),
            };
            write_json(&path, &manifest)?;
        }
        Ok(dir)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn bundle_path(&self) -> PathBuf {
        self.root.join("data").join("bundle.jsonl")
    }

    pub fn stats_path(&self) -> PathBuf {
        self.root.join("data").join("ingest_stats.json")
    }

    pub fn cell_dir(&self, config_id: &str, seed: u64) -> PathBuf {
        self.root
            .join("cells")
            .join(config_id)
            .join(format!("seed-{seed}"))
    }

    pub fn generation_dir(&self, config_id: &str, seed: u64, generation: usize) -> PathBuf {
        self.cell_dir(config_id, seed)
            .join(format!("gen-{generation}"))
    }

    pub fn report_path(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn write_bundle(&self, bundle: &DatasetBundle, stats: &[IngestionStats]) -> CliResult<()> {
        let path = self.bundle_path();
        fs::create_dir_all(path.parent().expect("has parent"))?;
        write_dataset(bundle, &path)?;
        write_json(&self.stats_path(), stats)
    }

    /// The ingested bundle, when `ingest` (or an earlier run) stored one.
    pub fn load_bundle(&self) -> CliResult<Option<DatasetBundle>> {
        let path = self.bundle_path();
        if !path.exists() {
            return Ok(None);
        }
        let (bundle, _) = load_dataset(&path, &Schema::default(), SplitSpec::Column)?;
        Ok(Some(bundle))
    }

    pub fn completed_run(&self, config_id: &str, seed: u64) -> CliResult<Option<RunResult>> {
        let path = self.cell_dir(config_id, seed).join("run.json");
        if path.exists() {
            read_json(&path).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn write_run(&self, config_id: &str, run: &RunResult) -> CliResult<()> {
        write_json(&self.cell_dir(config_id, run.seed).join("run.json"), run)
    }

    pub fn write_report(&self, report: &ExperimentReport, table: &str) -> CliResult<()> {
        for c in &report.columns {
            write_json(
                &self
                    .root
                    .join("metrics")
                    .join(format!("{}.json", c.config_id)),
                &metrics_file(c),
            )?;
        }
        write_json(&self.report_path(), report)?;
        fs::write(self.root.join("report.txt"), table)?;
        Ok(())
    }

    pub fn load_report(&self) -> CliResult<ExperimentReport> {
        let path = self.report_path();
        if !path.exists() {
            return Err(CliError::data(format!(
                "{} not found; run `train` or `selftrain` first",
                path.display()
            )));
        }
        read_json(&path)
    }
}

fn metrics_file(c: &ColumnMetrics) -> MetricsFile<'_> {
    MetricsFile {
        config_id: &c.config_id,
        column: &c.column,
        runs: c
            .runs
            .iter()
            .map(
                |r| json!({"seed": r.seed, "f1_macro": r.f1_macro, "per_class_f1": r.per_class_f1}),
            )
            .collect(),
        mean: c.mean,
        std: c.std,
    }
}
