use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use log::{info, warn};

use selftrain_core::analysis::{
    emit_analysis_report, label_shift, vocabulary_growth, AnalysisReport, ShiftScope,
};
use selftrain_core::augment::{
    augment_documents, AugmentConfig, AugmenterKind, IdentityTranslator, LanguagePair,
    SynonymLexicon, Translator, TransportTranslator,
};
use selftrain_core::classifier::remote::{HttpTransport, RemoteBackend, RemoteModel};
use selftrain_core::classifier::{Backend, LinearBackend, LinearModel};
use selftrain_core::corpus::{load_dataset, write_examples, IngestionStats, Split, SplitSpec};
use selftrain_core::selftrain::{
    assemble_report, plan_suite, run_self_training_with, ExperimentReport, RunResult,
    SelfTrainConfig, SuiteCell,
};
use selftrain_core::{DatasetBundle, Document, Execution};

use crate::config::{ExperimentConfig, ShiftScopeName};
use crate::error::{CliError, CliResult};
use crate::run_dir::RunDir;

/// Reads every configured data file into one bundle.
pub fn load_data(cfg: &ExperimentConfig) -> CliResult<(DatasetBundle, Vec<IngestionStats>)> {
    if let Some(path) = &cfg.data.bundle {
        let (bundle, stats) = load_dataset(path, &Default::default(), SplitSpec::Column)?;
        return Ok((bundle, vec![stats]));
    }
    if cfg.data.files.is_empty() {
        return Err(CliError::usage(
            "no data configured: set data.bundle or add [[data.files]] entries",
        ));
    }
    let mut bundle = DatasetBundle::default();
    let mut all = Vec::new();
    for f in &cfg.data.files {
        let spec = if f.split == "column" {
            SplitSpec::Column
        } else {
            SplitSpec::Fixed(Split::parse(&f.split).ok_or_else(|| {
                CliError::usage(format!("{}: unknown split {:?}", f.path.display(), f.split))
            })?)
        };
        let (part, stats) = load_dataset(&f.path, &f.schema.resolve()?, spec)?;
        info!(
            "{}: {} rows read, {} kept, {} dropped",
            f.path.display(),
            stats.rows_read,
            stats.rows_kept,
            stats.rows_dropped
        );
        bundle.merge(part)?;
        all.push(stats);
    }
    Ok((bundle, all))
}

fn run_bundle(cfg: &ExperimentConfig, run: &RunDir) -> CliResult<DatasetBundle> {
    if let Some(b) = run.load_bundle()? {
        return Ok(b);
    }
    let (bundle, stats) = load_data(cfg)?;
    run.write_bundle(&bundle, &stats)?;
    Ok(bundle)
}

fn timeout(cfg: &ExperimentConfig) -> Duration {
    Duration::from_secs(cfg.backend_timeout_secs)
}

fn translator(cfg: &ExperimentConfig) -> Option<Arc<dyn Translator>> {
    match cfg.augment.translator.as_deref() {
        None => None,
        Some("identity") => Some(Arc::new(IdentityTranslator)),
        Some(url) => Some(Arc::new(TransportTranslator::new(Arc::new(
            HttpTransport::new(url, timeout(cfg)),
        )))),
    }
}

/// The augmentation settings for `kind`, or `None` for backtranslation
/// without a configured translator.
fn augment_config(cfg: &ExperimentConfig, kind: AugmenterKind) -> CliResult<Option<AugmentConfig>> {
    let mut a = AugmentConfig::new(kind);
    a.rate = cfg.augment.rate;
    a.languages = LanguagePair {
        source: cfg.augment.source_lang.clone(),
        pivot: cfg.augment.pivot_lang.clone(),
    };
    match kind {
        AugmenterKind::Synonym => {
            let lexicon = match &cfg.augment.lexicon {
                Some(p) => SynonymLexicon::load(p)?,
                None => SynonymLexicon::builtin(),
            };
            a = a.with_lexicon(lexicon);
        }
        AugmenterKind::Backtranslation => match translator(cfg) {
            Some(t) => a = a.with_translator(t),
            None => return Ok(None),
        },
        _ => {}
    }
    a.validate()?;
    Ok(Some(a))
}

fn selftrain_configs(cfg: &ExperimentConfig) -> CliResult<Vec<SelfTrainConfig>> {
    let train = cfg.train_config()?;
    cfg.augment
        .methods
        .iter()
        .map(|&kind| {
            let augment = augment_config(cfg, kind)?.ok_or_else(|| {
                CliError::usage(
                    "backtranslation needs augment.translator (\"identity\" or a service URL)",
                )
            })?;
            Ok(SelfTrainConfig {
                generations: cfg.selftrain.generations,
                confidence_threshold: cfg.selftrain.confidence_threshold,
                augment,
                train: train.clone(),
                seed: 0,
            })
        })
        .collect()
}

fn remote_backend(cfg: &ExperimentConfig) -> CliResult<RemoteBackend> {
    let backend = RemoteBackend::http(&cfg.backend, timeout(cfg));
    let status = backend.health()?;
    info!("backend {} is {status}", cfg.backend);
    Ok(backend)
}

fn save_remote(model: &RemoteModel, endpoint: &str, path: &Path) -> selftrain_core::Result<()> {
    let body = serde_json::json!({"backend": endpoint, "session": model.session});
    fs::write(path, serde_json::to_string_pretty(&body)? + "\n")
        .map_err(|e| selftrain_core::Error::io(path, e))
}

/// Runs every planned cell that has no `run.json` yet, then writes the
/// metrics and report files.
fn run_cells<B, S>(
    run: &RunDir,
    bundle: &DatasetBundle,
    cells: &[SuiteCell],
    backend: &B,
    model_file: &str,
    save: S,
    exec: Execution,
) -> CliResult<ExperimentReport>
where
    B: Backend,
    S: Fn(&B::Model, &Path) -> selftrain_core::Result<()> + Sync,
{
    let runs: Vec<RunResult> = exec.try_map(cells, |cell| -> CliResult<RunResult> {
        if let Some(done) = run.completed_run(&cell.config_id, cell.seed())? {
            info!("{} seed {}: already complete", cell.config_id, cell.seed());
            return Ok(done);
        }
        info!("{} seed {}: running", cell.config_id, cell.seed());
        let records = run_self_training_with(
            backend,
            bundle,
            &cell.config,
            Execution::Sequential,
            |art| {
                let dir = run.generation_dir(&cell.config_id, cell.seed(), art.record.generation);
                fs::create_dir_all(&dir).map_err(|e| selftrain_core::Error::io(&dir, e))?;
                save(art.model, &dir.join(model_file))?;
                write_examples(art.weak, dir.join("weak.jsonl"))?;
                if let Some(w) = &art.record.warning {
                    warn!(
                        "{} seed {} generation {}: {w}",
                        cell.config_id,
                        cell.seed(),
                        art.record.generation
                    );
                }
                Ok(())
            },
        )?;
        let result = RunResult::from_records(cell.seed(), records)?;
        run.write_run(&cell.config_id, &result)?;
        Ok(result)
    })?;
    let report = assemble_report(cells, runs)?;
    let table = report.to_table("F1-macro (%)");
    run.write_report(&report, &table)?;
    print!("{table}");
    Ok(report)
}

fn execute(cfg: &ExperimentConfig, configs: &[SelfTrainConfig]) -> CliResult<ExperimentReport> {
    let run = RunDir::open(cfg)?;
    let bundle = run_bundle(cfg, &run)?;
    let cells = plan_suite(configs, &cfg.seeds)?;
    if cfg.is_builtin() {
        let backend =
            LinearBackend::new(cfg.features.space()?).with_execution(Execution::Sequential);
        run_cells(
            &run,
            &bundle,
            &cells,
            &backend,
            "model.bin",
            |m, p| m.save(p),
            Execution::default(),
        )
    } else {
        let backend = remote_backend(cfg)?;
        let endpoint = cfg.backend.clone();
        run_cells(
            &run,
            &bundle,
            &cells,
            &backend,
            "model.json",
            |m, p| save_remote(m, &endpoint, p),
            Execution::Sequential,
        )
    }
}

pub fn ingest(cfg: &ExperimentConfig) -> CliResult<()> {
    let run = RunDir::open(cfg)?;
    let (bundle, stats) = load_data(cfg)?;
    run.write_bundle(&bundle, &stats)?;
    println!(
        "train {}  dev {}  test {}  unlabelled {}",
        bundle.train.len(),
        bundle.dev.as_ref().map_or(0, Vec::len),
        bundle.test.len(),
        bundle.unlabelled.len()
    );
    println!("wrote {}", run.bundle_path().display());
    Ok(())
}

/// Default fine-tuning only.
pub fn train(cfg: &ExperimentConfig) -> CliResult<()> {
    let base = SelfTrainConfig {
        generations: 1,
        confidence_threshold: cfg.selftrain.confidence_threshold,
        augment: AugmentConfig::default(),
        train: cfg.train_config()?,
        seed: 0,
    };
    execute(cfg, &[base]).map(drop)
}

pub fn selftrain(cfg: &ExperimentConfig) -> CliResult<()> {
    if cfg.selftrain.generations < 2 {
        return Err(CliError::usage(
            "selftrain needs --generations >= 2 (use `train` for the baseline alone)",
        ));
    }
    execute(cfg, &selftrain_configs(cfg)?).map(drop)
}

fn split_docs(bundle: &DatasetBundle, split: Split) -> Vec<Document> {
    match split {
        Split::Unlabelled => bundle.unlabelled.clone(),
        s => bundle.split(s).iter().map(|e| e.doc.clone()).collect(),
    }
}

fn parse_split(name: &str) -> CliResult<Split> {
    Split::parse(name).ok_or_else(|| CliError::usage(format!("unknown split {name:?}")))
}

fn active_methods(cfg: &ExperimentConfig) -> Vec<AugmenterKind> {
    let chosen: Vec<AugmenterKind> = cfg
        .augment
        .methods
        .iter()
        .copied()
        .filter(|&k| k != AugmenterKind::None)
        .collect();
    if chosen.is_empty() {
        vec![
            AugmenterKind::WordSwap,
            AugmenterKind::Synonym,
            AugmenterKind::Backtranslation,
        ]
    } else {
        chosen
    }
}

/// Writes `<output>/augment/<tag>.jsonl`, one augmented document per input.
pub fn augment(cfg: &ExperimentConfig, split: &str) -> CliResult<()> {
    let run = RunDir::open(cfg)?;
    let bundle = run_bundle(cfg, &run)?;
    let docs = split_docs(&bundle, parse_split(split)?);
    let dir = run.root().join("augment");
    fs::create_dir_all(&dir)?;
    for kind in active_methods(cfg) {
        let Some(config) = augment_config(cfg, kind)? else {
            warn!("skipping backtranslation: no translator configured");
            continue;
        };
        let out = augment_documents(&docs, &config, cfg.seeds[0], Execution::default())?;
        let path = dir.join(format!("{}.jsonl", kind.tag()));
        let mut w = BufWriter::new(File::create(&path)?);
        for d in &out {
            serde_json::to_writer(&mut w, d)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        println!(
            "{}: {} documents -> {}",
            kind.as_str(),
            out.len(),
            path.display()
        );
    }
    Ok(())
}

pub fn analyze(cfg: &ExperimentConfig, model: Option<PathBuf>, split: &str) -> CliResult<()> {
    if !cfg.is_builtin() {
        return Err(CliError::usage("analyze works on built-in models only"));
    }
    let run = RunDir::open(cfg)?;
    let path = model.unwrap_or_else(|| run.generation_dir("df", cfg.seeds[0], 1).join("model.bin"));
    if !path.exists() {
        return Err(CliError::data(format!(
            "model {} not found; run `train` first or pass --model",
            path.display()
        )));
    }
    let model = LinearModel::load(&path)?;
    let bundle = run_bundle(cfg, &run)?;
    let docs = split_docs(&bundle, parse_split(split)?);
    if docs.is_empty() {
        return Err(CliError::data(format!("split {split} is empty")));
    }
    let scope = match cfg.analysis.scope {
        ShiftScopeName::Full => ShiftScope::FullPool,
        ShiftScopeName::Confident => ShiftScope::Confident(cfg.selftrain.confidence_threshold),
    };
    let mut report = AnalysisReport {
        shift: Vec::new(),
        vocabulary: Vec::new(),
    };
    let mut pairs = Vec::new();
    for kind in active_methods(cfg) {
        let Some(config) = augment_config(cfg, kind)? else {
            warn!("skipping backtranslation: no translator configured");
            continue;
        };
        let augmented = augment_documents(&docs, &config, cfg.seeds[0], Execution::default())?;
        let (shift, shifted) = label_shift(&model, &docs, &augmented, kind, scope)?;
        report.shift.push(shift);
        report
            .vocabulary
            .push(vocabulary_growth(&docs, &augmented, kind)?);
        pairs.extend(shifted);
    }
    let files = emit_analysis_report(
        &report,
        &pairs,
        &run.root().join("analysis"),
        cfg.analysis.pair_cap,
    )?;
    print!("{}", report.to_table());
    println!("wrote {}", files.json.display());
    Ok(())
}

pub fn report(cfg: &ExperimentConfig) -> CliResult<()> {
    let run = RunDir::open(cfg)?;
    let report = run.load_report()?;
    print!("{}", report.to_table("F1-macro (%)"));
    for c in &report.columns {
        let per_run: Vec<String> = c
            .runs
            .iter()
            .map(|r| format!("{}:{:.4}", r.seed, r.f1_macro))
            .collect();
        println!("  {:<24} {}", c.config_id, per_run.join(" "));
    }
    let analysis = run.root().join("analysis").join("analysis.txt");
    if analysis.exists() {
        println!();
        print!("{}", fs::read_to_string(analysis)?);
    }
    Ok(())
}
