//! Calibration run for the built-in backend on the synthetic keyword corpus.
//!
//! Sweeps batch size x learning rate on one corpus, then measures the
//! self-training gain of the chosen defaults over many corpus seeds. The
//! smallest observed gain (rounded down) becomes the margin asserted by the
//! acceptance suite.
//!
//! ```text
//! cargo run --release -p selftrain-core --example calibrate -- crates/core/tests/data/calibration.json
//! ```

use std::fs;

use serde::Serialize;
use serde_json::json;

use selftrain_core::classifier::{LinearBackend, TrainConfig};
use selftrain_core::features::FeatureSpace;
use selftrain_core::selftrain::{run_experiment_suite, SelfTrainConfig};
use selftrain_core::synthetic::{generate, SyntheticSpec};
use selftrain_core::Execution;

const RUN_SEEDS: [u64; 3] = [0, 1, 2];
const CORPUS_SEEDS: u64 = 20;

#[derive(Serialize)]
struct Cell {
    batch_size: usize,
    learning_rate: f64,
    df_mean: f64,
    st_mean: f64,
}

fn gain(backend: &LinearBackend, corpus_seed: u64, train: TrainConfig) -> (f64, f64) {
    let bundle = generate(&SyntheticSpec {
        seed: corpus_seed,
        ..SyntheticSpec::default()
    });
    let cfg = SelfTrainConfig {
        train,
        ..SelfTrainConfig::default()
    };
    let report = run_experiment_suite(backend, &bundle, &[cfg], &RUN_SEEDS, Execution::Parallel)
        .expect("suite");
    (report.columns[0].mean, report.columns[1].mean)
}

fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "calibration.json".into());
    let backend = LinearBackend::new(FeatureSpace::default());

    let mut grid = Vec::new();
    for batch_size in [4, 8, 16, 32, 128] {
        for learning_rate in [0.5, 1.0, 2.0, 4.0] {
            let train = TrainConfig {
                batch_size,
                learning_rate,
                ..TrainConfig::default()
            };
            let (df_mean, st_mean) = gain(&backend, 0, train);
            eprintln!("batch {batch_size:>3} lr {learning_rate}: DF {df_mean:.4} ST {st_mean:.4}");
            grid.push(Cell {
                batch_size,
                learning_rate,
                df_mean,
                st_mean,
            });
        }
    }

    let mut gains = Vec::new();
    for corpus_seed in 0..CORPUS_SEEDS {
        let (df, st) = gain(&backend, corpus_seed, TrainConfig::default());
        eprintln!(
            "corpus {corpus_seed}: DF {df:.4} ST {st:.4} gain {:+.4}",
            st - df
        );
        gains.push(
            json!({ "corpus_seed": corpus_seed, "df_mean": df, "st_mean": st, "gain": st - df }),
        );
    }
    let min_gain = gains
        .iter()
        .map(|g| g["gain"].as_f64().unwrap())
        .fold(f64::INFINITY, f64::min);
    let margin = ((min_gain * 200.0).floor() / 200.0).max(0.0);

    let defaults = TrainConfig::default();
    let doc = json!({
        "synthetic": SyntheticSpec::default(),
        "run_seeds": RUN_SEEDS,
        "grid": grid,
        "chosen": { "batch_size": defaults.batch_size, "learning_rate": defaults.learning_rate },
        "corpus_gains": gains,
        "min_gain": min_gain,
        "margin": margin,
    });
    fs::write(&out, serde_json::to_string_pretty(&doc).unwrap() + "\n").expect("write calibration");
    eprintln!("margin {margin} written to {out}");
}
