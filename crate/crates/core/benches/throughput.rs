//! Sequential vs rayon execution for the data-parallel hot paths.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use selftrain_core::augment::{augment_weak_set, AugmentConfig, AugmenterKind};
use selftrain_core::classifier::{Backend, LinearBackend, TrainConfig};
use selftrain_core::features::FeatureSpace;
use selftrain_core::selftrain::{infer_weak_labels, run_experiment_suite, SelfTrainConfig};
use selftrain_core::synthetic::{generate, SyntheticSpec};
use selftrain_core::{Document, Execution, LabeledExample};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn corpus() -> selftrain_core::DatasetBundle {
    generate(&SyntheticSpec {
        unlabelled: 20_000,
        ..SyntheticSpec::default()
    })
}

fn featurize(c: &mut Criterion) {
    let bundle = corpus();
    let space = FeatureSpace::default();
    let mut group = c.benchmark_group("featurize");
    group.throughput(Throughput::Elements(bundle.unlabelled.len() as u64));
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| {
                exec.map(&bundle.unlabelled, |d: &Document| {
                    space.featurize_text(black_box(&d.text))
                })
            })
        });
    }
    group.finish();
}

fn predict(c: &mut Criterion) {
    let bundle = corpus();
    let backend = LinearBackend::new(FeatureSpace::default());
    let model = backend
        .train(&bundle.train, None, &TrainConfig::default())
        .unwrap();
    let mut group = c.benchmark_group("predict_proba");
    group.throughput(Throughput::Elements(bundle.unlabelled.len() as u64));
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| model.predict_proba_with(black_box(&bundle.unlabelled), exec))
        });
    }
    group.finish();
}

fn augment(c: &mut Criterion) {
    let bundle = corpus();
    let backend = LinearBackend::new(FeatureSpace::default());
    let model = backend
        .train(&bundle.train, None, &TrainConfig::default())
        .unwrap();
    let weak: Vec<LabeledExample> = infer_weak_labels(&model, &bundle.unlabelled).unwrap();
    let config = AugmentConfig::new(AugmenterKind::WordSwap);
    let mut group = c.benchmark_group("augment_word_swap");
    group.throughput(Throughput::Elements(weak.len() as u64));
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| augment_weak_set(black_box(&weak), &config, 7, exec).unwrap())
        });
    }
    group.finish();
}

fn suite(c: &mut Criterion) {
    let bundle = generate(&SyntheticSpec {
        unlabelled: 1000,
        ..SyntheticSpec::default()
    });
    let backend = LinearBackend::new(FeatureSpace::new(1 << 14, &[1, 2], 0).unwrap());
    let config = SelfTrainConfig {
        generations: 2,
        ..SelfTrainConfig::default()
    };
    let mut group = c.benchmark_group("experiment_cells");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, "4 seeds"), &exec, |b, &exec| {
            b.iter(|| {
                run_experiment_suite(
                    &backend,
                    &bundle,
                    std::slice::from_ref(&config),
                    &[0, 1, 2, 3],
                    exec,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, featurize, predict, augment, suite);
criterion_main!(benches);
