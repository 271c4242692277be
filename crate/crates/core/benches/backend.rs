//! Back-end training and scoring on the rayon pool versus a single worker thread.
//!
//! `cargo bench --no-default-features` builds the fully sequential variant instead.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use idv_plda::harness::{Backend, ExperimentConfig, SeedData};

fn setup() -> (ExperimentConfig, SeedData) {
    let cfg = ExperimentConfig::default();
    let data = SeedData::generate(&cfg, 1).expect("synthetic data");
    (cfg, data)
}

fn train(cfg: &ExperimentConfig, data: &SeedData) -> Backend {
    let in_dom = data.in_dev.unlabeled();
    Backend::train(&data.out_dev, Some(&in_dom), cfg.pipeline.idv, &cfg.pipeline, &cfg.plda, 7).expect("training")
}

fn bench(c: &mut Criterion) {
    let (cfg, data) = setup();
    let backend = train(&cfg, &data);
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool");
    let parallel = idv_plda::par::is_parallel();

    let mut g = c.benchmark_group("train");
    g.sample_size(10);
    g.bench_function("pool", |b| b.iter(|| train(&cfg, &data)));
    if parallel {
        g.bench_function("one-thread", |b| b.iter(|| single.install(|| train(&cfg, &data))));
    }
    g.finish();

    let mut g = c.benchmark_group("score-snorm");
    g.sample_size(10);
    let run = || backend.score(&data.enrol, &data.test, &data.trials, Some(&data.nist_cohort)).expect("scoring");
    g.bench_function("pool", |b| b.iter_batched(|| (), |_| run(), BatchSize::SmallInput));
    if parallel {
        g.bench_function("one-thread", |b| {
            b.iter_batched(|| (), |_| single.install(run), BatchSize::SmallInput)
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
