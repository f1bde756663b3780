//! Compares the rayon-parallel study runner against the sequential
//! fallback on a small grid, plus the cost of a single CAR fit.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use infoprior::graph::load_adjacency;
use infoprior::mcmc::ChainConfig;
use infoprior::models::{fit_car, CarModelSpec, CountData};
use infoprior::simulation::{run_study, run_study_sequential, ScenarioGrid};

fn bench_grid() -> ScenarioGrid {
    ScenarioGrid {
        region_counts: vec![50],
        informativeness: vec![8.0],
        mean_rates: vec![0.1],
        replicates: 8,
        base_seed: 7,
    }
}

fn bench_chain() -> ChainConfig {
    ChainConfig::new(0).with_schedule(2000, 500, 3)
}

fn study_backends(c: &mut Criterion) {
    let grid = bench_grid();
    let chain = bench_chain();
    let mut group = c.benchmark_group("run_study");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| run_study_sequential(black_box(&grid), black_box(&chain)).unwrap())
    });
    group.bench_function("parallel", |b| {
        b.iter(|| run_study(black_box(&grid), black_box(&chain), None).unwrap())
    });
    group.finish();
}

fn car_fit(c: &mut Criterion) {
    let text: String = (0..30)
        .map(|i| {
            format!("R{i:02}: R{:02},R{:02}", (i + 1) % 30, (i + 29) % 30)
        })
        .collect::<Vec<_>>()
        .join("\n");
    let graph = load_adjacency(text.as_bytes()).unwrap();
    let ids = graph.region_ids().to_vec();
    let data = CountData::new(ids, vec![200; 30], vec![18; 30], "bench").unwrap();
    let spec = CarModelSpec::new(graph);
    c.bench_function("fit_car_30_regions_2k_iters", |b| {
        b.iter_batched(
            || ChainConfig::new(3).with_schedule(2000, 500, 3),
            |chain| fit_car(black_box(&data), black_box(&spec), &chain).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, study_backends, car_fit);
criterion_main!(benches);
