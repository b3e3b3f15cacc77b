use criterion::{criterion_group, criterion_main, Criterion};
use ipsl_core::evolution::{evolve, GaConfig};
use ipsl_core::runner::ablate;
use ipsl_core::{EnvParams, SimConfig};

fn bench_replications(c: &mut Criterion) {
    let sim = SimConfig { env: EnvParams { horizon: 200, ..EnvParams::default() }, ..SimConfig::default() };
    let seeds: Vec<u64> = (0..16).collect();
    let threads = ipsl_core::par::default_threads();

    let mut group = c.benchmark_group("ablate_16_pairs");
    group.sample_size(10);
    group.bench_function("serial", |b| b.iter(|| ablate(&sim, &seeds, 1).unwrap()));
    group.bench_function("parallel", |b| b.iter(|| ablate(&sim, &seeds, threads).unwrap()));
    group.finish();
}

fn bench_generations(c: &mut Criterion) {
    let sim = SimConfig { env: EnvParams { horizon: 100, ..EnvParams::default() }, ..SimConfig::default() };
    let ga = GaConfig { generations: 3, ..GaConfig::default() };
    let threads = ipsl_core::par::default_threads();

    let mut group = c.benchmark_group("evolve_3_generations");
    group.sample_size(10);
    group.bench_function("serial", |b| b.iter(|| evolve(&ga, &sim, 1).unwrap()));
    group.bench_function("parallel", |b| b.iter(|| evolve(&ga, &sim, threads).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_replications, bench_generations);
criterion_main!(benches);
