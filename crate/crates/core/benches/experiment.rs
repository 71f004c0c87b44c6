use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mvgls::{run_experiment_with, Execution, SimConfig};

fn experiment(c: &mut Criterion) {
    let mut group = c.benchmark_group("experiment");
    group.sample_size(10);
    for (n, t) in [(6, 400), (25, 400)] {
        let cfg = SimConfig {
            reps: 32,
            seed: 1,
            ..SimConfig::case_ii(n, 3, t)
        };
        let label = format!("N{n}_T{t}");
        group.bench_with_input(BenchmarkId::new("sequential", &label), &cfg, |b, cfg| {
            b.iter(|| run_experiment_with(cfg, Execution::Sequential).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("parallel", &label), &cfg, |b, cfg| {
            b.iter(|| run_experiment_with(cfg, Execution::Parallel { workers: None }).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, experiment);
criterion_main!(benches);
