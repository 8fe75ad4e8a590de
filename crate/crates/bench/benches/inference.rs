use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pab_bench::{graph_with_evidence, planted, random_pmfs};
use pab_core::inference::{min_factor_message_to_link, min_factor_message_to_path};
use pab_core::BpSchedule;

fn messages(c: &mut Criterion) {
    let mut group = c.benchmark_group("min_factor");
    for n in [2usize, 4, 8] {
        let pmfs = random_pmfs(n + 1, 100, n as u64);
        group.bench_with_input(BenchmarkId::new("to_path", n), &pmfs[1..], |b, links| {
            b.iter(|| min_factor_message_to_path(links).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("to_link", n), &pmfs, |b, pmfs| {
            b.iter(|| min_factor_message_to_link(&pmfs[0], &pmfs[2..]).unwrap())
        });
    }
    group.finish();
}

fn belief_propagation(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_bp");
    group.sample_size(20);
    for paths in [10usize, 50] {
        let (t, truth) = planted(100, 10, paths, 3);
        let g = graph_with_evidence(&t, &truth, 4, 3);
        group.bench_with_input(BenchmarkId::new("cold", paths), &g, |b, g| {
            b.iter_batched(|| g.clone(), |mut g| g.run_bp(&BpSchedule::default()), criterion::BatchSize::LargeInput)
        });
    }
    group.finish();
}

criterion_group!(benches, messages, belief_propagation);
criterion_main!(benches);
