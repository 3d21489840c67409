//! Scaling benchmarks for the per-group solver.
//!
//! The solver is linear in the group size; these benches make the scaling
//! visible at sizes where constant factors no longer matter.

use atrp_core::fidelity::bounds_from_delta;
use atrp_core::solver::solve_group;
use atrp_core::{Interval, QidGroup};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn synthetic_group(m: usize, seed: u64) -> (QidGroup, Vec<Interval>) {
    let mut rng = StdRng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..m).map(|_| rng.gen_range(1.0..100.0)).collect();
    let total: f64 = weights.iter().sum::<f64>() * 2.0;
    let p: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let d: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let bounds = d.iter().map(|&d| bounds_from_delta(d, 0.9)).collect();
    (QidGroup::from_parts(&p, &d), bounds)
}

fn bench_solve_group(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_group");
    for &m in &[250_000usize, 500_000, 1_000_000] {
        let (g, bounds) = synthetic_group(m, 7);
        group.throughput(Throughput::Elements(m as u64));
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| {
            b.iter(|| solve_group(&g, &bounds).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_solve_group);
criterion_main!(benches);
