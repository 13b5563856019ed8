use std::collections::HashMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use silt_bench::lazy_path;
use silt_core::{lattice_self_convolution, silt, silt_exact, Kernel2D, Mollifier, OccupationMap, ReturnTable, StepDistribution};

fn silt_update(c: &mut Criterion) {
    let mut g = c.benchmark_group("silt");
    for n in [1 << 10, 1 << 14, 1 << 18] {
        let path = lazy_path(n);
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::new("incremental", n), &path, |b, p| b.iter(|| silt(black_box(p))));
        if n <= 1 << 14 {
            g.bench_with_input(BenchmarkId::new("sort_count", n), &path, |b, p| b.iter(|| silt_exact(black_box(p)).unwrap()));
        }
    }
    g.finish();
}

fn occupation(c: &mut Criterion) {
    let path = lazy_path(1 << 16);
    let mut g = c.benchmark_group("occupation");
    g.throughput(Throughput::Elements(path.points().len() as u64));
    g.bench_function("open_addressing", |b| {
        b.iter(|| {
            let mut occ = OccupationMap::new();
            let mut total = 0u64;
            for &p in path.points() {
                total += u64::from(occ.increment(p));
            }
            total
        })
    });
    g.bench_function("std_hashmap", |b| {
        b.iter(|| {
            let mut occ: HashMap<(i32, i32), u32> = HashMap::new();
            let mut total = 0u64;
            for p in path.points() {
                let e = occ.entry((p.x, p.y)).or_insert(0);
                total += u64::from(*e);
                *e += 1;
            }
            total
        })
    });
    g.finish();
}

fn returns(c: &mut Criterion) {
    let mut g = c.benchmark_group("return_table");
    g.sample_size(10);
    for (name, dist) in [("lazy", StepDistribution::lazy()), ("king", StepDistribution::king())] {
        g.bench_function(BenchmarkId::new(name, 4096), |b| b.iter(|| ReturnTable::build(black_box(&dist), 4096)));
    }
    g.finish();
}

fn convolution(c: &mut Criterion) {
    let mut g = c.benchmark_group("kernel");
    g.sample_size(10);
    for r in [1.0, 4.0] {
        let k = Kernel2D::sample(Mollifier::band_limited(), r).unwrap();
        g.bench_with_input(BenchmarkId::new("self_convolution", r), &k, |b, k| {
            b.iter(|| lattice_self_convolution(black_box(k), r).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, silt_update, occupation, returns, convolution);
criterion_main!(benches);
