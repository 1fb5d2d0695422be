use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mixchar::charac::{rho_family, TargetKind};
use mixchar::family;
use mixchar::logsob::{c_ls, LsOptions};
use mixchar::sets::{enumerate, DEFAULT_CAP};
use mixchar::spectral::{decompose, TimeMode};
use mixchar::ChainModel;

fn corpus() -> Vec<(&'static str, ChainModel)> {
    vec![
        ("cycle10", family::cycle(10).unwrap()),
        ("hypercube4", family::hypercube(4).unwrap()),
        ("bintree3", family::binary_tree(3).unwrap()),
    ]
}

fn bench_decompose(c: &mut Criterion) {
    let mut g = c.benchmark_group("decompose");
    for (id, chain) in corpus() {
        g.bench_with_input(BenchmarkId::from_parameter(id), &chain, |b, ch| b.iter(|| decompose(black_box(ch)).unwrap()));
    }
    g.finish();
}

fn bench_enumerate(c: &mut Criterion) {
    let mut g = c.benchmark_group("enumerate");
    for (id, chain) in corpus() {
        g.bench_with_input(BenchmarkId::from_parameter(id), &chain, |b, ch| {
            b.iter(|| enumerate(black_box(ch), 0.5, DEFAULT_CAP).unwrap())
        });
    }
    g.finish();
}

fn bench_rho(c: &mut Criterion) {
    let mut g = c.benchmark_group("rho");
    g.sample_size(10);
    for (id, chain) in corpus() {
        let fam = enumerate(&chain, 0.5, DEFAULT_CAP).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(id), &chain, |b, ch| {
            b.iter(|| rho_family(black_box(ch), TargetKind::Rho, &fam, TimeMode::Continuous).unwrap())
        });
    }
    g.finish();
}

fn bench_c_ls(c: &mut Criterion) {
    let mut g = c.benchmark_group("c_ls");
    g.sample_size(10);
    let opts = LsOptions {
        random_starts: 16,
        set_starts: 16,
        ..LsOptions::default()
    };
    for (id, chain) in corpus() {
        let fam = enumerate(&chain, 0.5, DEFAULT_CAP).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(id), &chain, |b, ch| {
            b.iter(|| c_ls(black_box(ch), Some(&fam), &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(kernels, bench_decompose, bench_enumerate, bench_rho, bench_c_ls);
criterion_main!(kernels);
