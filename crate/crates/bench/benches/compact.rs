use compactqn::linalg::dense_sym_eigenvalues;
use compactqn::oracle::PairSource;
use compactqn::{CompactInverse, InverseForm};
use compactqn_bench::{inverse_history, probe};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn hv_products(c: &mut Criterion) {
    let mut group = c.benchmark_group("hv_product");
    for d in [1_000, 10_000] {
        let x = probe(d);
        for (source, form) in [
            (PairSource::Random, InverseForm::General),
            (PairSource::Random, InverseForm::Alternative),
            (PairSource::S, InverseForm::Bfgs),
            (PairSource::Y, InverseForm::Greenstadt),
        ] {
            let h = inverse_history(d, 5, source, 3);
            let ci = CompactInverse::new(&h, form).unwrap();
            group.bench_with_input(BenchmarkId::new(format!("{form:?}"), d), &x, |b, x| {
                b.iter(|| ci.hv_product(black_box(x)).unwrap())
            });
        }
    }
    group.finish();
}

fn eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("eig");
    group.sample_size(10);
    for d in [128, 512] {
        let h = inverse_history(d, 5, PairSource::S, 5);
        let ci = CompactInverse::new(&h, InverseForm::Bfgs).unwrap();
        group.bench_function(BenchmarkId::new("implicit", d), |b| b.iter(|| ci.implicit_eig().unwrap()));
        let dense = ci.materialize().unwrap();
        group.bench_function(BenchmarkId::new("dense", d), |b| b.iter(|| dense_sym_eigenvalues(black_box(&dense)).unwrap()));
    }
    group.finish();
}

fn history_push(c: &mut Criterion) {
    c.bench_function("push_pair_d10000_l5", |b| {
        let mut h = inverse_history(10_000, 5, PairSource::S, 7);
        let s = probe(10_000);
        let y: Vec<f64> = s.iter().map(|v| 2.0 * v).collect();
        b.iter(|| h.push_pair(black_box(&s), black_box(&y), None).unwrap())
    });
}

criterion_group!(benches, hv_products, eigen, history_push);
criterion_main!(benches);
