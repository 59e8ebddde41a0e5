//! Kernel micro-benchmarks, including the staged-vs-direct backend
//! comparison: the staged flow pays for its buffer copies, so its wall time
//! bounds the direct backend's from above at every size.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use gridsolve::backend::Backend;
use gridsolve::kernels;
use gridsolve_bench::{square_matrix, vector};

fn bench_gemm(c: &mut Criterion) {
    let mut group = c.benchmark_group("gemm");
    for n in [64usize, 128, 256] {
        let a = square_matrix(n, 1);
        let b = square_matrix(n, 2);
        group.throughput(Throughput::Elements((2 * n * n * n) as u64));
        for backend in ["direct", "staged"] {
            group.bench_with_input(BenchmarkId::new(backend, n), &n, |bencher, _| {
                let mut be = Backend::select(backend).unwrap();
                let mut out = square_matrix(n, 3);
                bencher.iter(|| {
                    kernels::gemm(&mut be, 1.0, &a, &b, 0.0, &mut out, false, false).unwrap();
                    black_box(out.get(0, 0));
                });
            });
        }
    }
    group.finish();
}

fn bench_gemv(c: &mut Criterion) {
    let mut group = c.benchmark_group("gemv");
    for n in [256usize, 1024] {
        let a = square_matrix(n, 4);
        let x = vector(n, 5);
        group.throughput(Throughput::Elements((2 * n * n) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bencher, _| {
            let mut be = Backend::direct();
            let mut y = vector(n, 6);
            bencher.iter(|| {
                kernels::gemv(&mut be, 1.0, &a, &x, 0.0, &mut y, false).unwrap();
                black_box(y.get(0));
            });
        });
    }
    group.finish();
}

fn bench_axpy_dot(c: &mut Criterion) {
    let n = 1 << 16;
    let x = vector(n, 7);
    let mut group = c.benchmark_group("level1");
    group.throughput(Throughput::Elements(2 * n as u64));
    group.bench_function("axpy", |bencher| {
        let mut be = Backend::direct();
        let mut y = vector(n, 8);
        bencher.iter(|| {
            kernels::axpy(&mut be, 1.0001, &x, &mut y).unwrap();
            black_box(y.get(0));
        });
    });
    group.bench_function("dot", |bencher| {
        let mut be = Backend::direct();
        let y = vector(n, 9);
        bencher.iter(|| black_box(kernels::dot(&mut be, &x, &y).unwrap()));
    });
    group.finish();
}

criterion_group!(benches, bench_gemm, bench_gemv, bench_axpy_dot);
criterion_main!(benches);
