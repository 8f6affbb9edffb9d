use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qtn_bench::{fourier_1d, random_rows};
use qtn_core::features::Quantization;
use qtn_core::solver::init_factors;
use qtn_core::tensors::cpd_response;

fn response(c: &mut Criterion) {
    let mut group = c.benchmark_group("cpd_response");
    for log2_m in [10u32, 14] {
        for (label, q) in [("quantized", Quantization::Base(2)), ("dense", Quantization::Dense)] {
            let spec = fourier_1d(log2_m, q);
            let weights = init_factors(&spec.mode_dims(), 8, 0, 1.0).unwrap();
            let rows = random_rows(&spec, 64, 1);
            group.bench_with_input(BenchmarkId::new(label, 1usize << log2_m), &rows, |b, rows| {
                b.iter(|| {
                    for blocks in rows {
                        black_box(cpd_response(&weights, blocks).unwrap());
                    }
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, response);
criterion_main!(benches);
