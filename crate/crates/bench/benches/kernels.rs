use std::time::Duration;

use criterion::{black_box, criterion_group, BenchmarkId, Criterion, Throughput};
use stvo_esn::preprocess::generate_mask;
use stvo_esn::{pseudoinverse, step, ActivationKind, GramAccumulator, StvoConfig};
use stvo_esn_bench::{cyclic_labels, drive_signal, uniform_block};

fn oscillator(c: &mut Criterion) {
    let config = StvoConfig::default();
    let s0 = config.initial_state().unwrap();
    c.bench_function("ddtea/step", |b| {
        b.iter(|| step(black_box(s0), black_box(7.3), black_box(config.d_t)).unwrap())
    });

    let mut group = c.benchmark_group("ddtea/drive");
    for len in [500usize, 5000] {
        let signal = drive_signal(len, 1);
        let mut out = vec![0.0; len];
        group.throughput(Throughput::Elements(len as u64));
        group.bench_with_input(BenchmarkId::from_parameter(len), &signal, |b, signal| {
            b.iter(|| config.drive(s0, black_box(signal), &mut out).unwrap())
        });
    }
    group.finish();

    let signal = drive_signal(2000, 2);
    c.bench_function("ddtea/run_reservoir_relu_2000", |b| {
        b.iter(|| stvo_esn::run_reservoir(black_box(&signal), &config, ActivationKind::Relu).unwrap())
    });
}

fn encoding(c: &mut Criterion) {
    let mask = generate_mask(5000, 44, 0);
    let x = uniform_block(100, 44, -1.0, 1.0, 3);
    c.bench_function("mask/encode_100x44_to_5000", |b| {
        b.iter(|| mask.encode_batch(black_box(x.view())).unwrap())
    });
}

fn readout(c: &mut Criterion) {
    let mut group = c.benchmark_group("readout/gram_push_1000_rows");
    for n in [500usize, 2000] {
        let block = uniform_block(1000, n, 0.95, 1.0, 4);
        let labels = cyclic_labels(1000, 10);
        group.throughput(Throughput::Elements((1000 * n) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &block, |b, block| {
            b.iter(|| {
                let mut acc = GramAccumulator::new(n, 10, 0.0).unwrap();
                acc.push(black_box(block.view()), &labels).unwrap();
                acc
            })
        });
    }
    group.finish();

    let mut group = c.benchmark_group("readout/solve");
    for n in [200usize, 500] {
        let block = uniform_block(2 * n, n, 0.95, 1.0, 5);
        let labels = cyclic_labels(2 * n, 10);
        let mut acc = GramAccumulator::new(n, 10, 0.0).unwrap();
        acc.push(block.view(), &labels).unwrap();
        group.bench_with_input(BenchmarkId::new("gram_eigh", n), &acc, |b, acc| {
            b.iter(|| acc.clone().finish().unwrap())
        });
        group.bench_with_input(BenchmarkId::new("svd_pinv", n), &block, |b, block| {
            b.iter(|| pseudoinverse(black_box(block.t())).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10).measurement_time(Duration::from_secs(3));
    targets = oscillator, encoding, readout
}
fn main() {
    stvo_esn::linalg::reexec_with_tuned_blas();
    println!("BLAS kernels: {}", stvo_esn::linalg::blas_core_name());
    benches();
    Criterion::default().configure_from_args().final_summary();
}
