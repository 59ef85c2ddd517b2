use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eegtile::model::NetworkParams;
use eegtile::repr::periodogram_tile;
use eegtile::tensor::{conv2d_forward, conv2d_forward_reference, BatchNormMode, Dims4};
use eegtile_bench::{conv_layer, raw_tile, tensor};
use std::hint::black_box;

fn conv(c: &mut Criterion) {
    let mut group = c.benchmark_group("conv2d_forward");
    group.sample_size(10);
    for (name, side, in_ch, out_ch) in [("conv1", 125, 1, 32), ("conv2", 63, 32, 64), ("conv3", 32, 64, 128)] {
        let input = tensor(1, Dims4::new(8, side, side, in_ch));
        let layer = conv_layer(2, in_ch, out_ch);
        group.bench_with_input(BenchmarkId::new("im2col_gemm", name), &input, |b, x| {
            b.iter(|| conv2d_forward(black_box(x), &layer).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("direct", name), &input, |b, x| {
            b.iter(|| conv2d_forward_reference(black_box(x), &layer).unwrap())
        });
    }
    group.finish();
}

fn periodogram(c: &mut Criterion) {
    let mut group = c.benchmark_group("periodogram_tile");
    for samples in [125, 250] {
        let tile = raw_tile(3, 125, samples);
        group.bench_with_input(BenchmarkId::from_parameter(samples), &tile, |b, t| {
            b.iter(|| periodogram_tile(black_box(t), 125.0).unwrap())
        });
    }
    group.finish();
}

fn network(c: &mut Criterion) {
    let mut group = c.benchmark_group("network");
    group.sample_size(10);
    let mut params = NetworkParams::init_he(0, 10, 1).unwrap();
    let eval_batch = tensor(4, Dims4::new(32, 125, 125, 1));
    group.bench_function("forward_eval_32", |b| {
        b.iter(|| params.forward_eval(black_box(&eval_batch)).unwrap())
    });
    let train_batch = tensor(5, Dims4::new(64, 125, 125, 1));
    let labels: Vec<usize> = (0..64).map(|i| i % 10).collect();
    group.bench_function("loss_and_gradients_64", |b| {
        b.iter(|| {
            params
                .loss_batch(black_box(&train_batch), &labels, BatchNormMode::Train)
                .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, conv, periodogram, network);
criterion_main!(benches);
