use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use licsi_bench::{desk_identity, desk_slice};
use licsi_core::loewner::{assemble_pencil, build_sample_set};
use licsi_core::mor::reduce_order;
use licsi_core::pipeline::{analyze_slice, compress_slice, decompress_bytes, FeedbackPayload};

fn stages(c: &mut Criterion) {
    let h = desk_slice(1);
    let (params, codec) = desk_identity();
    let samples = build_sample_set(&h, params.n_samples, params.stride).unwrap();
    let pencil = assemble_pencil(&samples).unwrap();

    c.bench_function("assemble_pencil", |b| {
        b.iter(|| assemble_pencil(black_box(&samples)).unwrap())
    });
    c.bench_function("reduce_order", |b| {
        b.iter(|| reduce_order(black_box(&pencil), params.r_f).unwrap())
    });
    c.bench_function("analyze_slice", |b| {
        b.iter(|| analyze_slice(black_box(&h), &params).unwrap())
    });

    let payload = compress_slice(&h, &codec, &params).unwrap();
    let bytes = payload.to_bytes().unwrap();
    c.bench_function("compress_slice", |b| {
        b.iter(|| compress_slice(black_box(&h), &codec, &params).unwrap())
    });
    c.bench_function("decompress_bytes", |b| {
        b.iter(|| decompress_bytes(black_box(&bytes), &codec).unwrap())
    });
    c.bench_function("payload_parse", |b| {
        b.iter(|| FeedbackPayload::from_bytes(black_box(&bytes)).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = stages
}
criterion_main!(benches);
