use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use expdb_bench::dataset;
use expdb_core::formats::{decode_container, encode_container, parse_arff, write_arff, write_dataset, FormatId};
use expdb_core::metadata::compute_meta_features;

fn arff(c: &mut Criterion) {
    let mut group = c.benchmark_group("arff");
    for rows in [100, 1_000, 10_000] {
        let ds = dataset(rows, 10, 1);
        let text = write_arff(&ds);
        group.throughput(Throughput::Bytes(text.len() as u64));
        group.bench_with_input(BenchmarkId::new("parse", rows), &text, |b, text| {
            b.iter(|| parse_arff(black_box(text)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("write", rows), &ds, |b, ds| {
            b.iter(|| write_arff(black_box(ds)))
        });
    }
    group.finish();
}

fn container(c: &mut Criterion) {
    let mut group = c.benchmark_group("mld");
    for rows in [100, 1_000, 10_000] {
        let ds = dataset(rows, 10, 2);
        let blob = encode_container(&ds);
        group.throughput(Throughput::Bytes(blob.len() as u64));
        group.bench_with_input(BenchmarkId::new("decode", rows), &blob, |b, blob| {
            b.iter(|| decode_container(black_box(blob)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("encode", rows), &ds, |b, ds| {
            b.iter(|| encode_container(black_box(ds)))
        });
    }
    group.finish();
}

fn export_and_profile(c: &mut Criterion) {
    let ds = dataset(5_000, 10, 3);
    c.bench_function("csv_export_5000", |b| {
        b.iter(|| write_dataset(black_box(&ds), FormatId::Csv))
    });
    c.bench_function("meta_features_5000", |b| {
        b.iter(|| compute_meta_features(black_box(&ds), Some("class")).unwrap())
    });
}

criterion_group!(benches, arff, container, export_and_profile);
criterion_main!(benches);
