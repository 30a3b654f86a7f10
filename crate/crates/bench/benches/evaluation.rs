use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use expdb_bench::{dataset, labels, scored};
use expdb_core::evaluation::{
    auc_binary, confusion, evaluate_run, precision_recall_f1_macro, PredictionSet, PredictionValue,
};
use expdb_core::tasks::{create_task, generate_splits, EstimationProcedure, SplitInput, TaskType};

fn splits(c: &mut Criterion) {
    let mut group = c.benchmark_group("splits");
    for n in [1_000, 100_000] {
        let y = labels(n, 5, 7);
        for stratified in [false, true] {
            let proc = EstimationProcedure::cross_validation(10, 1, 42, stratified);
            let id = BenchmarkId::new(if stratified { "stratified" } else { "plain" }, n);
            group.bench_with_input(id, &y, |b, y| {
                b.iter(|| generate_splits(SplitInput::Labels(black_box(y)), &proc))
            });
        }
    }
    group.finish();
}

fn metrics(c: &mut Criterion) {
    let mut group = c.benchmark_group("metrics");
    for n in [1_000, 100_000] {
        let (y, s) = scored(n, 3);
        group.bench_with_input(BenchmarkId::new("auc", n), &(y, s), |b, (y, s)| {
            b.iter(|| auc_binary(black_box(y), black_box(s)))
        });
        let t = labels(n, 5, 4);
        let p = labels(n, 5, 5);
        let classes: Vec<usize> = (0..5).collect();
        group.bench_with_input(BenchmarkId::new("macro_f1", n), &(t, p), |b, (t, p)| {
            b.iter(|| precision_recall_f1_macro(&confusion(black_box(t), black_box(p), &classes).unwrap()))
        });
    }
    group.finish();
}

fn evaluate(c: &mut Criterion) {
    let ds = dataset(2_000, 4, 9);
    let task = create_task(
        &ds,
        1,
        "class",
        TaskType::SupervisedClassification,
        EstimationProcedure::cross_validation(10, 2, 1, true),
    )
    .unwrap();
    let p = PredictionSet::for_task(&task, |_, row| {
        PredictionValue::Label(["a", "b", "c"][row % 3].to_string())
    });
    c.bench_function("evaluate_run_2000x2", |b| {
        b.iter(|| evaluate_run(&task, &ds, black_box(&p)).unwrap())
    });
    let csv = p.to_csv(&task);
    c.bench_function("predictions_from_csv_2000x2", |b| {
        b.iter(|| PredictionSet::from_csv(&task, black_box(&csv)).unwrap())
    });
}

criterion_group!(benches, splits, metrics, evaluate);
criterion_main!(benches);
