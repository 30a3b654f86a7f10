//! Synthetic inputs shared by the benchmarks.

use expdb_core::formats::{AttributeSpec, Cell, Dataset};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// `n_rows` rows of `n_numeric` numeric columns, one string column and a
/// three-class nominal target named `class`.
pub fn dataset(n_rows: usize, n_numeric: usize, seed: u64) -> Dataset {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut attributes: Vec<AttributeSpec> = (0..n_numeric)
        .map(|i| AttributeSpec::numeric(format!("x{i}")))
        .collect();
    attributes.push(AttributeSpec::string("note"));
    attributes.push(AttributeSpec::nominal("class", ["a", "b", "c"]));
    let rows = (0..n_rows)
        .map(|r| {
            let mut row: Vec<Cell> = (0..n_numeric)
                .map(|_| {
                    if rng.random_bool(0.05) {
                        Cell::Missing
                    } else {
                        Cell::Number(rng.random_range(-100.0..100.0))
                    }
                })
                .collect();
            row.push(Cell::Text(format!("row {r}")));
            row.push(Cell::Category(rng.random_range(0..3)));
            row
        })
        .collect();
    Dataset::new("bench", attributes, rows).expect("valid dataset")
}

/// Class labels drawn uniformly from `0..k`.
pub fn labels(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

/// Binary truth with noisy scores.
pub fn scored(n: usize, seed: u64) -> (Vec<bool>, Vec<f64>) {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let y = rng.random_bool(0.4);
            let s = if y { 0.3 } else { 0.0 } + rng.random_range(0.0..0.7);
            (y, s)
        })
        .unzip()
}
