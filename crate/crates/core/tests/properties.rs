use expdb_core::evaluation::{auc_binary, confusion, precision_recall_f1_macro};
use expdb_core::formats::{
    decode_container, encode_container, parse_arff, write_arff, AttributeKind, AttributeSpec, Cell, Dataset,
};
use expdb_core::metadata::{class_entropy, default_accuracy};
use expdb_core::tasks::{generate_splits, EstimationProcedure, SplitInput};
use proptest::collection::vec;
use proptest::prelude::*;

fn text() -> impl Strategy<Value = String> {
    prop_oneof!["[a-z][a-z0-9_]{0,6}", "[ -~]{1,8}", "[a-zé ,'\"%{}\\\\\t\n?@]{1,6}",]
}

fn kind() -> impl Strategy<Value = AttributeKind> {
    prop_oneof![
        Just(AttributeKind::Numeric),
        Just(AttributeKind::String),
        vec(text(), 1..5).prop_map(|mut labels| {
            labels.sort();
            labels.dedup();
            AttributeKind::Nominal(labels)
        }),
    ]
}

fn cell(kind: &AttributeKind) -> BoxedStrategy<Cell> {
    let present = match kind {
        AttributeKind::Numeric => prop_oneof![
            any::<f64>().prop_filter("finite", |v| v.is_finite()),
            (-1000i32..1000).prop_map(f64::from),
        ]
        .prop_map(Cell::Number)
        .boxed(),
        AttributeKind::Nominal(labels) => (0..labels.len()).prop_map(Cell::Category).boxed(),
        AttributeKind::String => prop_oneof![text(), Just(String::new())].prop_map(Cell::Text).boxed(),
    };
    prop_oneof![4 => present, 1 => Just(Cell::Missing)].boxed()
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (text(), vec(kind(), 1..8), 0usize..40).prop_flat_map(|(relation, kinds, n_rows)| {
        let attributes: Vec<AttributeSpec> = kinds
            .into_iter()
            .enumerate()
            .map(|(i, kind)| AttributeSpec {
                name: format!("a{i}"),
                kind,
            })
            .collect();
        let row: Vec<BoxedStrategy<Cell>> = attributes.iter().map(|a| cell(&a.kind)).collect();
        vec(row, n_rows).prop_map(move |rows| Dataset::new(relation.clone(), attributes.clone(), rows).unwrap())
    })
}

fn bits_equal(a: &Dataset, b: &Dataset) -> bool {
    a.relation == b.relation
        && a.attributes == b.attributes
        && a.rows.len() == b.rows.len()
        && a.rows.iter().zip(&b.rows).all(|(x, y)| {
            x.iter().zip(y).all(|(c, d)| match (c, d) {
                (Cell::Number(p), Cell::Number(q)) => p.to_bits() == q.to_bits(),
                _ => c == d,
            })
        })
}

proptest! {
    #[test]
    fn arff_round_trip(ds in dataset()) {
        let text = write_arff(&ds);
        let back = parse_arff(&text).unwrap();
        prop_assert!(bits_equal(&ds, &back), "{text}");
        prop_assert_eq!(write_arff(&back), text);
    }

    #[test]
    fn container_round_trip(ds in dataset()) {
        let blob = encode_container(&ds);
        prop_assert!(bits_equal(&ds, &decode_container(&blob).unwrap()));
    }

    #[test]
    fn parsers_never_panic(bytes in vec(any::<u8>(), 0..256)) {
        let _ = decode_container(&bytes);
        let _ = parse_arff(&String::from_utf8_lossy(&bytes));
    }

    #[test]
    fn split_balance(
        labels in vec(0usize..4, 2..120),
        k in 2u32..12,
        repeats in 1u32..3,
        seed in any::<u64>(),
        stratified in any::<bool>(),
    ) {
        prop_assume!(k as usize <= labels.len());
        let proc = EstimationProcedure::cross_validation(k, repeats, seed, stratified);
        let a = generate_splits(SplitInput::Labels(&labels), &proc).unwrap();
        prop_assert_eq!(&a, &generate_splits(SplitInput::Labels(&labels), &proc).unwrap());
        for r in 0..repeats as usize {
            let sizes = a.fold_sizes(r);
            prop_assert_eq!(sizes.iter().sum::<usize>(), labels.len());
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            if stratified {
                for class in 0..4 {
                    let per_fold: Vec<usize> = (0..k)
                        .map(|f| a.test_rows(r, f).iter().filter(|&&row| labels[row] == class).count())
                        .collect();
                    prop_assert!(per_fold.iter().max().unwrap() - per_fold.iter().min().unwrap() <= 1);
                }
            }
        }
    }

    #[test]
    fn entropy_and_default_accuracy_bounds(labels in vec(0u8..6, 1..200)) {
        let h = class_entropy(&labels).unwrap();
        let mut distinct = labels.clone();
        distinct.sort();
        distinct.dedup();
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (distinct.len() as f64).log2() + 1e-12);
        let d = default_accuracy(&labels).unwrap();
        prop_assert!(d >= 1.0 / distinct.len() as f64 - 1e-12 && d <= 1.0);
    }

    #[test]
    fn auc_complement_symmetry(pairs in vec((any::<bool>(), 0u8..10), 2..60)) {
        let y: Vec<bool> = pairs.iter().map(|p| p.0).collect();
        prop_assume!(y.iter().any(|&t| t) && y.iter().any(|&t| !t));
        let s: Vec<f64> = pairs.iter().map(|p| f64::from(p.1) / 10.0).collect();
        let flipped: Vec<bool> = y.iter().map(|t| !t).collect();
        let a = auc_binary(&y, &s).unwrap();
        prop_assert!((a + auc_binary(&flipped, &s).unwrap() - 1.0).abs() < 1e-12);
        let negated: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((a + auc_binary(&y, &negated).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn macro_scores_ignore_row_order(
        pairs in vec((0usize..3, 0usize..3), 1..50),
        rotation in 0usize..50,
    ) {
        let classes = [0usize, 1, 2];
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let mut rotated = pairs.clone();
        rotated.rotate_left(rotation % pairs.len());
        let (rt, rp): (Vec<usize>, Vec<usize>) = rotated.into_iter().unzip();
        let a = precision_recall_f1_macro(&confusion(&t, &p, &classes).unwrap());
        let b = precision_recall_f1_macro(&confusion(&rt, &rp, &classes).unwrap());
        prop_assert_eq!(a, b);
        prop_assert!((0.0..=1.0).contains(&a.f1));
    }
}
