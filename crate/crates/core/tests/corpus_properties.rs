use std::collections::HashSet;

use hijackmap::corpus::{
    generate_synthetic_corpus, ingest_records, split_dataset, validation_partition, Dataset, SplitSpec, StrataCounts,
};
use proptest::prelude::*;

fn ids(ds: &Dataset) -> HashSet<String> {
    ds.iter().map(|r| r.id.clone()).collect()
}

#[test]
fn ingest_426_lines() {
    let ds = generate_synthetic_corpus(7, 105, 321);
    let report = ingest_records(ds.to_jsonl().as_bytes(), "mem", false).unwrap();
    assert_eq!(report.dataset.len(), 426);
    assert_eq!(report.read, 426);
    assert_eq!(report.deduped, 0);
}

#[test]
fn reference_partition_counts() {
    let ds = generate_synthetic_corpus(7, 105, 321);
    let (train, test) = split_dataset(&ds, &SplitSpec::reference(7)).unwrap();
    assert_eq!(train.class_counts(), (220, 76));
    assert_eq!(test.class_counts(), (101, 29));
    assert!(ids(&train).is_disjoint(&ids(&test)));
    let again = split_dataset(&ds, &SplitSpec::reference(7)).unwrap();
    assert_eq!((train, test), again);
}

#[test]
fn synthetic_reference_sizes() {
    let ds = generate_synthetic_corpus(7, 76, 220);
    assert_eq!(ds.len(), 296);
    assert_eq!(ds.class_counts(), (220, 76));
    assert!(generate_synthetic_corpus(7, 0, 0).is_empty());
    assert_eq!(generate_synthetic_corpus(7, 5, 5).to_jsonl(), generate_synthetic_corpus(7, 5, 5).to_jsonl());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip(seed in any::<u64>(), pos in 0..20usize, neg in 0..20usize) {
        let ds = generate_synthetic_corpus(seed, pos, neg);
        let back = ingest_records(ds.to_jsonl().as_bytes(), &ds.provenance, false).unwrap().dataset;
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn stratified_split_partitions(
        seed in any::<u64>(),
        pos in 10..30usize,
        neg in 10..30usize,
        tr_pos in 0..5usize,
        te_pos in 0..5usize,
        tr_neg in 0..5usize,
        te_neg in 0..5usize,
    ) {
        let ds = generate_synthetic_corpus(seed, pos, neg);
        let spec = SplitSpec {
            train_count: tr_pos + tr_neg,
            test_count: te_pos + te_neg,
            seed,
            stratified: true,
            strata: Some(StrataCounts { train_relevant: tr_pos, test_relevant: te_pos }),
        };
        let (train, test) = split_dataset(&ds, &spec).unwrap();
        prop_assert_eq!(train.class_counts(), (tr_neg, tr_pos));
        prop_assert_eq!(test.class_counts(), (te_neg, te_pos));
        let (a, b) = (ids(&train), ids(&test));
        prop_assert!(a.is_disjoint(&b));
        prop_assert!(a.union(&b).all(|id| ds.contains(id)));
        prop_assert_eq!(a.len() + b.len(), spec.train_count + spec.test_count);
    }

    #[test]
    fn unstratified_split_partitions(seed in any::<u64>(), n in 1..40usize, tr in 0..40usize, te in 0..40usize) {
        let ds = generate_synthetic_corpus(seed, n / 2, n - n / 2);
        prop_assume!(tr + te <= n);
        let spec = SplitSpec { train_count: tr, test_count: te, seed, stratified: false, strata: None };
        let (train, test) = split_dataset(&ds, &spec).unwrap();
        prop_assert_eq!((train.len(), test.len()), (tr, te));
        prop_assert!(ids(&train).is_disjoint(&ids(&test)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn validation_sizes(n in 1..200usize, fraction in 0.0..0.999f64, seed in any::<u64>()) {
        let ds = generate_synthetic_corpus(seed, n / 3, n - n / 3);
        let (fit, val) = validation_partition(&ds, fraction, seed).unwrap();
        prop_assert_eq!(fit.len() + val.len(), n);
        let want = ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
        prop_assert_eq!(val.len(), want.min(n));
        prop_assert!(ids(&fit).is_disjoint(&ids(&val)));
    }
}
