use fh_tabnet::data::{
    clean_table, generate_synthetic_cohort, read_csv_str, write_csv_string, Cell, FeatureEncoding, Schema,
    SyntheticSpec,
};
use fh_tabnet::eval::{prepare_fold, stratified_kfold};
use fh_tabnet::FHLabel;
use proptest::prelude::*;

fn small_cohort(seed: u64) -> fh_tabnet::data::RawTable {
    let spec = SyntheticSpec {
        n_samples: 300,
        n_features: 12,
        n_informative: 5,
        seed,
        ..Default::default()
    };
    generate_synthetic_cohort(&spec).unwrap()
}

proptest! {
    #[test]
    fn folds_partition_rows_and_stay_balanced(
        labels in prop::collection::vec(0usize..4, 40..300),
        k in 2usize..8,
        seed in any::<u64>(),
    ) {
        let mut counts = [0usize; 4];
        for &y in &labels {
            counts[y] += 1;
        }
        let folds = stratified_kfold(&labels, k, seed);
        if counts.iter().any(|&c| c > 0 && c < k) {
            prop_assert!(folds.is_err());
            return Ok(());
        }
        let folds = folds.unwrap();
        let mut seen = vec![0usize; labels.len()];
        for f in 0..k {
            for i in folds.test_indices(f) {
                seen[i] += 1;
            }
            let mut train = folds.train_indices(f);
            train.extend(folds.test_indices(f));
            train.sort_unstable();
            prop_assert_eq!(train, (0..labels.len()).collect::<Vec<_>>());
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        for c in 0..4 {
            let per_fold: Vec<usize> = (0..k)
                .map(|f| folds.test_indices(f).iter().filter(|&&i| labels[i] == c).count())
                .collect();
            let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
            prop_assert!(hi - lo <= 1, "class {} per fold {:?}", c, per_fold);
        }
    }
}

#[test]
fn held_out_rows_do_not_move_fitted_statistics() {
    let table = small_cohort(3);
    let (clean, _) = clean_table(&table, 0.05).unwrap();
    let labels = clean.labels().unwrap();
    let idx: Vec<usize> = labels.iter().map(|l| l.index()).collect();
    let folds = stratified_kfold(&idx, 5, 1).unwrap();
    let base = prepare_fold(&clean, &labels, &folds, 2).unwrap();

    // Blow up every numeric cell of the held-out rows.
    let mut perturbed = clean.clone();
    for i in folds.test_indices(2) {
        for cell in &mut perturbed.rows[i] {
            if let Cell::Number(v) = cell {
                *v = *v * 1e3 + 17.0;
            }
        }
    }
    let moved = prepare_fold(&perturbed, &labels, &folds, 2).unwrap();
    assert_eq!(base.train.encoding, moved.train.encoding);
    assert_eq!(base.train.matrix, moved.train.matrix);
    assert_ne!(base.test.matrix, moved.test.matrix);
}

#[test]
fn cohort_is_deterministic_and_seed_sensitive() {
    assert_eq!(small_cohort(5), small_cohort(5));
    assert_ne!(small_cohort(5), small_cohort(6));
}

#[test]
fn csv_round_trip_keeps_cells_scores_and_labels() {
    let table = small_cohort(8);
    let table = table.clone().with_labels(table.labels().unwrap()).unwrap();
    let schema = Schema::for_table(&table);
    let text = write_csv_string(&table, &schema).unwrap();
    let back = read_csv_str(&text, &schema).unwrap();
    assert_eq!(back, table);
}

#[test]
fn cleaning_leaves_no_missing_cells_and_encoding_is_finite() {
    let mut rates = vec![0.0; 12];
    rates[3] = 0.2;
    rates[5] = 0.02;
    let spec = SyntheticSpec {
        n_samples: 300,
        n_features: 12,
        n_informative: 5,
        missing_rates: rates,
        seed: 9,
        ..Default::default()
    };
    let table = generate_synthetic_cohort(&spec).unwrap();
    let (clean, report) = clean_table(&table, 0.05).unwrap();
    assert_eq!(report.dropped_columns.len(), 1);
    assert_eq!(report.rows_dropped, 6);
    assert_eq!(clean.missing_count(), 0);
    assert_eq!(report.final_rows, clean.n_rows());
    assert_eq!(report.input_rows, report.final_rows + report.rows_dropped);
    let fm = FeatureEncoding::fit(&clean).unwrap().transform(&clean).unwrap();
    assert!(fm.matrix.is_finite());
    assert_eq!(fm.matrix.cols(), fm.manifest.len());
}

#[test]
fn scores_map_onto_labels() {
    let table = small_cohort(10);
    let labels = table.labels().unwrap();
    for (s, l) in table.dutch_score.as_ref().unwrap().iter().zip(&labels) {
        assert_eq!(fh_tabnet::dutch_score_to_label(*s).unwrap(), *l);
    }
    assert!(labels.contains(&FHLabel::Definite));
}
