use fh_tabnet::cascade::{
    explain, train_cascade, train_single_stage, CascadeModel, StagePlan, STAGE1,
};
use fh_tabnet::data::{generate_synthetic_cohort, ColumnSpec, FeatureEncoding, RawTable, SyntheticSpec};
use fh_tabnet::{Error, FHLabel, Superclass};

mod common;

fn quick_plan(width: usize) -> StagePlan {
    let mut plan = StagePlan::new(width).with_seed(5).with_epochs(20);
    plan.stage1.n_a = 8;
    plan.stage1.n_d = 8;
    plan
}

#[test]
fn predictions_are_consistent_with_routing() {
    let (_, fm, labels) = common::separable(1);
    let model = train_cascade(&fm, &labels, &quick_plan(fm.matrix.cols())).unwrap();
    for p in model.predict_features(&fm).unwrap() {
        assert_eq!(p.label.superclass(), p.route);
        let s1: f64 = p.stage1_probs.iter().sum();
        let s2: f64 = p.stage2_probs.iter().sum();
        assert!((s1 - 1.0).abs() < 1e-12 && (s2 - 1.0).abs() < 1e-12);
        let routed = if p.stage1_probs[1] > p.stage1_probs[0] { Superclass::Patient } else { Superclass::Healthy };
        assert_eq!(routed, p.route);
        assert_eq!(p.stage1_trace.masks.len(), model.plan().stage1.n_steps);
        assert_eq!(p.stage2_trace.masks.len(), model.stage2(p.route).config().n_steps);
    }
}

#[test]
fn explain_weights_sum_to_one_per_stage() {
    let (_, fm, labels) = common::separable(2);
    let model = train_cascade(&fm, &labels, &quick_plan(fm.matrix.cols())).unwrap();
    let stages = explain(&model, &fm.matrix).unwrap();
    assert_eq!(stages[0].stage, STAGE1);
    assert_eq!(stages[0].rows, 64);
    for s in &stages {
        let total: f64 = s.ranking.iter().map(|f| f.weight).sum();
        assert!((total - 1.0).abs() < 1e-9, "{} sums to {total}", s.stage);
        assert!(s.ranking.windows(2).all(|w| w[0].weight >= w[1].weight));
    }
    let routed: usize = stages[1..].iter().map(|s| s.rows).sum();
    assert_eq!(routed, 64);
    assert!(matches!(explain(&model, &fm.matrix.select_rows(&[])), Err(Error::Input(_))));
}

#[test]
fn schema_mismatch_names_the_columns() {
    let (table, fm, labels) = common::separable(3);
    let model = train_cascade(&fm, &labels, &quick_plan(fm.matrix.cols())).unwrap();
    let mut renamed = table.clone();
    renamed.columns[2] = ColumnSpec::continuous("cholesterol");
    let err = model.predict_table(&renamed).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::Schema(_)), "{err:?}");
    assert!(msg.contains("x2"), "{msg}");
}

#[test]
fn single_stage_requires_four_classes() {
    let (_, fm, labels) = common::separable(4);
    let plan = quick_plan(fm.matrix.cols());
    let mut cfg = plan.single_stage_config();
    cfg.n_classes = 2;
    assert!(matches!(train_single_stage(&fm, &labels, cfg, &plan), Err(Error::Spec { .. })));
}

#[test]
fn missing_class_is_reported_before_training() {
    let (table, fm, labels) = common::separable(5);
    let keep: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != FHLabel::Definite).collect();
    let sub = table.select_rows(&keep);
    let sub_fm = fm.encoding.transform(&sub).unwrap();
    let sub_labels: Vec<FHLabel> = keep.iter().map(|&i| labels[i]).collect();
    let err = train_cascade(&sub_fm, &sub_labels, &quick_plan(fm.matrix.cols())).unwrap_err();
    assert!(err.to_string().contains("Definite"), "{err}");
}

#[test]
fn checkpoint_rejects_a_foreign_manifest() {
    let (_, fm, labels) = common::separable(6);
    let model = train_cascade(&fm, &labels, &quick_plan(fm.matrix.cols())).unwrap();
    let mut ckpt = model.to_checkpoint();
    ckpt.manifest.pop();
    assert!(CascadeModel::from_checkpoint(&ckpt).is_err());
    let extra = RawTable::new(vec![ColumnSpec::continuous("x0")], vec![]).unwrap();
    assert!(model.predict_table(&extra).is_err());
}

#[test]
fn stage1_ranks_the_generating_features_first() {
    let spec = SyntheticSpec {
        n_samples: 600,
        n_features: 10,
        n_informative: 3,
        weight_ratio: 1.0,
        noise_scale: 0.0,
        seed: 12,
        ..Default::default()
    };
    let table = generate_synthetic_cohort(&spec).unwrap();
    let labels = table.labels().unwrap();
    let fm = FeatureEncoding::fit(&table).unwrap().transform(&table).unwrap();
    let plan = StagePlan::new(fm.matrix.cols()).with_seed(3).with_epochs(40);
    let model = train_cascade(&fm, &labels, &plan).unwrap();
    let stages = explain(&model, &fm.matrix).unwrap();
    let mut top: Vec<&str> = stages[0].ranking[..3].iter().map(|f| f.feature.as_str()).collect();
    top.sort_unstable();
    let mut expected: Vec<&str> = table.columns[..3].iter().map(|c| c.name.as_str()).collect();
    expected.sort_unstable();
    assert_eq!(top, expected, "{:?}", stages[0].ranking);
}
