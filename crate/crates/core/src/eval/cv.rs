//! Stratified k-fold comparison of the cascade against the baselines.

use std::collections::BTreeMap;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baselines::{predict_baseline, train_baseline, BaselineKind, BaselineParams};
use super::folds::{stratified_kfold, FoldAssignment};
use super::metrics::{confusion, mean_std, roc_auc, ConfusionMatrix};
use crate::cascade::{train_cascade, CascadeModel, CascadePrediction, StagePlan};
use crate::data::{clean_table, FeatureEncoding, FeatureMatrix, PreprocessReport, RawTable, DEFAULT_MISSING_THRESHOLD};
use crate::error::{Error, Result};
use crate::label::{FHLabel, Superclass};
use crate::numeric::derive_seed;

pub const CASCADE_MODEL: &str = "cascade_tabnet";
pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSettings {
    pub k: usize,
    /// Drives the fold assignment and every per-fold model seed.
    pub seed: u64,
    pub missing_threshold: f64,
    pub cascade: bool,
    pub baselines: Vec<BaselineKind>,
    pub baseline_params: BaselineParams,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 0,
            missing_threshold: DEFAULT_MISSING_THRESHOLD,
            cascade: true,
            baselines: BaselineKind::ALL.to_vec(),
            baseline_params: BaselineParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Metrics of one binary decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub rows: usize,
    /// Name of the class counted as positive.
    pub positive: String,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    /// Absent when the evaluated rows hold only one class.
    pub auc: Option<f64>,
    /// Rows sent to this stage whose true superclass belongs to the other stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub misrouted: Option<usize>,
}

/// Stage-level metrics of the cascade. Stage-2 encoders are scored twice:
/// on the rows whose true superclass is theirs, and on the rows Stage-1
/// actually routes to them (where misrouted rows count as negatives).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeStageMetrics {
    pub stage1: BinaryMetrics,
    pub stage2p_ground_truth: BinaryMetrics,
    pub stage2h_ground_truth: BinaryMetrics,
    pub stage2p_stage1_routed: BinaryMetrics,
    pub stage2h_stage1_routed: BinaryMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub test_class_counts: BTreeMap<String, usize>,
    /// Four-class scores keyed by label name.
    pub classes: BTreeMap<String, ClassScores>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<CascadeStageMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Per-class F1 keyed by label name.
    pub f1: BTreeMap<String, MeanStd>,
    pub accuracy: MeanStd,
    pub macro_f1: MeanStd,
    /// Cascade stage metrics keyed `<stage>.<metric>`; AUCs aggregate over the
    /// folds where they are defined.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub stages: BTreeMap<String, MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub per_fold: Vec<FoldMetrics>,
    pub aggregate: Aggregate,
    pub hyperparams: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldTiming {
    pub fold: usize,
    pub model: String,
    pub seconds: f64,
}

/// Wall-clock information; the only part of a report that varies between
/// identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Timestamps {
    pub started_unix: u64,
    pub finished_unix: u64,
    pub timings: Vec<FoldTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format_version: u32,
    pub seed: u64,
    pub k: usize,
    /// Model names in presentation order.
    pub model_order: Vec<String>,
    pub models: BTreeMap<String, ModelReport>,
    pub preprocess: PreprocessReport,
    /// Per-fold class counts of the held-out rows.
    pub folds: Vec<BTreeMap<String, usize>>,
    /// Positive class of each binary decision.
    pub positive_classes: BTreeMap<String, String>,
    pub timestamps: Timestamps,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl MetricsReport {
    /// The report without wall-clock data, for reproducibility comparisons.
    pub fn without_timestamps(&self) -> MetricsReport {
        MetricsReport {
            timestamps: Timestamps::default(),
            ..self.clone()
        }
    }
}

/// Encoded train/test split of one fold. The encoding is fitted on the
/// training rows only.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    pub train_labels: Vec<FHLabel>,
    pub test_labels: Vec<FHLabel>,
}

pub fn prepare_fold(table: &RawTable, labels: &[FHLabel], folds: &FoldAssignment, fold: usize) -> Result<FoldData> {
    let train_idx = folds.train_indices(fold);
    let test_idx = folds.test_indices(fold);
    let encoding = FeatureEncoding::fit(&table.select_rows(&train_idx))?;
    Ok(FoldData {
        train: encoding.transform(&table.select_rows(&train_idx))?,
        test: encoding.transform(&table.select_rows(&test_idx))?,
        train_labels: train_idx.iter().map(|&i| labels[i]).collect(),
        test_labels: test_idx.iter().map(|&i| labels[i]).collect(),
    })
}

fn class_counts(labels: &[FHLabel]) -> BTreeMap<String, usize> {
    let mut out: BTreeMap<String, usize> = FHLabel::ALL.iter().map(|l| (l.name().to_string(), 0)).collect();
    for l in labels {
        *out.get_mut(l.name()).expect("all labels present") += 1;
    }
    out
}

fn four_class_metrics(fold: usize, data: &FoldData, pred: &[usize]) -> Result<FoldMetrics> {
    let truth: Vec<usize> = data.test_labels.iter().map(|l| l.index()).collect();
    let cm = confusion(&truth, pred, 4)?;
    let classes = FHLabel::ALL
        .iter()
        .map(|l| {
            let c = l.index();
            (
                l.name().to_string(),
                ClassScores {
                    precision: cm.precision(c),
                    recall: cm.recall(c),
                    f1: cm.f1(c),
                },
            )
        })
        .collect();
    Ok(FoldMetrics {
        fold,
        train_rows: data.train_labels.len(),
        test_rows: data.test_labels.len(),
        test_class_counts: class_counts(&data.test_labels),
        classes,
        accuracy: cm.accuracy(),
        macro_f1: cm.macro_f1(),
        confusion: cm,
        stages: None,
    })
}

fn binary(positive: &str, truth: &[bool], pred: &[bool], scores: &[f64], misrouted: Option<usize>) -> Result<BinaryMetrics> {
    let t: Vec<usize> = truth.iter().map(|&b| usize::from(b)).collect();
    let p: Vec<usize> = pred.iter().map(|&b| usize::from(b)).collect();
    let cm = confusion(&t, &p, 2)?;
    let (sensitivity, specificity) = cm.sens_spec()?;
    let auc = match roc_auc(scores, truth) {
        Ok(a) => Some(a),
        Err(Error::Metric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(BinaryMetrics {
        rows: truth.len(),
        positive: positive.to_string(),
        accuracy: cm.accuracy(),
        sensitivity,
        specificity,
        f1: cm.f1(1),
        auc,
        misrouted,
    })
}

fn stage_metrics(model: &CascadeModel, data: &FoldData, preds: &[CascadePrediction]) -> Result<CascadeStageMetrics> {
    let labels = &data.test_labels;
    let stage1 = binary(
        Superclass::Patient.name(),
        &labels.iter().map(|l| l.superclass() == Superclass::Patient).collect::<Vec<_>>(),
        &preds.iter().map(|p| p.route == Superclass::Patient).collect::<Vec<_>>(),
        &preds.iter().map(|p| p.stage1_probs[1]).collect::<Vec<_>>(),
        None,
    )?;

    let ground_truth = |route: Superclass| -> Result<BinaryMetrics> {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].superclass() == route).collect();
        let rarer = route.members()[1];
        let out = model.stage2(route).infer(&data.test.matrix.select_rows(&rows))?;
        let mut probs = vec![[0.0; 2]; rows.len()];
        for (k, p) in probs.iter_mut().enumerate() {
            crate::numeric::kernels::softmax_row(out.logits.row(k), p);
        }
        binary(
            rarer.name(),
            &rows.iter().map(|&i| labels[i] == rarer).collect::<Vec<_>>(),
            &probs.iter().map(|p| p[1] > p[0]).collect::<Vec<_>>(),
            &probs.iter().map(|p| p[1]).collect::<Vec<_>>(),
            None,
        )
    };

    let routed = |route: Superclass| -> Result<BinaryMetrics> {
        let rows: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].route == route).collect();
        let rarer = route.members()[1];
        let misrouted = rows.iter().filter(|&&i| labels[i].superclass() != route).count();
        binary(
            rarer.name(),
            &rows.iter().map(|&i| labels[i] == rarer).collect::<Vec<_>>(),
            &rows.iter().map(|&i| preds[i].label == rarer).collect::<Vec<_>>(),
            &rows.iter().map(|&i| preds[i].stage2_probs[1]).collect::<Vec<_>>(),
            Some(misrouted),
        )
    };

    Ok(CascadeStageMetrics {
        stage1,
        stage2p_ground_truth: ground_truth(Superclass::Patient)?,
        stage2h_ground_truth: ground_truth(Superclass::Healthy)?,
        stage2p_stage1_routed: routed(Superclass::Patient)?,
        stage2h_stage1_routed: routed(Superclass::Healthy)?,
    })
}

struct FoldOutput {
    metrics: Vec<(String, FoldMetrics)>,
    timings: Vec<FoldTiming>,
}

fn fold_plan(plan: &StagePlan, settings: &CvSettings, fold: usize, width: usize) -> StagePlan {
    plan.clone()
        .with_features(width)
        .with_seed(derive_seed(settings.seed, fold as u64 + 1))
}

fn run_fold(
    table: &RawTable,
    labels: &[FHLabel],
    folds: &FoldAssignment,
    fold: usize,
    plan: &StagePlan,
    settings: &CvSettings,
) -> Result<FoldOutput> {
    let data = prepare_fold(table, labels, folds, fold)?;
    let plan = fold_plan(plan, settings, fold, data.train.matrix.cols());
    let mut metrics = Vec::new();
    let mut timings = Vec::new();
    let mut timed = |model: &str, start: Instant| {
        timings.push(FoldTiming {
            fold,
            model: model.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        })
    };
    if settings.cascade {
        let start = Instant::now();
        let model = train_cascade(&data.train, &data.train_labels, &plan)?;
        let preds = model.predict_features(&data.test)?;
        let pred: Vec<usize> = preds.iter().map(|p| p.label.index()).collect();
        let mut m = four_class_metrics(fold, &data, &pred)?;
        m.stages = Some(stage_metrics(&model, &data, &preds)?);
        metrics.push((CASCADE_MODEL.to_string(), m));
        timed(CASCADE_MODEL, start);
    }
    let y_train: Vec<usize> = data.train_labels.iter().map(|l| l.index()).collect();
    for &kind in &settings.baselines {
        let start = Instant::now();
        let model = train_baseline(kind, &data.train, &y_train, 4, &settings.baseline_params, &plan)?;
        let pred = predict_baseline(&model, &data.test.matrix)?;
        metrics.push((kind.name().to_string(), four_class_metrics(fold, &data, &pred.labels)?));
        timed(kind.name(), start);
    }
    Ok(FoldOutput { metrics, timings })
}

fn aggregate(folds: &[FoldMetrics]) -> Aggregate {
    let f1 = FHLabel::ALL
        .iter()
        .map(|l| {
            let v: Vec<f64> = folds.iter().map(|f| f.classes[l.name()].f1).collect();
            (l.name().to_string(), MeanStd::of(&v))
        })
        .collect();
    let mut stages = BTreeMap::new();
    let staged: Vec<&CascadeStageMetrics> = folds.iter().filter_map(|f| f.stages.as_ref()).collect();
    if staged.len() == folds.len() && !staged.is_empty() {
        let parts: [(&str, fn(&CascadeStageMetrics) -> &BinaryMetrics); 5] = [
            ("stage1", |s| &s.stage1),
            ("stage2p_ground_truth", |s| &s.stage2p_ground_truth),
            ("stage2h_ground_truth", |s| &s.stage2h_ground_truth),
            ("stage2p_stage1_routed", |s| &s.stage2p_stage1_routed),
            ("stage2h_stage1_routed", |s| &s.stage2h_stage1_routed),
        ];
        for (name, get) in parts {
            let col = |f: fn(&BinaryMetrics) -> f64| MeanStd::of(&staged.iter().map(|s| f(get(s))).collect::<Vec<_>>());
            stages.insert(format!("{name}.accuracy"), col(|b| b.accuracy));
            stages.insert(format!("{name}.sensitivity"), col(|b| b.sensitivity));
            stages.insert(format!("{name}.specificity"), col(|b| b.specificity));
            stages.insert(format!("{name}.f1"), col(|b| b.f1));
            let aucs: Vec<f64> = staged.iter().filter_map(|s| get(s).auc).collect();
            if !aucs.is_empty() {
                stages.insert(format!("{name}.auc"), MeanStd::of(&aucs));
            }
        }
    }
    Aggregate {
        f1,
        accuracy: MeanStd::of(&folds.iter().map(|f| f.accuracy).collect::<Vec<_>>()),
        macro_f1: MeanStd::of(&folds.iter().map(|f| f.macro_f1).collect::<Vec<_>>()),
        stages,
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Cleans `table`, assigns stratified folds, and for each fold fits the
/// encoding on the training rows, trains every requested model and scores
/// the held-out rows. Each fold's models are seeded from `settings.seed`
/// mixed with the fold index; the plan's own seed is not used. With
/// `jobs > 1` folds run on a dedicated thread pool and the report equals
/// the sequential one apart from [`Timestamps`].
pub fn run_cv_experiment(table: &RawTable, plan: &StagePlan, settings: &CvSettings, jobs: usize) -> Result<MetricsReport> {
    let started = unix_now();
    let (clean, mut preprocess) = clean_table(table, settings.missing_threshold)?;
    let labels = clean.labels()?;
    let idx: Vec<usize> = labels.iter().map(|l| l.index()).collect();
    let folds = stratified_kfold(&idx, settings.k, settings.seed)?;
    preprocess.final_features = Some(FeatureEncoding::fit(&clean)?.width());

    let run = |f: usize| run_fold(&clean, &labels, &folds, f, plan, settings);
    let outputs: Vec<Result<FoldOutput>> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Input(format!("thread pool: {e}")))?;
        pool.install(|| (0..settings.k).into_par_iter().map(run).collect())
    } else {
        (0..settings.k).map(run).collect()
    };
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut model_order = Vec::new();
    if settings.cascade {
        model_order.push(CASCADE_MODEL.to_string());
    }
    model_order.extend(settings.baselines.iter().map(|k| k.name().to_string()));

    let width = preprocess.final_features.unwrap_or(0);
    let mut models = BTreeMap::new();
    for name in &model_order {
        let per_fold: Vec<FoldMetrics> = outputs
            .iter()
            .flat_map(|o| o.metrics.iter().filter(|(n, _)| n == name).map(|(_, m)| m.clone()))
            .collect();
        let hyperparams = if name == CASCADE_MODEL {
            serde_json::to_value(plan.clone().with_features(width))?
        } else if name == BaselineKind::SingleStageTabnet.name() {
            let p = plan.clone().with_features(width);
            serde_json::json!({
                "encoder": p.single_stage_config(),
                "epochs": p.epochs,
                "base_lr": p.base_lr,
                "lr_step": p.lr_step,
                "lr_factor": p.lr_factor,
                "batch_size": p.batch_size,
                "class_weighting": p.class_weighting,
            })
        } else {
            let b = &settings.baseline_params;
            match name.as_str() {
                "logistic_regression" => serde_json::json!({
                    "lambda": b.logistic_lambda, "steps": b.logistic_steps, "lr": b.logistic_lr
                }),
                "ridge" => serde_json::json!({ "lambda": b.ridge_lambda, "intercept": b.ridge_intercept }),
                "lda" => serde_json::json!({ "shrinkage": b.lda_shrinkage }),
                _ => serde_json::json!({ "k": b.knn_k }),
            }
        };
        models.insert(
            name.clone(),
            ModelReport {
                aggregate: aggregate(&per_fold),
                per_fold,
                hyperparams,
            },
        );
    }

    let fold_counts = (0..settings.k)
        .map(|f| {
            let test: Vec<FHLabel> = folds.test_indices(f).iter().map(|&i| labels[i]).collect();
            class_counts(&test)
        })
        .collect();
    let positive_classes = [
        ("stage1", Superclass::Patient.name()),
        ("stage2p", FHLabel::Definite.name()),
        ("stage2h", FHLabel::Possible.name()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    Ok(MetricsReport {
        format_version: REPORT_FORMAT_VERSION,
        seed: settings.seed,
        k: settings.k,
        model_order,
        models,
        preprocess,
        folds: fold_counts,
        positive_classes,
        timestamps: Timestamps {
            started_unix: started,
            finished_unix: unix_now(),
            timings: outputs.into_iter().flat_map(|o| o.timings).collect(),
        },
        provenance: None,
    })
}
