//! Cross-validation, metrics and comparison models.

mod baselines;
mod cv;
mod folds;
mod metrics;
mod report;

pub use baselines::{
    fit_knn, fit_lda, fit_logistic, fit_ridge, predict_baseline, train_baseline, BaselineKind, BaselineModel,
    BaselineParams, BaselinePrediction, KnnModel, LinearModel,
};
pub use cv::{
    prepare_fold, run_cv_experiment, Aggregate, BinaryMetrics, CascadeStageMetrics, ClassScores, CvSettings,
    FoldData, FoldMetrics, FoldTiming, MeanStd, MetricsReport, ModelReport, Timestamps, CASCADE_MODEL,
    REPORT_FORMAT_VERSION,
};
pub use folds::{stratified_kfold, FoldAssignment};
pub use metrics::{accuracy, class_f1, confusion, mean_std, roc_auc, sens_spec, ConfusionMatrix};
pub use report::{render_table, render_text, TABLE_CLASSES};
