//! Classical comparison models and the flat TabNet baseline.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cascade::{train_single_stage, SingleStageModel, StagePlan};
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::label::FHLabel;
use crate::numeric::kernels::{argmax, softmax_row};
use crate::numeric::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    LogisticRegression,
    Ridge,
    Lda,
    Knn,
    SingleStageTabnet,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [
        BaselineKind::SingleStageTabnet,
        BaselineKind::LogisticRegression,
        BaselineKind::Ridge,
        BaselineKind::Lda,
        BaselineKind::Knn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::LogisticRegression => "logistic_regression",
            BaselineKind::Ridge => "ridge",
            BaselineKind::Lda => "lda",
            BaselineKind::Knn => "knn",
            BaselineKind::SingleStageTabnet => "single_stage_tabnet",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    pub logistic_lambda: f64,
    pub logistic_steps: usize,
    pub logistic_lr: f64,
    pub ridge_lambda: f64,
    pub ridge_intercept: bool,
    pub lda_shrinkage: f64,
    pub knn_k: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            logistic_lambda: 1e-3,
            logistic_steps: 2000,
            logistic_lr: 0.1,
            ridge_lambda: 1.0,
            ridge_intercept: true,
            lda_shrinkage: 1e-4,
            knn_k: 5,
        }
    }
}

/// Linear scores `x·W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn scores(&self, x: &Matrix) -> Result<Matrix> {
        let mut s = x.matmul(&self.weights)?;
        for r in 0..s.rows() {
            s.row_mut(r).iter_mut().zip(&self.bias).for_each(|(v, b)| *v += b);
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub classes: usize,
    pub k: usize,
}

#[derive(Debug, Clone)]
pub enum BaselineModel {
    Logistic(LinearModel),
    Ridge(LinearModel),
    Lda(LinearModel),
    Knn(KnnModel),
    SingleStage(Box<SingleStageModel>),
}

/// Labels plus a `B × C` score matrix (probabilities where the model has them).
#[derive(Debug, Clone, PartialEq)]
pub struct BaselinePrediction {
    pub labels: Vec<usize>,
    pub scores: Matrix,
}

fn check_xy(x: &Matrix, y: &[usize], classes: usize) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::dim(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    if x.rows() == 0 {
        return Err(Error::TrainingData("no training rows".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= classes) {
        return Err(Error::Label { label: bad, classes });
    }
    Ok(())
}

/// Multinomial logistic regression: full-batch gradient descent on mean
/// cross-entropy plus `λ/2 · ‖W‖²` (bias unpenalized), from zero weights.
pub fn fit_logistic(x: &Matrix, y: &[usize], classes: usize, lambda: f64, steps: usize, lr: f64) -> Result<LinearModel> {
    check_xy(x, y, classes)?;
    let (n, d) = x.shape();
    let mut model = LinearModel {
        weights: Matrix::zeros(d, classes),
        bias: vec![0.0; classes],
    };
    let mut probs = Matrix::zeros(n, classes);
    for _ in 0..steps {
        let scores = model.scores(x)?;
        for r in 0..n {
            softmax_row(scores.row(r), probs.row_mut(r));
            probs.row_mut(r)[y[r]] -= 1.0;
        }
        let grad_w = x.t_matmul(&probs)?;
        let grad_b = probs.col_sums();
        let w = model.weights.data_mut();
        for (wi, gi) in w.iter_mut().zip(grad_w.data()) {
            *wi -= lr * (gi / n as f64 + lambda * *wi);
        }
        for (bi, gi) in model.bias.iter_mut().zip(grad_b.data()) {
            *bi -= lr * gi / n as f64;
        }
    }
    if !model.weights.is_finite() {
        return Err(Error::Numeric("logistic regression diverged".into()));
    }
    Ok(model)
}

fn to_dmatrix(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

/// One-vs-rest least squares on ±1 targets: `w = (XᵀX + λI)⁻¹ Xᵀt` per class.
/// With `intercept`, columns and targets are centered first and the
/// intercept is not penalized.
pub fn fit_ridge(x: &Matrix, y: &[usize], classes: usize, lambda: f64, intercept: bool) -> Result<LinearModel> {
    check_xy(x, y, classes)?;
    let (n, d) = x.shape();
    let mut xm = to_dmatrix(x);
    let mut t = DMatrix::from_fn(n, classes, |r, c| if y[r] == c { 1.0 } else { -1.0 });
    let (x_mean, t_mean) = if intercept {
        let xm_mean: Vec<f64> = (0..d).map(|j| xm.column(j).mean()).collect();
        let tm: Vec<f64> = (0..classes).map(|c| t.column(c).mean()).collect();
        for j in 0..d {
            xm.column_mut(j).add_scalar_mut(-xm_mean[j]);
        }
        for c in 0..classes {
            t.column_mut(c).add_scalar_mut(-tm[c]);
        }
        (xm_mean, tm)
    } else {
        (vec![0.0; d], vec![0.0; classes])
    };
    let gram = xm.transpose() * &xm + DMatrix::identity(d, d) * lambda;
    let rhs = xm.transpose() * &t;
    let w = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("ridge normal equations are singular".into()))?;
    let mut weights = Matrix::zeros(d, classes);
    for j in 0..d {
        for c in 0..classes {
            weights.set(j, c, w[(j, c)]);
        }
    }
    let bias = (0..classes)
        .map(|c| t_mean[c] - (0..d).map(|j| x_mean[j] * w[(j, c)]).sum::<f64>())
        .collect();
    Ok(LinearModel { weights, bias })
}

/// Gaussian discriminant with a pooled covariance `Σ + λI`; the scores are
/// the linear discriminants `xᵀΣ⁻¹μ_c − ½μ_cᵀΣ⁻¹μ_c + ln π_c`.
pub fn fit_lda(x: &Matrix, y: &[usize], classes: usize, shrinkage: f64) -> Result<LinearModel> {
    check_xy(x, y, classes)?;
    let (n, d) = x.shape();
    let mut counts = vec![0usize; classes];
    let mut means = DMatrix::<f64>::zeros(d, classes);
    for (r, &c) in y.iter().enumerate() {
        counts[c] += 1;
        for j in 0..d {
            means[(j, c)] += x.get(r, j);
        }
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::TrainingData("LDA needs every class in the training rows".into()));
    }
    for c in 0..classes {
        means.column_mut(c).scale_mut(1.0 / counts[c] as f64);
    }
    let mut centered = to_dmatrix(x);
    for (r, &c) in y.iter().enumerate() {
        for j in 0..d {
            centered[(r, j)] -= means[(j, c)];
        }
    }
    let dof = n.saturating_sub(classes).max(1) as f64;
    let cov = centered.transpose() * &centered / dof + DMatrix::identity(d, d) * shrinkage;
    let scale = cov.diagonal().max().max(f64::MIN_POSITIVE);
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Numeric("LDA covariance is not positive definite".into()))?;
    // rounding can let an exactly singular matrix through; reject tiny pivots
    if chol.l_dirty().diagonal().iter().any(|&p| p * p <= 1e-12 * scale) {
        return Err(Error::Numeric("LDA covariance is numerically singular".into()));
    }
    let solved = chol.solve(&means);
    let mut weights = Matrix::zeros(d, classes);
    let mut bias = Vec::with_capacity(classes);
    for c in 0..classes {
        for j in 0..d {
            weights.set(j, c, solved[(j, c)]);
        }
        let quad = means.column(c).dot(&solved.column(c));
        bias.push(-0.5 * quad + (counts[c] as f64 / n as f64).ln());
    }
    Ok(LinearModel { weights, bias })
}

impl KnnModel {
    /// Indices of the `k` nearest training rows, by distance then index.
    pub fn neighbors(&self, q: &[f64]) -> Vec<usize> {
        let mut dist: Vec<(f64, usize)> = (0..self.x.rows())
            .map(|i| {
                let d2: f64 = self.x.row(i).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        dist.into_iter().take(self.k).map(|(_, i)| i).collect()
    }

    /// Majority vote; a tied vote goes to the tied class met first in
    /// neighbor order. Scores are vote fractions.
    pub fn predict(&self, x: &Matrix) -> BaselinePrediction {
        let mut scores = Matrix::zeros(x.rows(), self.classes);
        let mut labels = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let nb = self.neighbors(x.row(r));
            let mut votes = vec![0usize; self.classes];
            for &i in &nb {
                votes[self.y[i]] += 1;
            }
            let top = *votes.iter().max().expect("classes > 0");
            let label = nb.iter().map(|&i| self.y[i]).find(|&c| votes[c] == top).expect("k >= 1");
            for c in 0..self.classes {
                scores.set(r, c, votes[c] as f64 / nb.len() as f64);
            }
            labels.push(label);
        }
        BaselinePrediction { labels, scores }
    }
}

pub fn fit_knn(x: &Matrix, y: &[usize], classes: usize, k: usize) -> Result<KnnModel> {
    check_xy(x, y, classes)?;
    if k == 0 {
        return Err(Error::Spec {
            field: "knn_k".into(),
            message: "k must be at least 1".into(),
        });
    }
    Ok(KnnModel {
        x: x.clone(),
        y: y.to_vec(),
        classes,
        k: k.min(x.rows()),
    })
}

/// Fits `kind` on encoded training rows. `plan` is only used by the flat
/// TabNet, which requires four classes.
pub fn train_baseline(
    kind: BaselineKind,
    train: &FeatureMatrix,
    y: &[usize],
    classes: usize,
    params: &BaselineParams,
    plan: &StagePlan,
) -> Result<BaselineModel> {
    let x = &train.matrix;
    Ok(match kind {
        BaselineKind::LogisticRegression => BaselineModel::Logistic(fit_logistic(
            x,
            y,
            classes,
            params.logistic_lambda,
            params.logistic_steps,
            params.logistic_lr,
        )?),
        BaselineKind::Ridge => {
            BaselineModel::Ridge(fit_ridge(x, y, classes, params.ridge_lambda, params.ridge_intercept)?)
        }
        BaselineKind::Lda => BaselineModel::Lda(fit_lda(x, y, classes, params.lda_shrinkage)?),
        BaselineKind::Knn => BaselineModel::Knn(fit_knn(x, y, classes, params.knn_k)?),
        BaselineKind::SingleStageTabnet => {
            if classes != 4 {
                return Err(Error::Spec {
                    field: "classes".into(),
                    message: "the flat TabNet baseline is four-class".into(),
                });
            }
            let labels = y.iter().map(|&c| FHLabel::from_index(c)).collect::<Result<Vec<_>>>()?;
            let plan = plan.clone().with_features(x.cols());
            let model = train_single_stage(train, &labels, plan.single_stage_config(), &plan)?;
            BaselineModel::SingleStage(Box::new(model))
        }
    })
}

fn argmax_rows(scores: Matrix) -> BaselinePrediction {
    let labels = (0..scores.rows()).map(|r| argmax(scores.row(r))).collect();
    BaselinePrediction { labels, scores }
}

pub fn predict_baseline(model: &BaselineModel, x: &Matrix) -> Result<BaselinePrediction> {
    Ok(match model {
        BaselineModel::Logistic(m) => {
            let s = m.scores(x)?;
            let mut p = Matrix::zeros(s.rows(), s.cols());
            for r in 0..s.rows() {
                softmax_row(s.row(r), p.row_mut(r));
            }
            argmax_rows(p)
        }
        BaselineModel::Ridge(m) => argmax_rows(m.scores(x)?),
        BaselineModel::Lda(m) => {
            let s = m.scores(x)?;
            let mut p = Matrix::zeros(s.rows(), s.cols());
            for r in 0..s.rows() {
                softmax_row(s.row(r), p.row_mut(r));
            }
            argmax_rows(p)
        }
        BaselineModel::Knn(m) => {
            if x.cols() != m.x.cols() {
                return Err(Error::dim("query width differs from the training rows"));
            }
            m.predict(x)
        }
        BaselineModel::SingleStage(m) => {
            let preds = m.predict_matrix(x)?;
            let mut scores = Matrix::zeros(preds.len(), 4);
            for (r, p) in preds.iter().enumerate() {
                scores.row_mut(r).copy_from_slice(&p.probs);
            }
            BaselinePrediction {
                labels: preds.iter().map(|p| p.label.index()).collect(),
                scores,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ridge_without_intercept_matches_hand_solve() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let m = fit_ridge(&x, &[0, 1], 2, 0.0, false).unwrap();
        // w = Σ x t / Σ x² = (−1 + 2) / 5 for the positive class
        assert!((m.weights.get(0, 1) - 0.2).abs() < 1e-12);
        assert!((m.weights.get(0, 0) + 0.2).abs() < 1e-12);
    }

    #[test]
    fn ridge_with_intercept_flips_between_zero_and_two() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let m = fit_ridge(&x, &[0, 1], 2, 0.0, true).unwrap();
        let s = m.scores(&Matrix::from_rows(&[[0.0], [2.0]]).unwrap()).unwrap();
        assert!(s.get(0, 1) < 0.0 && s.get(1, 1) > 0.0);
    }

    #[test]
    fn knn_self_query_returns_own_label() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]]).unwrap();
        let m = fit_knn(&x, &[0, 1, 2], 3, 1).unwrap();
        assert_eq!(m.predict(&x).labels, vec![0, 1, 2]);
    }

    #[test]
    fn knn_equidistant_neighbors_break_by_index() {
        let x = Matrix::from_rows(&[[1.0], [-1.0], [3.0]]).unwrap();
        let m = fit_knn(&x, &[1, 0, 0], 2, 1).unwrap();
        assert_eq!(m.neighbors(&[0.0]), vec![0]);
        assert_eq!(m.predict(&Matrix::from_rows(&[[0.0]]).unwrap()).labels, vec![1]);
    }

    #[test]
    fn lda_without_shrinkage_on_collinear_columns_fails() {
        // second column duplicates the first
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        let err = fit_lda(&x, &[0, 0, 1, 1], 2, 0.0).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert!(fit_lda(&x, &[0, 0, 1, 1], 2, 1e-4).is_ok());
    }
}
