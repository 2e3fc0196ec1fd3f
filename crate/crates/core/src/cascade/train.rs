//! Mini-batch training of encoder paths and their composition.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{CascadeModel, SingleStageModel};
use super::plan::{Stage2Rows, StagePlan};
use crate::data::FeatureMatrix;
use crate::encoder::{exact, EncoderConfig, EncoderState};
use crate::error::{Error, Result};
use crate::label::{FHLabel, Superclass};
use crate::numeric::{derive_seed, lr_at_epoch, Adam, Matrix, Mode, Tape};

/// Per-epoch record of one trained encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub stage: String,
    pub rows: usize,
    /// Mean training loss of each epoch, weighted by batch size.
    #[serde(with = "exact::vec")]
    pub epoch_loss: Vec<f64>,
    #[serde(with = "exact::vec")]
    pub learning_rate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingLog {
    pub stages: Vec<StageLog>,
}

impl TrainingLog {
    pub fn stage(&self, name: &str) -> Option<&StageLog> {
        self.stages.iter().find(|s| s.stage == name)
    }
}

pub const STAGE1: &str = "stage1";
pub const STAGE2P: &str = "stage2p";
pub const STAGE2H: &str = "stage2h";
pub const SINGLE_STAGE: &str = "single_stage";

/// Shuffled mini-batches; a trailing batch of one row is merged into the
/// previous batch because batch statistics of a single row are degenerate.
fn epoch_batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
        let tail = batches.pop().expect("non-empty");
        batches.last_mut().expect("len > 1").extend(tail);
    }
    batches
}

fn inverse_frequency(labels: &[usize], classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; classes];
    for &y in labels {
        counts[y] += 1;
    }
    let n = labels.len() as f64;
    counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { n / (classes as f64 * c as f64) })
        .collect()
}

/// Trains one encoder path on `(x, labels)` with the plan's schedule.
/// `seed` drives both the initialization and the batch order.
pub fn train_encoder(
    stage: &str,
    config: EncoderConfig,
    x: &Matrix,
    labels: &[usize],
    plan: &StagePlan,
    seed: u64,
) -> Result<(EncoderState, StageLog)> {
    if x.rows() != labels.len() {
        return Err(Error::dim(format!("{} rows but {} labels", x.rows(), labels.len())));
    }
    if x.rows() < 2 {
        return Err(Error::TrainingData(format!("{stage}: need at least two rows")));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= config.n_classes) {
        return Err(Error::Label {
            label: bad,
            classes: config.n_classes,
        });
    }
    let weights = plan
        .class_weighting
        .then(|| inverse_frequency(labels, config.n_classes));
    let mut encoder = EncoderState::new(config, derive_seed(seed, 0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let mut adam = Adam::new(encoder.params());
    let mut log = StageLog {
        stage: stage.to_string(),
        rows: x.rows(),
        epoch_loss: Vec::with_capacity(plan.epochs),
        learning_rate: Vec::with_capacity(plan.epochs),
    };
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for epoch in 0..plan.epochs {
        let lr = lr_at_epoch(epoch, plan.base_lr, plan.lr_step, plan.lr_factor);
        let mut total = 0.0;
        for batch in epoch_batches(x.rows(), plan.batch_size, &mut rng) {
            let yb: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let mut tape = Tape::new();
            let xb = tape.constant(x.select_rows(&batch));
            let pass = encoder.forward(&mut tape, xb, Mode::Training)?;
            let loss = encoder.loss(&mut tape, &pass, &yb, weights.as_deref())?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(Error::Numeric(format!("{stage}: non-finite loss at epoch {epoch}")));
            }
            total += value * batch.len() as f64;
            encoder.params_mut().zero_grad();
            tape.backward_into(loss, encoder.params_mut())?;
            encoder.apply_bn_updates(&pass);
            adam.step(encoder.params_mut(), lr);
        }
        let epoch_loss = total / x.rows() as f64;
        log.epoch_loss.push(epoch_loss);
        log.learning_rate.push(lr);
        if let Some(patience) = plan.patience {
            if epoch_loss < best {
                best = epoch_loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        }
    }
    if plan.recalibrate_bn {
        encoder.recalibrate_batch_norms(x, plan.batch_size)?;
    }
    Ok((encoder, log))
}

/// Requires at least two rows of every FH class.
pub fn check_training_labels(labels: &[FHLabel]) -> Result<()> {
    let mut counts = [0usize; 4];
    for l in labels {
        counts[l.index()] += 1;
    }
    let short: Vec<String> = FHLabel::ALL
        .iter()
        .filter(|l| counts[l.index()] < 2)
        .map(|l| format!("{l} ({})", counts[l.index()]))
        .collect();
    if short.is_empty() {
        Ok(())
    } else {
        Err(Error::TrainingData(format!(
            "every class needs at least two training rows; short: {}",
            short.join(", ")
        )))
    }
}

fn check_inputs(train: &FeatureMatrix, labels: &[FHLabel], n_features: usize) -> Result<()> {
    if train.matrix.rows() != labels.len() {
        return Err(Error::dim(format!(
            "{} rows but {} labels",
            train.matrix.rows(),
            labels.len()
        )));
    }
    if train.matrix.cols() != n_features {
        return Err(Error::Spec {
            field: "n_features".into(),
            message: format!(
                "plan expects {n_features} features, the training matrix has {}",
                train.matrix.cols()
            ),
        });
    }
    check_training_labels(labels)
}

struct Stage2Data {
    x: Matrix,
    y: Vec<usize>,
}

fn stage2_data(x: &Matrix, labels: &[FHLabel], rows: Vec<usize>, stage: &str) -> Result<Stage2Data> {
    let y: Vec<usize> = rows.iter().map(|&i| labels[i].sub_index()).collect();
    if !(y.contains(&0) && y.contains(&1)) {
        return Err(Error::TrainingData(format!("{stage}: routed rows cover only one subclass")));
    }
    Ok(Stage2Data {
        x: x.select_rows(&rows),
        y,
    })
}

fn rows_of(route: &[Superclass], which: Superclass) -> Vec<usize> {
    route
        .iter()
        .enumerate()
        .filter(|(_, &r)| r == which)
        .map(|(i, _)| i)
        .collect()
}

fn train_stage2(
    plan: &StagePlan,
    patient: &Stage2Data,
    healthy: &Stage2Data,
    concurrent: bool,
) -> Result<((EncoderState, StageLog), (EncoderState, StageLog))> {
    let p = || {
        train_encoder(
            STAGE2P,
            plan.stage2p.clone(),
            &patient.x,
            &patient.y,
            plan,
            derive_seed(plan.seed, 2),
        )
    };
    let h = || {
        train_encoder(
            STAGE2H,
            plan.stage2h.clone(),
            &healthy.x,
            &healthy.y,
            plan,
            derive_seed(plan.seed, 3),
        )
    };
    let (p, h) = if concurrent { rayon::join(p, h) } else { (p(), h()) };
    Ok((p?, h?))
}

fn train_cascade_impl(
    train: &FeatureMatrix,
    labels: &[FHLabel],
    plan: &StagePlan,
    concurrent: bool,
) -> Result<CascadeModel> {
    plan.validate()?;
    check_inputs(train, labels, plan.n_features())?;
    let x = &train.matrix;
    let y1: Vec<usize> = labels.iter().map(|l| l.superclass().index()).collect();
    let truth: Vec<Superclass> = labels.iter().map(|l| l.superclass()).collect();
    let stage1 = || train_encoder(STAGE1, plan.stage1.clone(), x, &y1, plan, derive_seed(plan.seed, 1));

    let (stage1, p, h) = match plan.stage2_rows {
        Stage2Rows::GroundTruth => {
            let patient = stage2_data(x, labels, rows_of(&truth, Superclass::Patient), STAGE2P)?;
            let healthy = stage2_data(x, labels, rows_of(&truth, Superclass::Healthy), STAGE2H)?;
            let (s1, s2) = if concurrent {
                rayon::join(stage1, || train_stage2(plan, &patient, &healthy, true))
            } else {
                (stage1(), train_stage2(plan, &patient, &healthy, false))
            };
            let (p, h) = s2?;
            (s1?, p, h)
        }
        Stage2Rows::Stage1Routed => {
            let s1 = stage1()?;
            let logits = s1.0.infer(x)?.logits;
            let routed: Vec<Superclass> = (0..x.rows())
                .map(|r| Superclass::from_index(crate::numeric::kernels::argmax(logits.row(r))))
                .collect();
            let patient = stage2_data(x, labels, rows_of(&routed, Superclass::Patient), STAGE2P)?;
            let healthy = stage2_data(x, labels, rows_of(&routed, Superclass::Healthy), STAGE2H)?;
            let (p, h) = train_stage2(plan, &patient, &healthy, concurrent)?;
            (s1, p, h)
        }
    };
    debug_assert!(p.1.rows > 0 && h.1.rows > 0);
    Ok(CascadeModel::from_parts(
        plan.clone(),
        train.encoding.clone(),
        stage1.0,
        p.0,
        h.0,
        TrainingLog {
            stages: vec![stage1.1, p.1, h.1],
        },
    ))
}

/// Trains Stage-1 on superclass labels over all rows and each Stage-2
/// encoder on its superclass's rows (selected per [`StagePlan::stage2_rows`]).
/// Stages run one after another.
pub fn train_cascade(train: &FeatureMatrix, labels: &[FHLabel], plan: &StagePlan) -> Result<CascadeModel> {
    train_cascade_impl(train, labels, plan, false)
}

/// As [`train_cascade`] with the stages trained on the rayon pool. Each stage
/// has its own seed stream, so the result equals the sequential one.
pub fn train_cascade_concurrent(
    train: &FeatureMatrix,
    labels: &[FHLabel],
    plan: &StagePlan,
) -> Result<CascadeModel> {
    train_cascade_impl(train, labels, plan, true)
}

/// One encoder over all four classes with the plan's regimen.
pub fn train_single_stage(
    train: &FeatureMatrix,
    labels: &[FHLabel],
    config: EncoderConfig,
    plan: &StagePlan,
) -> Result<SingleStageModel> {
    if config.n_classes != 4 {
        return Err(Error::Spec {
            field: "n_classes".into(),
            message: "the single-stage model predicts four classes".into(),
        });
    }
    check_inputs(train, labels, config.n_features)?;
    let y: Vec<usize> = labels.iter().map(|l| l.index()).collect();
    let (encoder, log) = train_encoder(
        SINGLE_STAGE,
        config,
        &train.matrix,
        &y,
        plan,
        derive_seed(plan.seed, 4),
    )?;
    Ok(SingleStageModel::from_parts(
        train.encoding.clone(),
        encoder,
        TrainingLog { stages: vec![log] },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_cover_rows_and_merge_singleton_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = epoch_batches(9, 4, &mut rng);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 5]);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..9).collect::<Vec<_>>());
        assert_eq!(epoch_batches(3, 256, &mut rng).len(), 1);
    }

    #[test]
    fn inverse_frequency_weights() {
        let w = inverse_frequency(&[0, 0, 0, 1], 2);
        assert!((w[0] - 4.0 / 6.0).abs() < 1e-15);
        assert!((w[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn short_classes_are_named() {
        use FHLabel::*;
        let labels = [Definite, Definite, Probable, Possible, Possible, Unlikely, Unlikely];
        let err = check_training_labels(&labels).unwrap_err().to_string();
        assert!(err.contains("Probable (1)"), "{err}");
    }
}
