//! Trained models and routed inference.

use serde::{Deserialize, Serialize};

use super::plan::StagePlan;
use super::train::TrainingLog;
use crate::data::{FeatureEncoding, FeatureMatrix, ManifestEntry, RawTable};
use crate::encoder::{EncoderOutput, EncoderState, StepTrace};
use crate::error::{Error, Result};
use crate::label::{FHLabel, Superclass};
use crate::numeric::kernels::{argmax, softmax_row};
use crate::numeric::Matrix;

/// Per-step mask and step weight of one row through one encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowTrace {
    pub masks: Vec<Vec<f64>>,
    pub step_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadePrediction {
    pub label: FHLabel,
    /// `[p(Healthy), p(Patient)]`.
    pub stage1_probs: [f64; 2],
    /// Probabilities of the routed superclass's members, in
    /// [`Superclass::members`] order.
    pub stage2_probs: [f64; 2],
    pub route: Superclass,
    pub stage1_trace: RowTrace,
    pub stage2_trace: RowTrace,
}

impl CascadePrediction {
    /// Probability the routed Stage-2 encoder gives the final label.
    pub fn final_prob(&self) -> f64 {
        self.stage2_probs[self.label.sub_index()]
    }
}

fn probs2(logits: &[f64]) -> [f64; 2] {
    let mut p = [0.0; 2];
    softmax_row(logits, &mut p);
    p
}

fn row_trace(traces: &[StepTrace], r: usize) -> RowTrace {
    RowTrace {
        masks: traces.iter().map(|t| t.mask.row(r).to_vec()).collect(),
        step_weights: traces.iter().map(|t| t.step_weight[r]).collect(),
    }
}

/// Checks an incoming feature manifest against the model's, naming every
/// offending column.
pub fn check_manifest(expected: &[ManifestEntry], got: &[ManifestEntry]) -> Result<()> {
    if expected == got {
        return Ok(());
    }
    let describe = |e: &ManifestEntry| match &e.level {
        Some(l) => format!("{}={l}", e.source),
        None => e.source.clone(),
    };
    let missing: Vec<String> = expected.iter().filter(|e| !got.contains(e)).map(describe).collect();
    let extra: Vec<String> = got.iter().filter(|e| !expected.contains(e)).map(describe).collect();
    let mut msg = String::from("feature columns do not match the model");
    if !missing.is_empty() {
        msg.push_str(&format!("; missing: {}", missing.join(", ")));
    }
    if !extra.is_empty() {
        msg.push_str(&format!("; unexpected: {}", extra.join(", ")));
    }
    if missing.is_empty() && extra.is_empty() {
        msg.push_str("; columns are in a different order");
    }
    Err(Error::Schema(msg))
}

fn check_width(matrix: &Matrix, width: usize) -> Result<()> {
    if matrix.cols() != width {
        return Err(Error::Schema(format!(
            "model expects {width} feature columns, got {}",
            matrix.cols()
        )));
    }
    Ok(())
}

/// Stage-1 encoder plus the two Stage-2 encoders it routes to.
#[derive(Debug, Clone)]
pub struct CascadeModel {
    plan: StagePlan,
    encoding: FeatureEncoding,
    manifest: Vec<ManifestEntry>,
    stage1: EncoderState,
    stage2p: EncoderState,
    stage2h: EncoderState,
    log: TrainingLog,
}

impl CascadeModel {
    pub(crate) fn from_parts(
        plan: StagePlan,
        encoding: FeatureEncoding,
        stage1: EncoderState,
        stage2p: EncoderState,
        stage2h: EncoderState,
        log: TrainingLog,
    ) -> Self {
        Self {
            manifest: encoding.manifest(),
            plan,
            encoding,
            stage1,
            stage2p,
            stage2h,
            log,
        }
    }

    pub fn plan(&self) -> &StagePlan {
        &self.plan
    }

    pub fn encoding(&self) -> &FeatureEncoding {
        &self.encoding
    }

    pub fn manifest(&self) -> &[ManifestEntry] {
        &self.manifest
    }

    pub fn stage1(&self) -> &EncoderState {
        &self.stage1
    }

    pub fn stage2(&self, route: Superclass) -> &EncoderState {
        match route {
            Superclass::Patient => &self.stage2p,
            Superclass::Healthy => &self.stage2h,
        }
    }

    pub fn log(&self) -> &TrainingLog {
        &self.log
    }

    /// Stage-1 argmax picks the route; the routed Stage-2 argmax picks the label.
    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<CascadePrediction>> {
        check_width(x, self.manifest.len())?;
        let s1 = self.stage1.infer(x)?;
        let routes: Vec<Superclass> = (0..x.rows())
            .map(|r| Superclass::from_index(argmax(s1.logits.row(r))))
            .collect();
        let mut out: Vec<Option<CascadePrediction>> = vec![None; x.rows()];
        for route in [Superclass::Healthy, Superclass::Patient] {
            let rows: Vec<usize> = (0..x.rows()).filter(|&r| routes[r] == route).collect();
            if rows.is_empty() {
                continue;
            }
            let s2: EncoderOutput = self.stage2(route).infer(&x.select_rows(&rows))?;
            for (k, &r) in rows.iter().enumerate() {
                let logits = s2.logits.row(k);
                out[r] = Some(CascadePrediction {
                    label: FHLabel::from_route(route, argmax(logits)),
                    stage1_probs: probs2(s1.logits.row(r)),
                    stage2_probs: probs2(logits),
                    route,
                    stage1_trace: row_trace(&s1.traces, r),
                    stage2_trace: row_trace(&s2.traces, k),
                });
            }
        }
        Ok(out.into_iter().map(|p| p.expect("every row routed")).collect())
    }

    pub fn predict(&self, row: &[f64]) -> Result<CascadePrediction> {
        let x = Matrix::row_vector(row);
        Ok(self.predict_matrix(&x)?.remove(0))
    }

    /// Predicts already-encoded features after checking their manifest.
    pub fn predict_features(&self, fm: &FeatureMatrix) -> Result<Vec<CascadePrediction>> {
        check_manifest(&self.manifest, &fm.manifest)?;
        self.predict_matrix(&fm.matrix)
    }

    /// Encodes a raw table with the training-time encoding, then predicts.
    pub fn predict_table(&self, table: &RawTable) -> Result<Vec<CascadePrediction>> {
        let fm = self.encoding.transform(table)?;
        self.predict_matrix(&fm.matrix)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinglePrediction {
    pub label: FHLabel,
    /// Indexed by [`FHLabel::index`].
    pub probs: [f64; 4],
}

/// Flat four-class encoder.
#[derive(Debug, Clone)]
pub struct SingleStageModel {
    encoding: FeatureEncoding,
    manifest: Vec<ManifestEntry>,
    encoder: EncoderState,
    log: TrainingLog,
}

impl SingleStageModel {
    pub(crate) fn from_parts(encoding: FeatureEncoding, encoder: EncoderState, log: TrainingLog) -> Self {
        Self {
            manifest: encoding.manifest(),
            encoding,
            encoder,
            log,
        }
    }

    pub fn encoder(&self) -> &EncoderState {
        &self.encoder
    }

    pub fn encoding(&self) -> &FeatureEncoding {
        &self.encoding
    }

    pub fn log(&self) -> &TrainingLog {
        &self.log
    }

    /// Raw `B × 4` logits.
    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        check_width(x, self.manifest.len())?;
        Ok(self.encoder.infer(x)?.logits)
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<SinglePrediction>> {
        let logits = self.logits(x)?;
        (0..logits.rows())
            .map(|r| {
                let mut probs = [0.0; 4];
                softmax_row(logits.row(r), &mut probs);
                Ok(SinglePrediction {
                    label: FHLabel::from_index(argmax(logits.row(r)))?,
                    probs,
                })
            })
            .collect()
    }
}
