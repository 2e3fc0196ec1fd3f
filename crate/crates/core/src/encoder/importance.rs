//! Mask-based feature importance.

use serde::{Deserialize, Serialize};

use super::network::StepTrace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    /// One weight per input column, summing to 1.
    pub weights: Vec<f64>,
    /// Set when every step weight was zero and the uniform vector was returned.
    pub degenerate: bool,
}

/// `Σ_steps Σ_samples η · mask`, normalized to sum to one, where η is the
/// per-sample row sum of the step's ReLU'd decision output.
pub fn aggregate_feature_importance(traces: &[StepTrace]) -> Result<FeatureImportance> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Input("feature importance needs at least one step trace".into()))?;
    let d = first.mask.cols();
    let mut acc = vec![0.0; d];
    for t in traces {
        if t.mask.cols() != d || t.step_weight.len() != t.mask.rows() {
            return Err(Error::dim("inconsistent step traces"));
        }
        for (r, &eta) in t.step_weight.iter().enumerate() {
            for (a, m) in acc.iter_mut().zip(t.mask.row(r)) {
                *a += eta * m;
            }
        }
    }
    let total: f64 = acc.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Ok(FeatureImportance {
            weights: vec![1.0 / d as f64; d],
            degenerate: true,
        });
    }
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(FeatureImportance {
        weights: acc,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Matrix;

    fn trace(step: usize, mask: Vec<f64>, eta: f64) -> StepTrace {
        let d = mask.len();
        StepTrace {
            step,
            mask: Matrix::from_vec(1, d, mask).unwrap(),
            prior: Matrix::filled(1, d, 1.0),
            contribution: Matrix::scalar(eta),
            step_weight: vec![eta],
        }
    }

    #[test]
    fn one_hot_single_step() {
        let imp = aggregate_feature_importance(&[trace(0, vec![0.0, 0.0, 0.0, 1.0, 0.0], 0.7)]).unwrap();
        assert_eq!(imp.weights, vec![0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(!imp.degenerate);
    }

    #[test]
    fn step_weights_scale_contributions() {
        let imp = aggregate_feature_importance(&[
            trace(0, vec![1.0, 0.0, 0.0, 0.0], 2.0),
            trace(1, vec![0.0, 1.0, 0.0, 0.0], 1.0),
        ])
        .unwrap();
        assert!((imp.weights[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((imp.weights[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(&imp.weights[2..], &[0.0, 0.0]);
    }

    #[test]
    fn zero_step_weights_are_flagged() {
        let imp = aggregate_feature_importance(&[trace(0, vec![0.5, 0.5], 0.0)]).unwrap();
        assert!(imp.degenerate);
        assert_eq!(imp.weights, vec![0.5, 0.5]);
        assert!(aggregate_feature_importance(&[]).is_err());
    }
}
