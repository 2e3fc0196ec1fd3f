//! Per-stage feature rankings from attention masks.

use serde::{Deserialize, Serialize};

use super::model::CascadeModel;
use super::train::{STAGE1, STAGE2H, STAGE2P};
use crate::data::ManifestEntry;
use crate::encoder::{aggregate_feature_importance, EncoderState};
use crate::error::{Error, Result};
use crate::label::Superclass;
use crate::numeric::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageImportance {
    pub stage: String,
    pub rows: usize,
    /// All step weights were zero and the uniform fallback was used.
    pub degenerate: bool,
    /// Source columns, heaviest first.
    pub ranking: Vec<RankedFeature>,
}

/// Sums encoded-column weights into their source columns (one-hot levels
/// collapse into the parent feature) and sorts them, heaviest first. Ties
/// keep manifest order.
pub fn group_by_source(weights: &[f64], manifest: &[ManifestEntry]) -> Result<Vec<RankedFeature>> {
    if weights.len() != manifest.len() {
        return Err(Error::dim(format!(
            "{} weights for {} manifest entries",
            weights.len(),
            manifest.len()
        )));
    }
    let mut grouped: Vec<RankedFeature> = Vec::new();
    for (w, entry) in weights.iter().zip(manifest) {
        match grouped.iter_mut().find(|g| g.feature == entry.source) {
            Some(g) => g.weight += w,
            None => grouped.push(RankedFeature {
                feature: entry.source.clone(),
                weight: *w,
            }),
        }
    }
    grouped.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    Ok(grouped)
}

fn stage_importance(
    stage: &str,
    encoder: &EncoderState,
    x: &Matrix,
    manifest: &[ManifestEntry],
) -> Result<StageImportance> {
    let out = encoder.infer(x)?;
    let imp = aggregate_feature_importance(&out.traces)?;
    Ok(StageImportance {
        stage: stage.to_string(),
        rows: x.rows(),
        degenerate: imp.degenerate,
        ranking: group_by_source(&imp.weights, manifest)?,
    })
}

/// Ranks source features for each stage over `x`. Stage-1 sees every row;
/// each Stage-2 encoder sees the rows Stage-1 routes to it and is omitted
/// when no row is routed there.
pub fn explain(model: &CascadeModel, x: &Matrix) -> Result<Vec<StageImportance>> {
    if x.rows() == 0 {
        return Err(Error::Input("explain needs at least one row".into()));
    }
    let manifest = model.manifest();
    let predictions = model.predict_matrix(x)?;
    let mut out = vec![stage_importance(STAGE1, model.stage1(), x, manifest)?];
    for (stage, route) in [(STAGE2P, Superclass::Patient), (STAGE2H, Superclass::Healthy)] {
        let rows: Vec<usize> = predictions
            .iter()
            .enumerate()
            .filter(|(_, p)| p.route == route)
            .map(|(i, _)| i)
            .collect();
        if !rows.is_empty() {
            out.push(stage_importance(stage, model.stage2(route), &x.select_rows(&rows), manifest)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_levels_sum_into_parent() {
        let m = |s: &str, l: Option<&str>| ManifestEntry {
            source: s.into(),
            level: l.map(Into::into),
        };
        let manifest = [
            m("smoking", Some("never")),
            m("smoking", Some("former")),
            m("smoking", Some("current")),
            m("ldl", None),
        ];
        let ranked = group_by_source(&[0.1, 0.2, 0.15, 0.55], &manifest).unwrap();
        assert_eq!(ranked[0].feature, "ldl");
        assert_eq!(ranked[1].feature, "smoking");
        assert!((ranked[1].weight - 0.45).abs() < 1e-15);
    }
}
