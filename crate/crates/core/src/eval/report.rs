//! Plain-text rendering of a [`MetricsReport`].

use std::fmt::Write;

use super::cv::MetricsReport;
use crate::label::FHLabel;

/// Column order of the per-class F1 table.
pub const TABLE_CLASSES: [FHLabel; 4] = [
    FHLabel::Unlikely,
    FHLabel::Possible,
    FHLabel::Probable,
    FHLabel::Definite,
];

/// One row per model, one `mean ± std` F1 column (in percent) per class.
pub fn render_table(report: &MetricsReport) -> String {
    let cell = |mean: f64, std: f64| format!("{:.2} ± {:.2}", 100.0 * mean, 100.0 * std);
    let width = report
        .model_order
        .iter()
        .map(|m| m.chars().count())
        .max()
        .unwrap_or(0)
        .max("Model".len());
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "Model");
    for c in TABLE_CLASSES {
        let _ = write!(out, " | {:>15}", c.name());
    }
    out.push('\n');
    out.push_str(&"-".repeat(width + 4 * 18));
    out.push('\n');
    for name in &report.model_order {
        let Some(model) = report.models.get(name) else {
            continue;
        };
        let _ = write!(out, "{name:<width$}");
        for c in TABLE_CLASSES {
            let s = model.aggregate.f1[c.name()];
            let _ = write!(out, " | {:>15}", cell(s.mean, s.std));
        }
        out.push('\n');
    }
    out
}

/// The table followed by the cascade's stage summary, when present.
pub fn render_text(report: &MetricsReport) -> String {
    let mut out = format!(
        "Per-class F1 (%), {}-fold stratified CV, seed {}\n\n{}",
        report.k,
        report.seed,
        render_table(report)
    );
    if let Some(cascade) = report.models.get(super::cv::CASCADE_MODEL) {
        if !cascade.aggregate.stages.is_empty() {
            out.push_str("\nCascade stages (mean ± std):\n");
            for (key, v) in &cascade.aggregate.stages {
                let _ = writeln!(out, "  {key:<34} {:.4} ± {:.4}", v.mean, v.std);
            }
        }
    }
    out
}
