use std::fs;
use std::path::{Path, PathBuf};

use fh_tabnet::cascade::{explain as explain_model, train_cascade, CascadeCheckpoint, CascadeModel, StageImportance};
use fh_tabnet::data::{
    clean_table, generate_synthetic_cohort, load_csv, schema_path_for, write_csv, ColumnSpec, EncodedColumn,
    FeatureEncoding, RawTable, Schema, DEFAULT_LABEL_COLUMN, DEFAULT_SCORE_COLUMN,
};
use fh_tabnet::eval::{render_text, run_cv_experiment, MetricsReport};
use fh_tabnet::FHLabel;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Resolved;
use crate::exit::{CliError, CliResult};
use crate::{Format, Global};

pub struct Context {
    pub format: Format,
    pub out: Option<PathBuf>,
    pub resolved: Resolved,
}

impl Context {
    pub fn new(global: &Global, resolved: Resolved) -> Self {
        Self {
            format: global.format,
            out: global.out.clone(),
            resolved,
        }
    }

    /// The block embedded in every artifact a command writes.
    fn provenance(&self, command: &str, resolved: &Resolved) -> Value {
        json!({
            "tool": "fh-tabnet",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": resolved.seed,
            "config": resolved,
        })
    }

    fn out_or(&self, configured: &Option<String>, default: Option<&str>) -> Option<PathBuf> {
        self.out
            .clone()
            .or_else(|| configured.as_ref().map(PathBuf::from))
            .or_else(|| default.map(PathBuf::from))
    }
}

fn required(flag: Option<PathBuf>, configured: &Option<String>, name: &str) -> CliResult<PathBuf> {
    flag.or_else(|| configured.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::usage(format!("--{name} is required (or set paths.{name} in the config)")))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_text(path, &serde_json::to_string_pretty(value)?)
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// `preds.csv` → `preds.meta.json`.
fn meta_path_for(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

fn class_counts(table: &RawTable) -> CliResult<Value> {
    let mut counts = serde_json::Map::new();
    if table.has_targets() {
        let labels = table.labels()?;
        for l in FHLabel::ALL {
            counts.insert(l.name().into(), json!(labels.iter().filter(|&&x| x == l).count()));
        }
    }
    Ok(Value::Object(counts))
}

pub fn synth(ctx: &Context) -> CliResult<()> {
    let r = &ctx.resolved;
    let out = ctx.out_or(&r.paths.out, Some("cohort.csv")).expect("defaulted");
    let mut table = generate_synthetic_cohort(&r.synthetic)?;
    let labels = table.labels()?;
    table = table.with_labels(labels)?;
    let schema = Schema {
        provenance: Some(ctx.provenance("synth", r)),
        ..Schema::for_table(&table)
    };
    write_csv(&table, &schema, &out)?;
    let summary = json!({
        "path": out.display().to_string(),
        "schema": schema_path_for(&out).display().to_string(),
        "rows": table.n_rows(),
        "columns": table.n_cols(),
        "missing_cells": table.missing_count(),
        "class_counts": class_counts(&table)?,
    });
    match ctx.format {
        Format::Json => print_json(&summary),
        Format::Text => {
            println!("wrote {} ({} rows, {} feature columns)", out.display(), table.n_rows(), table.n_cols());
            println!("missing cells: {}", table.missing_count());
            for (k, v) in summary["class_counts"].as_object().expect("object") {
                println!("  {k:<9} {v}");
            }
            Ok(())
        }
    }
}

fn load_labelled(path: &Path) -> CliResult<RawTable> {
    let (table, _) = load_csv(path, None)?;
    if !table.has_targets() {
        return Err(CliError::data(format!(
            "{} has neither a label nor a Dutch score column",
            path.display()
        )));
    }
    Ok(table)
}

pub fn preprocess(ctx: &Context, data: Option<PathBuf>) -> CliResult<()> {
    let r = &ctx.resolved;
    let data = required(data, &r.paths.data, "data")?;
    let (table, schema) = load_csv(&data, None)?;
    let (clean, mut report) = clean_table(&table, r.missing_threshold)?;
    if clean.n_rows() > 0 {
        report.final_features = Some(FeatureEncoding::fit(&clean)?.width());
    }
    let provenance = ctx.provenance("preprocess", r);
    if let Some(out) = ctx.out_or(&r.paths.out, None) {
        let schema = Schema {
            columns: clean.columns.clone(),
            provenance: Some(provenance.clone()),
            ..schema
        };
        write_csv(&clean, &schema, &out)?;
        let mut doc = serde_json::to_value(&report)?;
        doc["provenance"] = provenance;
        write_json(&out.with_extension("report.json"), &doc)?;
    }
    match ctx.format {
        Format::Json => print_json(&report),
        Format::Text => {
            println!("rows: {} in, {} dropped, {} kept", report.input_rows, report.rows_dropped, report.final_rows);
            println!("columns: {} in, {} kept", report.input_columns, report.final_columns);
            for d in &report.dropped_columns {
                println!("  dropped {} ({:.1}% missing)", d.name, 100.0 * d.missing_rate);
            }
            if let Some(w) = report.final_features {
                println!("encoded features: {w}");
            }
            Ok(())
        }
    }
}

pub fn train(ctx: &Context, data: Option<PathBuf>, verbose: bool) -> CliResult<()> {
    let data = required(data, &ctx.resolved.paths.data, "data")?;
    let table = load_labelled(&data)?;
    let (clean, _) = clean_table(&table, ctx.resolved.missing_threshold)?;
    let labels = clean.labels()?;
    let encoding = FeatureEncoding::fit(&clean)?;
    let features = encoding.transform(&clean)?;
    let mut resolved = ctx.resolved.clone();
    resolved.plan = resolved.plan.with_features(encoding.width());
    let model = train_cascade(&features, &labels, &resolved.plan)?;
    let out = ctx.out_or(&resolved.paths.model, Some("model.json")).expect("defaulted");
    let ckpt = CascadeCheckpoint {
        provenance: Some(ctx.provenance("train", &resolved)),
        ..model.to_checkpoint()
    };
    ckpt.save(&out)?;
    if verbose {
        for s in &model.log().stages {
            for (e, (loss, lr)) in s.epoch_loss.iter().zip(&s.learning_rate).enumerate() {
                eprintln!("{} epoch {e:>4} loss {loss:.6} lr {lr}", s.stage);
            }
        }
    }
    let summary: Vec<Value> = model
        .log()
        .stages
        .iter()
        .map(|s| json!({"stage": s.stage, "rows": s.rows, "epochs": s.epoch_loss.len(), "final_loss": s.epoch_loss.last()}))
        .collect();
    match ctx.format {
        Format::Json => print_json(&json!({"checkpoint": out.display().to_string(), "stages": summary})),
        Format::Text => {
            println!("wrote {}", out.display());
            for s in &model.log().stages {
                println!(
                    "  {:<8} rows {:>5}  epochs {:>4}  final loss {:.6}",
                    s.stage,
                    s.rows,
                    s.epoch_loss.len(),
                    s.epoch_loss.last().copied().unwrap_or(f64::NAN)
                );
            }
            Ok(())
        }
    }
}

pub fn cv(ctx: &Context, data: Option<PathBuf>) -> CliResult<()> {
    let r = &ctx.resolved;
    let table = match data.or_else(|| r.paths.data.as_ref().map(PathBuf::from)) {
        Some(p) => load_labelled(&p)?,
        None => generate_synthetic_cohort(&r.synthetic)?,
    };
    let mut report = run_cv_experiment(&table, &r.plan, &r.cv, r.jobs)?;
    report.provenance = Some(ctx.provenance("cv", r));
    if let Some(out) = ctx.out_or(&r.paths.metrics, None) {
        write_json(&out, &report)?;
    }
    match ctx.format {
        Format::Json => print_json(&report),
        Format::Text => {
            print!("{}", render_text(&report));
            Ok(())
        }
    }
}

fn load_model(ctx: &Context, model: Option<PathBuf>) -> CliResult<CascadeModel> {
    let path = required(model, &ctx.resolved.paths.model, "model")?;
    let ckpt = CascadeCheckpoint::load(&path)?;
    Ok(CascadeModel::from_checkpoint(&ckpt)?)
}

/// Schema implied by a model's encoding, used when a CSV has no sidecar.
fn schema_from_encoding(encoding: &FeatureEncoding) -> Schema {
    let columns = encoding
        .columns
        .iter()
        .map(|c| match c {
            EncodedColumn::Categorical { name, levels } => ColumnSpec::categorical(name, levels.iter().cloned()),
            EncodedColumn::Continuous { name, .. } => ColumnSpec::continuous(name),
        })
        .collect();
    Schema {
        columns,
        score_column: Some(DEFAULT_SCORE_COLUMN.into()),
        label_column: Some(DEFAULT_LABEL_COLUMN.into()),
        provenance: None,
    }
}

fn load_rows(model: &CascadeModel, data: &Path) -> CliResult<RawTable> {
    let fallback = schema_from_encoding(model.encoding());
    let schema = (!schema_path_for(data).exists()).then_some(&fallback);
    Ok(load_csv(data, schema)?.0)
}

pub fn predict(ctx: &Context, model: Option<PathBuf>, data: Option<PathBuf>) -> CliResult<()> {
    let r = &ctx.resolved;
    let model = load_model(ctx, model)?;
    let data = required(data, &r.paths.data, "data")?;
    let table = load_rows(&model, &data)?;
    let preds = model.predict_table(&table)?;
    let mut w = String::new();
    w.push_str("row_id,stage1_route,stage1_p_patient,final_label,final_p\n");
    for (i, p) in preds.iter().enumerate() {
        w.push_str(&format!(
            "{i},{},{},{},{}\n",
            p.route,
            p.stage1_probs[1],
            p.label,
            p.final_prob()
        ));
    }
    match ctx.out_or(&r.paths.out, None) {
        Some(out) => {
            write_text(&out, &w)?;
            write_json(&meta_path_for(&out), &json!({"provenance": ctx.provenance("predict", r)}))?;
            if ctx.format == Format::Json {
                print_json(&json!({"path": out.display().to_string(), "rows": preds.len()}))?;
            } else {
                println!("wrote {} ({} rows)", out.display(), preds.len());
            }
            Ok(())
        }
        None => {
            print!("{w}");
            Ok(())
        }
    }
}

pub fn explain(ctx: &Context, model: Option<PathBuf>, data: Option<PathBuf>) -> CliResult<()> {
    let r = &ctx.resolved;
    let model = load_model(ctx, model)?;
    let data = required(data, &r.paths.data, "data")?;
    let table = load_rows(&model, &data)?;
    let x = model.encoding().transform(&table)?.matrix;
    let stages: Vec<StageImportance> = explain_model(&model, &x)?;
    let doc = json!({"stages": stages, "provenance": ctx.provenance("explain", r)});
    if let Some(out) = ctx.out_or(&r.paths.out, None) {
        write_json(&out, &doc)?;
    }
    match ctx.format {
        Format::Json => print_json(&doc),
        Format::Text => {
            for s in &stages {
                println!("{} ({} rows{})", s.stage, s.rows, if s.degenerate { ", degenerate" } else { "" });
                for f in &s.ranking {
                    println!("  {:<28} {:.4}", f.feature, f.weight);
                }
            }
            Ok(())
        }
    }
}

pub fn report(ctx: &Context, metrics: Option<PathBuf>) -> CliResult<()> {
    let path = required(metrics, &ctx.resolved.paths.metrics, "metrics")?;
    let text = fs::read_to_string(&path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let report: MetricsReport =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{} is not a metrics report: {e}", path.display())))?;
    let rendered = render_text(&report);
    if let Some(out) = &ctx.out {
        write_text(out, &rendered)?;
    }
    match ctx.format {
        Format::Json => print_json(&report),
        Format::Text => {
            print!("{rendered}");
            Ok(())
        }
    }
}
