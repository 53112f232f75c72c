//! Report files: `results.csv`, `summary.json`, ROC CSVs and SVG plots.
//!
//! Layout of an output directory:
//!
//! ```text
//! results.csv
//! summary.json
//! roc_<cell>.csv, roc_<cell>.svg          pooled over all folds of a cell
//! cells/<cell>/roc_<user>_<enroll>-<probe>_fold<k>.{csv,svg}
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use super::{config_value, sanitize, CellRecord, CellStatus, RunRecord};
use crate::error::{Error, Result};
use crate::evaluation::{first_appearance, ScoreSet};
use crate::metrics::{aggregate, eer_from_roc, fnmr_at_fmr_from_roc, roc, MeanStd, RocCurve, FMR_LEVELS};

pub const RESULTS_HEADER: &str = "dataset,pipeline,scheme,attacker,session_pair,user,fold,eer,fnmr_fmr_1e2,fnmr_fmr_1e3,fnmr_fmr_1e4,n_genuine,n_impostor,warn_resolution";

const ALL: &str = "ALL";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn pair_label(enroll: &str, probe: &str) -> String {
    format!("{enroll}-{probe}")
}

/// Per-fold ROC file name inside the cell directory.
pub fn fold_roc_name(s: &ScoreSet) -> String {
    let c = &s.context;
    sanitize(&format!("roc_{}_{}_fold{}", c.user_id, pair_label(&c.enroll_session, &c.probe_session), c.fold))
}

#[allow(clippy::too_many_arguments)]
fn push_row(
    out: &mut String,
    cell: &CellRecord,
    pair: &str,
    user: &str,
    fold: &str,
    eer: f64,
    fnmr: &[f64],
    n: (usize, usize),
    warn: bool,
) {
    let k = &cell.key;
    let fields = [
        csv_field(&k.dataset_label()),
        csv_field(&k.pipeline),
        k.scheme.as_str().to_string(),
        k.attacker.as_str().to_string(),
        csv_field(pair),
        csv_field(user),
        fold.to_string(),
        eer.to_string(),
        fnmr[0].to_string(),
        fnmr[1].to_string(),
        fnmr[2].to_string(),
        n.0.to_string(),
        n.1.to_string(),
        warn.to_string(),
    ];
    out.push_str(&fields.join(","));
    out.push('\n');
}

/// Per-fold rows, then fold-mean rows (`user = fold = ALL`) per session
/// pair and, with several pairs, over all of them.
pub fn results_csv(record: &RunRecord) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for cell in &record.cells {
        for r in &cell.reports {
            let c = &r.context;
            let fnmr: Vec<f64> = r.fnmr_at_fmr.iter().map(|p| p.fnmr).collect();
            push_row(
                &mut out,
                cell,
                &pair_label(&c.enroll_session, &c.probe_session),
                &c.user_id,
                &c.fold.to_string(),
                r.eer,
                &fnmr,
                (r.n_genuine, r.n_impostor),
                r.any_resolution_warning(),
            );
        }
        let pairs = first_appearance(
            &cell
                .reports
                .iter()
                .map(|r| pair_label(&r.context.enroll_session, &r.context.probe_session))
                .collect::<Vec<_>>(),
        );
        let by_pair: BTreeMap<String, _> = aggregate(&cell.reports, |r| {
            pair_label(&r.context.enroll_session, &r.context.probe_session)
        })
        .into_iter()
        .map(|row| (row.key.clone(), row))
        .collect();
        let mut rows: Vec<(String, _)> = pairs.iter().map(|p| (p.clone(), by_pair[p].clone())).collect();
        if pairs.len() > 1 {
            rows.extend(aggregate(&cell.reports, |_| ALL.to_string()).into_iter().map(|r| (ALL.to_string(), r)));
        }
        for (pair, row) in rows {
            let fnmr: Vec<f64> = row.fnmr_at_fmr.iter().map(|m| m.mean).collect();
            push_row(
                &mut out,
                cell,
                &pair,
                ALL,
                ALL,
                row.eer.mean,
                &fnmr,
                (row.n_genuine, row.n_impostor),
                row.warn_resolution,
            );
        }
    }
    out
}

fn pooled_curve(cell: &CellRecord) -> Option<RocCurve> {
    let genuine: Vec<f64> = cell.output.score_sets.iter().flat_map(|s| s.genuine.iter().copied()).collect();
    let impostor: Vec<f64> = cell.output.score_sets.iter().flat_map(|s| s.impostor.iter().copied()).collect();
    roc(&genuine, &impostor).ok()
}

fn mean_std(m: &MeanStd) -> Value {
    json!({ "mean": m.mean, "std": m.std })
}

fn cell_summary(cell: &CellRecord, id: &str) -> Value {
    let k = &cell.key;
    let mut v = json!({
        "id": id,
        "dataset": k.dataset,
        "dataset_label": k.dataset_label(),
        "sweep": k.sweep,
        "scheme": k.scheme.as_str(),
        "attacker": k.attacker.as_str(),
        "status": match &cell.status { CellStatus::Completed => "completed", CellStatus::Failed { .. } => "failed" },
        "error": match &cell.status { CellStatus::Completed => None, CellStatus::Failed { error } => Some(error) },
        "preprocessing": cell.chain,
        "n_score_sets": cell.reports.len(),
        "skipped_users": cell.output.skipped,
        "skipped_session_pairs": cell.output.skipped_sessions,
    });
    if cell.status == CellStatus::Completed && !cell.reports.is_empty() {
        let row = &aggregate(&cell.reports, |_| ())[0];
        let mut fold_mean = json!({ "eer": mean_std(&row.eer), "warn_resolution": row.warn_resolution });
        for (l, m) in FMR_LEVELS.iter().zip(&row.fnmr_at_fmr) {
            fold_mean[format!("fnmr_at_fmr_{l:e}")] = mean_std(m);
        }
        v["fold_mean"] = fold_mean;
        if let Some(curve) = pooled_curve(cell) {
            let n_imp: usize = cell.reports.iter().map(|r| r.n_impostor).sum();
            let mut pooled = json!({ "eer": eer_from_roc(&curve), "roc_csv": format!("roc_{id}.csv") });
            for l in FMR_LEVELS {
                let p = fnmr_at_fmr_from_roc(&curve, n_imp, l);
                pooled[format!("fnmr_at_fmr_{l:e}")] = json!({ "fnmr": p.fnmr, "warn_resolution": p.warn_resolution });
            }
            v["pooled"] = pooled;
        }
    }
    v
}

pub fn summary_json(record: &RunRecord) -> Value {
    let mut pipelines = serde_json::Map::new();
    for p in &record.config.pipelines {
        pipelines.insert(p.name.clone(), Value::Array(Vec::new()));
    }
    for (i, cell) in record.cells.iter().enumerate() {
        if let Some(Value::Array(list)) = pipelines.get_mut(&cell.key.pipeline) {
            list.push(cell_summary(cell, &cell.id(i)));
        }
    }
    let n_failed = record.cells.iter().filter(|c| c.status != CellStatus::Completed).count();
    json!({
        "name": record.config.name,
        "status": if n_failed == 0 { "completed" } else { "failed" },
        "n_cells": record.cells.len(),
        "n_failed_cells": n_failed,
        "environment": record.env,
        "wall_time_s": record.wall_time_s,
        "subject_selection": "subjects: N keeps the first N subjects in manifest order",
        "aggregation": "fold_mean averages per-fold metrics; pooled concatenates all scores of a cell",
        "defaults_injected": record.defaulted,
        "config": serde_json::to_value(config_value(&record.config)).expect("YAML values map to JSON"),
        "pipelines": pipelines,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Write through a sibling temporary file so readers never see partial
/// output.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("partial");
    write(&tmp, contents)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// ROC plot (FMR against 1 − FNMR) as a standalone SVG document.
pub fn render_svg(curve: &RocCurve, title: &str) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 50.0;
    let x = |v: f64| PAD + v * SIZE;
    let y = |v: f64| PAD + (1.0 - v) * SIZE;
    let total = SIZE + 2.0 * PAD;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(s, "<title>{}</title>", esc(title));
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{total}" height="{total}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{t}</text>"#, x(t), y(0.0) + 16.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{t}</text>"#, x(0.0) - 6.0, y(t) + 4.0);
    }
    let _ = writeln!(
        s,
        r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#999" stroke-dasharray="4 4"/>"##,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    );
    let points: Vec<String> = curve
        .fmr
        .iter()
        .zip(&curve.fnmr)
        .map(|(&f, &n)| format!("{:.2},{:.2}", x(f), y(1.0 - n)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#1f77b4" stroke-width="2" points="{}"/>"##,
        points.join(" ")
    );
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#, total / 2.0, PAD - 18.0, esc(title));
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">FMR</text>"#,
        total / 2.0,
        total - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">1 - FNMR</text>"#,
        total / 2.0,
        total / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="end">EER {:.4}</text>"#,
        x(1.0) - 8.0,
        y(0.0) - 10.0,
        eer_from_roc(curve)
    );
    s.push_str("</svg>\n");
    s
}

fn write_curve(dir: &Path, stem: &str, curve: &RocCurve, title: &str) -> Result<()> {
    write(&dir.join(format!("{stem}.csv")), &curve.to_csv())?;
    write(&dir.join(format!("{stem}.svg")), &render_svg(curve, title))
}

fn emit_cell(root: &Path, cell: &CellRecord, id: &str) -> Result<()> {
    let cells = root.join("cells");
    let final_dir = cells.join(id);
    let staging = cells.join(format!("{id}.partial"));
    for d in [&final_dir, &staging] {
        if d.exists() {
            fs::remove_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
    }
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    for s in &cell.output.score_sets {
        let curve = roc(&s.genuine, &s.impostor)?;
        let c = &s.context;
        let title = format!("{} {} user {} fold {}", cell.key.dataset_label(), cell.key.pipeline, c.user_id, c.fold);
        write_curve(&staging, &fold_roc_name(s), &curve, &title)?;
    }
    fs::rename(&staging, &final_dir).map_err(|e| Error::io(&final_dir, e))?;
    if let Some(curve) = pooled_curve(cell) {
        let k = &cell.key;
        let title = format!("{} {} {} {}", k.dataset_label(), k.pipeline, k.scheme.as_str(), k.attacker.as_str());
        let stem = format!("roc_{id}");
        write_atomic(&root.join(format!("{stem}.csv")), &curve.to_csv())?;
        write_atomic(&root.join(format!("{stem}.svg")), &render_svg(&curve, &title))?;
    }
    Ok(())
}

pub fn emit_reports(record: &RunRecord, output_dir: impl AsRef<Path>) -> Result<()> {
    let root = output_dir.as_ref();
    fs::create_dir_all(root.join("cells")).map_err(|e| Error::io(root, e))?;
    record
        .cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| emit_cell(root, cell, &cell.id(i)))
        .collect::<Result<Vec<()>>>()?;
    write_atomic(&root.join("results.csv"), &results_csv(record))?;
    let summary = serde_json::to_string_pretty(&summary_json(record)).expect("summary serializes");
    write_atomic(&root.join("summary.json"), &(summary + "\n"))
}
