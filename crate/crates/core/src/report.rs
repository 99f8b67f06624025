//! Analysis reports: a single JSON document, or a directory of CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::disagreement::{BootstrapInterval, ModelComparison, SweepSeries, ThresholdAnalysis};
use crate::error::{Error, Result};
use crate::grouping::AssignmentDiagnostics;
use crate::io::{csv_field, PLOT_HEADER};
use crate::metrics::DivergenceMatrix;
use crate::pipeline::ResolvedConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    /// One JSON document.
    #[default]
    Json,
    /// A directory of CSV tables.
    Tabular,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedThreshold {
    pub tau: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    pub n_pairs: usize,
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub n_dropped_identities: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub dropped_identities: Vec<String>,
    pub assignment: AssignmentDiagnostics,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub excluded_groups: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failed_thresholds: Vec<FailedThreshold>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRun {
    pub label: String,
    pub config: ResolvedConfig,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ResolvedConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analysis: Option<ThresholdAnalysis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<DivergenceMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapInterval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSeries>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub models: Vec<ModelRun>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ModelComparison>,
}

impl AnalysisReport {
    pub fn new(command: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: None,
            diagnostics: None,
            analysis: None,
            divergence: None,
            bootstrap: None,
            sweep: None,
            models: vec![],
            comparison: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Named CSV tables, in a fixed order. Sections without data are skipped.
    pub fn tables(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if let Some(a) = &self.analysis {
            out.push((
                "group_metrics.csv",
                group_metrics_table(&[(a.table.tau, a)]),
            ));
            out.push(("disparities.csv", disparity_table(&[(a.table.tau, a)])));
            out.push(("disagreement.csv", disagreement_table(&[(a.table.tau, a)])));
            out.push(("fdi_by_threshold.csv", fdi_table(&[(a.table.tau, a)])));
        }
        if let Some(s) = &self.sweep {
            let pts: Vec<(f64, &ThresholdAnalysis)> = s.valid_points().collect();
            out.push(("group_metrics.csv", group_metrics_table(&pts)));
            out.push(("disparities.csv", disparity_table(&pts)));
            out.push(("disagreement.csv", disagreement_table(&pts)));
            out.push(("fdi_by_threshold.csv", fdi_table(&pts)));
            out.push(("plot_series.csv", plot_series_csv(s)));
        }
        if let Some(d) = &self.divergence {
            out.push(("divergence.csv", divergence_table(d)));
        }
        if let Some(b) = &self.bootstrap {
            let mut t = String::from("point,ci_low,ci_high,n_resamples,n_failed,n_redraws\n");
            let _ = writeln!(
                t,
                "{},{},{},{},{},{}",
                b.point, b.ci_low, b.ci_high, b.n_resamples, b.n_failed, b.n_redraws
            );
            out.push(("bootstrap.csv", t));
        }
        if let Some(c) = &self.comparison {
            out.push(("fdi_ranges.csv", fdi_ranges_table(c)));
            out.push(("fdi_comparison.csv", comparison_table(c)));
        }
        let exclusions = self.exclusions_table();
        if exclusions.lines().count() > 1 {
            out.push(("exclusions.csv", exclusions));
        }
        out
    }

    fn exclusions_table(&self) -> String {
        let mut t = String::from("kind,item,detail\n");
        let mut diag: Vec<(&str, &Diagnostics)> = Vec::new();
        if let Some(d) = &self.diagnostics {
            diag.push(("", d));
        }
        for m in &self.models {
            diag.push((&m.label, &m.diagnostics));
        }
        for (prefix, d) in diag {
            let kind = |k: &str| {
                if prefix.is_empty() {
                    k.to_string()
                } else {
                    format!("{prefix}:{k}")
                }
            };
            for id in &d.dropped_identities {
                let _ = writeln!(
                    t,
                    "{},{},non-alphabetic initial",
                    kind("dropped_identity"),
                    csv_field(id)
                );
            }
            let a = &d.assignment;
            for (k, n) in [
                ("cross_group_excluded", a.cross_group_excluded),
                ("cross_group_duplicated", a.cross_group_duplicated),
                ("unknown_identity", a.unknown_identity),
            ] {
                if n > 0 {
                    let _ = writeln!(t, "{},pairs,{n}", kind(k));
                }
            }
            for g in &d.excluded_groups {
                let _ = writeln!(
                    t,
                    "{},{},validity policy",
                    kind("excluded_group"),
                    csv_field(g)
                );
            }
            for f in &d.failed_thresholds {
                let _ = writeln!(
                    t,
                    "{},{},{}",
                    kind("failed_threshold"),
                    f.tau,
                    csv_field(&f.reason)
                );
            }
        }
        t
    }
}

/// Table II shape: one row per group.
fn group_metrics_table(points: &[(f64, &ThresholdAnalysis)]) -> String {
    let mut t = String::from("threshold,group,accuracy,fpr,fnr,n_genuine,n_impostor\n");
    for (tau, a) in points {
        for r in &a.table.rows {
            let _ = writeln!(
                t,
                "{tau},{},{},{},{},{},{}",
                csv_field(&r.group),
                r.acc,
                r.fpr,
                r.fnr,
                r.n_genuine,
                r.n_impostor
            );
        }
    }
    t
}

fn disparity_table(points: &[(f64, &ThresholdAnalysis)]) -> String {
    let mut t = String::from("threshold,delta_fpr,delta_fnr,delta_acc,acc_min,worst_fpr_group,worst_fnr_group,worst_acc_group\n");
    for (tau, a) in points {
        let d = &a.disparities;
        let _ = writeln!(
            t,
            "{tau},{},{},{},{},{},{},{}",
            d.delta_fpr,
            d.delta_fnr,
            d.delta_acc,
            d.acc_min,
            csv_field(&d.worst_fpr_group),
            csv_field(&d.worst_fnr_group),
            csv_field(&d.worst_acc_group)
        );
    }
    t
}

fn disagreement_table(points: &[(f64, &ThresholdAnalysis)]) -> String {
    let mut t = String::from("threshold,metric_i,metric_j,value_disagreement,rank_disagreement\n");
    for (tau, a) in points {
        let r = &a.disagreement;
        for i in 0..r.metric_labels.len() {
            for j in i + 1..r.metric_labels.len() {
                let _ = writeln!(
                    t,
                    "{tau},{},{},{},{}",
                    r.metric_labels[i],
                    r.metric_labels[j],
                    r.value_disagreement[i][j],
                    r.rank_disagreement[i][j]
                );
            }
        }
    }
    t
}

/// Table IV shape: threshold and FDI, plus the two mean components.
fn fdi_table(points: &[(f64, &ThresholdAnalysis)]) -> String {
    let mut t = String::from("threshold,fdi,mean_value_disagreement,mean_rank_disagreement\n");
    for (tau, a) in points {
        let r = &a.disagreement;
        let _ = writeln!(
            t,
            "{tau},{},{},{}",
            r.fdi, r.mean_value_disagreement, r.mean_rank_disagreement
        );
    }
    t
}

fn divergence_table(d: &DivergenceMatrix) -> String {
    let mut t = String::from("class,group_i,group_j,wasserstein\n");
    let class = serde_json::to_value(d.class_filter)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    for i in 0..d.group_labels.len() {
        for j in i + 1..d.group_labels.len() {
            let v = d.values[i][j].map_or_else(String::new, |v| v.to_string());
            let _ = writeln!(
                t,
                "{class},{},{},{v}",
                csv_field(&d.group_labels[i]),
                csv_field(&d.group_labels[j])
            );
        }
    }
    t
}

/// Table V shape: model label and FDI range.
fn fdi_ranges_table(c: &ModelComparison) -> String {
    let mut t = String::from("model,fdi_range,fdi_max,fdi_min\n");
    for r in &c.ranges {
        let _ = writeln!(
            t,
            "{},{},{},{}",
            csv_field(&r.model),
            r.range_string(),
            r.fdi_max,
            r.fdi_min
        );
    }
    t
}

fn comparison_table(c: &ModelComparison) -> String {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    let mut t = format!(
        "threshold,{},{},difference\n",
        csv_field(&format!("fdi_{}", c.ranges[0].model)),
        csv_field(&format!("fdi_{}", c.ranges[1].model))
    );
    for r in &c.rows {
        let _ = writeln!(
            t,
            "{},{},{},{}",
            r.tau,
            opt(r.fdi_a),
            opt(r.fdi_b),
            opt(r.difference)
        );
    }
    t
}

/// Long-form rows `(tau, metric, scope, value)`: per-group FPR/FNR/ACC, the
/// four aggregate disparities, then FDI. Failed thresholds emit no rows.
pub fn plot_series_rows(s: &SweepSeries) -> Vec<(f64, String, String, f64)> {
    let mut rows = Vec::new();
    for (tau, a) in s.valid_points() {
        for r in &a.table.rows {
            for (m, v) in [("FPR", r.fpr), ("FNR", r.fnr), ("ACC", r.acc)] {
                rows.push((tau, m.to_string(), r.group.clone(), v));
            }
        }
        let d = &a.disparities;
        for (m, v) in [
            ("delta_fpr", d.delta_fpr),
            ("delta_fnr", d.delta_fnr),
            ("delta_acc", d.delta_acc),
            ("acc_min", d.acc_min),
            ("FDI", a.fdi()),
        ] {
            rows.push((tau, m.to_string(), "aggregate".to_string(), v));
        }
    }
    rows
}

pub fn plot_series_csv(s: &SweepSeries) -> String {
    let mut t = PLOT_HEADER.join(",");
    t.push('\n');
    for (tau, m, scope, v) in plot_series_rows(s) {
        let _ = writeln!(t, "{tau},{m},{},{v}", csv_field(&scope));
    }
    t
}

pub fn write_plot_series(s: &SweepSeries, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &plot_series_csv(s))
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::File {
        path: path.to_path_buf(),
        message: format!("cannot write: {e}"),
    })
}

/// JSON goes to `path` as one file; tabular output creates `path` as a
/// directory and writes one CSV per table.
pub fn write_report(
    r: &AnalysisReport,
    format: OutputFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    match format {
        OutputFormat::Json => write_file(path, &r.to_json()?),
        OutputFormat::Tabular => {
            fs::create_dir_all(path).map_err(|e| Error::File {
                path: path.to_path_buf(),
                message: format!("cannot create directory: {e}"),
            })?;
            for (name, content) in r.tables() {
                write_file(&path.join(name), &content)?;
            }
            Ok(())
        }
    }
}
