//! The Fairness Disagreement Index (FDI).
//!
//! Given an `N x K` matrix of metric values (N metrics evaluated on K groups),
//! the index combines two views of how far apart each pair of metrics is:
//!
//! * value disagreement `D_ij`: the mean absolute difference of the two rows
//!   after per-row min-max normalization over groups;
//! * rank disagreement `R_ij`: the Spearman footrule between the two rows'
//!   group rankings, divided by `K`.
//!
//! `FDI = mean over i < j of (alpha * D_ij + (1 - alpha) * R_ij)`.
//!
//! `R_ij` is not rescaled, so the index ranges over
//! `[0, alpha + (1 - alpha) * floor(K^2 / 2) / K]`.

mod bootstrap;
mod compare;
mod sweep;

use serde::{Deserialize, Serialize};

pub use bootstrap::{bootstrap_fdi, BootstrapInterval, BootstrapSettings};
pub use compare::{compare_models, ComparisonRow, ModelComparison, ModelRange};
pub use sweep::{analyze_at, sweep, SweepPoint, SweepSeries, ThresholdAnalysis};

use crate::error::{Error, Result};
use crate::metrics::{GroupMetricsTable, GroupRow, ValidityPolicy};

/// Per-group base metrics that can enter the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BaseMetric {
    Fpr,
    Fnr,
    Acc,
}

impl BaseMetric {
    pub const DEFAULT_SET: [BaseMetric; 3] = [BaseMetric::Fpr, BaseMetric::Fnr, BaseMetric::Acc];

    pub fn name(self) -> &'static str {
        match self {
            BaseMetric::Fpr => "FPR",
            BaseMetric::Fnr => "FNR",
            BaseMetric::Acc => "ACC",
        }
    }

    pub fn value(self, row: &GroupRow) -> f64 {
        match self {
            BaseMetric::Fpr => row.fpr,
            BaseMetric::Fnr => row.fnr,
            BaseMetric::Acc => row.acc,
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, BaseMetric::Acc)
    }
}

/// How groups are ranked within a metric row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankOrientation {
    /// Ascending by raw value for every metric.
    #[default]
    Raw,
    /// Ascending by raw value for error-type metrics, descending for metrics
    /// where higher is better, so rank 1 is always the best-off group.
    Oriented,
}

/// `values[i][k]` is metric `i` evaluated on group `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricMatrix {
    metric_labels: Vec<String>,
    group_labels: Vec<String>,
    values: Vec<Vec<f64>>,
    higher_is_better: Vec<bool>,
}

impl MetricMatrix {
    pub fn new(
        metric_labels: Vec<String>,
        group_labels: Vec<String>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = metric_labels.len();
        Self::with_orientation(metric_labels, group_labels, values, vec![false; n])
    }

    pub fn with_orientation(
        metric_labels: Vec<String>,
        group_labels: Vec<String>,
        values: Vec<Vec<f64>>,
        higher_is_better: Vec<bool>,
    ) -> Result<Self> {
        let (n, k) = (metric_labels.len(), group_labels.len());
        if n < 2 {
            return Err(Error::InvalidMatrix(format!(
                "need at least 2 metrics, got {n}"
            )));
        }
        if k < 2 {
            return Err(Error::InvalidMatrix(format!(
                "need at least 2 groups, got {k}"
            )));
        }
        if values.len() != n || higher_is_better.len() != n {
            return Err(Error::InvalidMatrix(format!(
                "expected {n} metric rows, got {}",
                values.len()
            )));
        }
        for (label, row) in metric_labels.iter().zip(&values) {
            if row.len() != k {
                return Err(Error::InvalidMatrix(format!(
                    "row `{label}` has {} entries, expected {k}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidMatrix(format!(
                    "row `{label}` has a non-finite entry"
                )));
            }
        }
        Ok(Self {
            metric_labels,
            group_labels,
            values,
            higher_is_better,
        })
    }

    pub fn from_table(table: &GroupMetricsTable, metrics: &[BaseMetric]) -> Result<Self> {
        Self::with_orientation(
            metrics.iter().map(|m| m.name().to_string()).collect(),
            table.group_labels(),
            metrics
                .iter()
                .map(|m| table.rows.iter().map(|r| m.value(r)).collect())
                .collect(),
            metrics.iter().map(|m| m.higher_is_better()).collect(),
        )
    }

    pub fn n_metrics(&self) -> usize {
        self.metric_labels.len()
    }

    pub fn n_groups(&self) -> usize {
        self.group_labels.len()
    }

    pub fn metric_labels(&self) -> &[String] {
        &self.metric_labels
    }

    pub fn group_labels(&self) -> &[String] {
        &self.group_labels
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }
}

/// Per-row min-max normalization over groups. A constant row maps to zeros.
pub fn normalize(m: &MetricMatrix) -> Vec<Vec<f64>> {
    m.values.iter().map(|row| normalize_row(row)).collect()
}

fn normalize_row(row: &[f64]) -> Vec<f64> {
    let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return vec![0.0; row.len()];
    }
    row.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

fn pairwise(rows: &[Vec<f64>], dist: impl Fn(&[f64], &[f64]) -> f64) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(&rows[i], &rows[j]);
            out[i][j] = d;
            out[j][i] = d;
        }
    }
    out
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// `D_ij`: mean absolute difference of normalized rows.
pub fn value_disagreement(normalized: &[Vec<f64>]) -> Vec<Vec<f64>> {
    pairwise(normalized, mean_abs_diff)
}

/// 1-based ascending ranks; tied values share the average of their positions.
pub fn fractional_ranks(row: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
    let mut ranks = vec![0.0; row.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && row[order[end]] == row[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let shared = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = shared;
        }
        start = end;
    }
    ranks
}

pub fn rank_matrix(m: &MetricMatrix, orientation: RankOrientation) -> Vec<Vec<f64>> {
    m.values
        .iter()
        .zip(&m.higher_is_better)
        .map(|(row, &hib)| match orientation {
            RankOrientation::Oriented if hib => {
                fractional_ranks(&row.iter().map(|v| -v).collect::<Vec<_>>())
            }
            _ => fractional_ranks(row),
        })
        .collect()
}

/// `R_ij`: footrule distance between rank rows, divided by `K`.
pub fn rank_disagreement(ranks: &[Vec<f64>]) -> Vec<Vec<f64>> {
    pairwise(ranks, mean_abs_diff)
}

/// Largest attainable `R_ij` for `K` groups: `floor(K^2 / 2) / K`.
pub fn max_rank_disagreement(k: usize) -> f64 {
    ((k * k) / 2) as f64 / k as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdiOptions {
    pub alpha: f64,
    pub orientation: RankOrientation,
}

impl Default for FdiOptions {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            orientation: RankOrientation::Raw,
        }
    }
}

/// Everything needed to go from per-group scores at one threshold to an FDI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub fdi: FdiOptions,
    pub validity: ValidityPolicy,
    pub metrics: Vec<BaseMetric>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            fdi: FdiOptions::default(),
            validity: ValidityPolicy::default(),
            metrics: BaseMetric::DEFAULT_SET.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisagreementResult {
    pub metric_labels: Vec<String>,
    pub group_labels: Vec<String>,
    pub alpha: f64,
    pub orientation: RankOrientation,
    pub normalized: Vec<Vec<f64>>,
    pub ranks: Vec<Vec<f64>>,
    pub value_disagreement: Vec<Vec<f64>>,
    pub rank_disagreement: Vec<Vec<f64>>,
    /// Mean `D_ij` over metric pairs.
    pub mean_value_disagreement: f64,
    /// Mean `R_ij` over metric pairs.
    pub mean_rank_disagreement: f64,
    pub fdi: f64,
}

pub fn fdi(m: &MetricMatrix, opts: &FdiOptions) -> Result<DisagreementResult> {
    let alpha = opts.alpha;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let n = m.n_metrics();
    let normalized = normalize(m);
    let ranks = rank_matrix(m, opts.orientation);
    let d = value_disagreement(&normalized);
    let r = rank_disagreement(&ranks);
    let pairs = (n * (n - 1) / 2) as f64;
    let (mut sum, mut sum_d, mut sum_r) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            sum += alpha * d[i][j] + (1.0 - alpha) * r[i][j];
            sum_d += d[i][j];
            sum_r += r[i][j];
        }
    }
    Ok(DisagreementResult {
        metric_labels: m.metric_labels.clone(),
        group_labels: m.group_labels.clone(),
        alpha,
        orientation: opts.orientation,
        normalized,
        ranks,
        value_disagreement: d,
        rank_disagreement: r,
        mean_value_disagreement: sum_d / pairs,
        mean_rank_disagreement: sum_r / pairs,
        fdi: sum / pairs,
    })
}
