//! Per-group verification metrics, disparities and score-distribution
//! divergence.

mod wasserstein;

use serde::{Deserialize, Serialize};

pub use wasserstein::wasserstein_1d;

use crate::error::{Error, Result};
use crate::grouping::PairGroupAssignment;
use crate::verification::{rates, ConfusionCounts, LabeledScore, Rates};

/// Minimum per-group pair counts for a group to enter the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityPolicy {
    pub min_genuine: u64,
    pub min_impostor: u64,
}

impl Default for ValidityPolicy {
    fn default() -> Self {
        Self {
            min_genuine: 1,
            min_impostor: 1,
        }
    }
}

impl ValidityPolicy {
    pub fn admits(&self, c: &ConfusionCounts) -> bool {
        let floor_g = self.min_genuine.max(1);
        let floor_i = self.min_impostor.max(1);
        c.n_genuine() >= floor_g && c.n_impostor() >= floor_i
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRow {
    pub group: String,
    pub fpr: f64,
    pub fnr: f64,
    pub acc: f64,
    pub n_genuine: u64,
    pub n_impostor: u64,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcludedGroup {
    pub group: String,
    pub n_genuine: u64,
    pub n_impostor: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupMetricsTable {
    pub tau: f64,
    pub rows: Vec<GroupRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub excluded: Vec<ExcludedGroup>,
}

impl GroupMetricsTable {
    /// Builds a table from per-group counts, dropping groups the policy rejects.
    pub fn from_counts(
        tau: f64,
        labels: &[String],
        counts: &[ConfusionCounts],
        validity: &ValidityPolicy,
    ) -> Result<Self> {
        let mut rows = Vec::new();
        let mut excluded = Vec::new();
        for (label, c) in labels.iter().zip(counts) {
            if validity.admits(c) {
                let Rates { fpr, fnr, acc } = rates(c)?;
                rows.push(GroupRow {
                    group: label.clone(),
                    fpr,
                    fnr,
                    acc,
                    n_genuine: c.n_genuine(),
                    n_impostor: c.n_impostor(),
                    counts: *c,
                });
            } else {
                excluded.push(ExcludedGroup {
                    group: label.clone(),
                    n_genuine: c.n_genuine(),
                    n_impostor: c.n_impostor(),
                });
            }
        }
        if rows.len() < 2 {
            return Err(Error::TooFewValidGroups {
                valid: rows.len(),
                excluded: excluded.into_iter().map(|e| e.group).collect(),
            });
        }
        Ok(Self {
            tau,
            rows,
            excluded,
        })
    }

    /// A table from known per-group rates, without underlying counts.
    pub fn from_rates(tau: f64, rows: impl IntoIterator<Item = (String, Rates)>) -> Result<Self> {
        let rows: Vec<GroupRow> = rows
            .into_iter()
            .map(|(group, r)| GroupRow {
                group,
                fpr: r.fpr,
                fnr: r.fnr,
                acc: r.acc,
                n_genuine: 0,
                n_impostor: 0,
                counts: ConfusionCounts::default(),
            })
            .collect();
        if rows.len() < 2 {
            return Err(Error::TooFewValidGroups {
                valid: rows.len(),
                excluded: vec![],
            });
        }
        for r in &rows {
            for v in [r.fpr, r.fnr, r.acc] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidMatrix(format!(
                        "rate {v} for group `{}` is outside [0, 1]",
                        r.group
                    )));
                }
            }
        }
        Ok(Self {
            tau,
            rows,
            excluded: vec![],
        })
    }

    pub fn group_labels(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.group.clone()).collect()
    }

    /// Pooled counts over retained groups.
    pub fn overall(&self) -> ConfusionCounts {
        self.rows
            .iter()
            .fold(ConfusionCounts::default(), |acc, r| acc + r.counts)
    }
}

pub(crate) fn group_counts(
    scores: &[LabeledScore],
    assignment: &PairGroupAssignment,
    tau: f64,
) -> Vec<ConfusionCounts> {
    assignment
        .group_pairs
        .iter()
        .map(|members| {
            let mut c = ConfusionCounts::default();
            for &i in members {
                let s = &scores[i];
                c.record(s.is_genuine, s.accepted_at(tau));
            }
            c
        })
        .collect()
}

/// Per-group FPR/FNR/ACC at `tau`.
pub fn group_metrics(
    scores: &[LabeledScore],
    assignment: &PairGroupAssignment,
    tau: f64,
    validity: &ValidityPolicy,
) -> Result<GroupMetricsTable> {
    let counts = group_counts(scores, assignment, tau);
    GroupMetricsTable::from_counts(tau, &assignment.group_labels, &counts, validity)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisparitySummary {
    pub delta_fpr: f64,
    pub delta_fnr: f64,
    pub delta_acc: f64,
    pub acc_min: f64,
    /// Groups attaining the maximum FPR / FNR and the minimum ACC (first in
    /// label order on ties).
    pub worst_fpr_group: String,
    pub worst_fnr_group: String,
    pub worst_acc_group: String,
}

fn spread(rows: &[GroupRow], f: impl Fn(&GroupRow) -> f64) -> (f64, usize, usize) {
    let mut lo = 0;
    let mut hi = 0;
    for (k, r) in rows.iter().enumerate() {
        if f(r) < f(&rows[lo]) {
            lo = k;
        }
        if f(r) > f(&rows[hi]) {
            hi = k;
        }
    }
    (f(&rows[hi]) - f(&rows[lo]), lo, hi)
}

/// Max-minus-min of each rate across groups, plus worst-group accuracy.
pub fn disparities(t: &GroupMetricsTable) -> DisparitySummary {
    let (delta_fpr, _, fpr_hi) = spread(&t.rows, |r| r.fpr);
    let (delta_fnr, _, fnr_hi) = spread(&t.rows, |r| r.fnr);
    let (delta_acc, acc_lo, _) = spread(&t.rows, |r| r.acc);
    DisparitySummary {
        delta_fpr,
        delta_fnr,
        delta_acc,
        acc_min: t.rows[acc_lo].acc,
        worst_fpr_group: t.rows[fpr_hi].group.clone(),
        worst_fnr_group: t.rows[fnr_hi].group.clone(),
        worst_acc_group: t.rows[acc_lo].group.clone(),
    }
}

/// Which score population a divergence compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassFilter {
    Genuine,
    #[default]
    Impostor,
    All,
}

impl ClassFilter {
    fn keeps(self, s: &LabeledScore) -> bool {
        match self {
            ClassFilter::Genuine => s.is_genuine,
            ClassFilter::Impostor => !s.is_genuine,
            ClassFilter::All => true,
        }
    }
}

/// Symmetric matrix of pairwise W1 distances between group score
/// distributions. `None` marks a group with no scores under the filter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceMatrix {
    pub class_filter: ClassFilter,
    pub group_labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

pub fn group_score_divergences(
    scores: &[LabeledScore],
    assignment: &PairGroupAssignment,
    class_filter: ClassFilter,
) -> DivergenceMatrix {
    let samples: Vec<Vec<f64>> = assignment
        .group_pairs
        .iter()
        .map(|members| {
            let mut v: Vec<f64> = members
                .iter()
                .map(|&i| &scores[i])
                .filter(|s| class_filter.keeps(s))
                .map(|s| s.score)
                .collect();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    let k = samples.len();
    let mut values = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            if samples[i].is_empty() || samples[j].is_empty() {
                continue;
            }
            let d = if i == j {
                0.0
            } else {
                wasserstein::wasserstein_sorted(&samples[i], &samples[j])
            };
            values[i][j] = Some(d);
            values[j][i] = Some(d);
        }
    }
    DivergenceMatrix {
        class_filter,
        group_labels: assignment.group_labels.clone(),
        values,
    }
}
