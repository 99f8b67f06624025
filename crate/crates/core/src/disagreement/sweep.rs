use serde::Serialize;

use super::{fdi, AnalysisOptions, DisagreementResult, MetricMatrix};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grouping::PairGroupAssignment;
use crate::metrics::{disparities, group_metrics, DisparitySummary, GroupMetricsTable};
use crate::verification::{LabeledScore, SortedScores, ThresholdGrid};

/// Full analysis at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdAnalysis {
    pub table: GroupMetricsTable,
    pub disparities: DisparitySummary,
    pub disagreement: DisagreementResult,
}

impl ThresholdAnalysis {
    fn from_table(table: GroupMetricsTable, opts: &AnalysisOptions) -> Result<Self> {
        if opts.metrics.len() < 2 {
            return Err(Error::InvalidMatrix(format!(
                "need at least 2 metrics, got {}",
                opts.metrics.len()
            )));
        }
        let matrix = MetricMatrix::from_table(&table, &opts.metrics)?;
        let disagreement = fdi(&matrix, &opts.fdi)?;
        Ok(Self {
            disparities: disparities(&table),
            table,
            disagreement,
        })
    }

    pub fn fdi(&self) -> f64 {
        self.disagreement.fdi
    }
}

pub(crate) fn analysis_from_table(
    table: GroupMetricsTable,
    opts: &AnalysisOptions,
) -> Result<ThresholdAnalysis> {
    ThresholdAnalysis::from_table(table, opts)
}

/// One-shot analysis: group metrics, disparities and FDI at `tau`.
pub fn analyze_at(
    scores: &[LabeledScore],
    assignment: &PairGroupAssignment,
    tau: f64,
    opts: &AnalysisOptions,
) -> Result<ThresholdAnalysis> {
    let table = group_metrics(scores, assignment, tau, &opts.validity)?;
    ThresholdAnalysis::from_table(table, opts)
}

/// A threshold in a sweep; `failure` is set when the analysis was not valid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub tau: f64,
    #[serde(skip_serializing_if = "Option::is_none", flatten)]
    pub analysis: Option<ThresholdAnalysis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl SweepPoint {
    pub fn fdi(&self) -> Option<f64> {
        self.analysis.as_ref().map(ThresholdAnalysis::fdi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSeries {
    pub partition_name: String,
    pub group_labels: Vec<String>,
    pub points: Vec<SweepPoint>,
}

impl SweepSeries {
    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.tau).collect()
    }

    pub fn fdi_values(&self) -> Vec<(f64, Option<f64>)> {
        self.points.iter().map(|p| (p.tau, p.fdi())).collect()
    }

    pub fn valid_points(&self) -> impl Iterator<Item = (f64, &ThresholdAnalysis)> {
        self.points
            .iter()
            .filter_map(|p| p.analysis.as_ref().map(|a| (p.tau, a)))
    }
}

/// FDI(tau) over a grid. Each group's scores are sorted once; every threshold
/// then costs O(K log n). Thresholds where the analysis is invalid carry a
/// failure message instead of being dropped.
pub fn sweep(
    scores: &[LabeledScore],
    assignment: &PairGroupAssignment,
    grid: &ThresholdGrid,
    opts: &AnalysisOptions,
    exec: Execution,
) -> Result<SweepSeries> {
    let sorted: Vec<SortedScores> = exec.map(&assignment.group_pairs, |members| {
        SortedScores::from_scores(members.iter().map(|&i| &scores[i]))
    });
    let points = exec.map(grid.values(), |&tau| {
        let counts: Vec<_> = sorted.iter().map(|s| s.counts_at(tau)).collect();
        let result =
            GroupMetricsTable::from_counts(tau, &assignment.group_labels, &counts, &opts.validity)
                .and_then(|t| ThresholdAnalysis::from_table(t, opts));
        match result {
            Ok(a) => SweepPoint {
                tau,
                analysis: Some(a),
                failure: None,
            },
            Err(e) => SweepPoint {
                tau,
                analysis: None,
                failure: Some(e.to_string()),
            },
        }
    });
    if points.iter().all(|p| p.analysis.is_none()) {
        return Err(Error::AllThresholdsInvalid);
    }
    Ok(SweepSeries {
        partition_name: assignment.partition_name.clone(),
        group_labels: assignment.group_labels.clone(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::{assign_pairs, CrossGroupPolicy, GroupPartition};
    use std::collections::BTreeSet;

    fn fixture(groups: &[(&str, Vec<f64>, Vec<f64>)]) -> (Vec<LabeledScore>, PairGroupAssignment) {
        let mut scores = Vec::new();
        let mut parts = Vec::new();
        for (label, gen, imp) in groups {
            let (a, b) = (format!("{label}0"), format!("{label}1"));
            for &s in gen {
                scores.push(LabeledScore::new(&a, &a, s, true).unwrap());
            }
            for &s in imp {
                scores.push(LabeledScore::new(&a, &b, s, false).unwrap());
            }
            parts.push((label.to_string(), BTreeSet::from([a, b])));
        }
        let p = GroupPartition::new("t", parts).unwrap();
        let asg = assign_pairs(&scores, &p, CrossGroupPolicy::Exclude);
        (scores, asg)
    }

    fn spread_fixture() -> (Vec<LabeledScore>, PairGroupAssignment) {
        let g = |base: f64| -> (Vec<f64>, Vec<f64>) {
            let gen = (0..20).map(|i| (base + 0.03 * i as f64).min(1.0)).collect();
            let imp = (0..20)
                .map(|i| (base - 0.5 + 0.03 * i as f64).max(-1.0))
                .collect();
            (gen, imp)
        };
        let (ga, ia) = g(0.40);
        let (gb, ib) = g(0.35);
        let (gc, ic) = g(0.45);
        fixture(&[("A", ga, ia), ("B", gb, ib), ("C", gc, ic)])
    }

    #[test]
    fn single_threshold_matches_one_shot() {
        let (scores, asg) = spread_fixture();
        let opts = AnalysisOptions::default();
        let grid = ThresholdGrid::single(0.42).unwrap();
        let s = sweep(&scores, &asg, &grid, &opts, Execution::Sequential).unwrap();
        assert_eq!(s.points.len(), 1);
        let one = analyze_at(&scores, &asg, 0.42, &opts).unwrap();
        assert_eq!(s.points[0].analysis.as_ref().unwrap(), &one);
    }

    #[test]
    fn sweep_matches_brute_force_and_strategies_agree() {
        let (scores, asg) = spread_fixture();
        let opts = AnalysisOptions::default();
        let grid = ThresholdGrid::parse("-0.2:0.9:0.05").unwrap();
        let seq = sweep(&scores, &asg, &grid, &opts, Execution::Sequential).unwrap();
        let par = sweep(&scores, &asg, &grid, &opts, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        for p in &seq.points {
            match analyze_at(&scores, &asg, p.tau, &opts) {
                Ok(a) => assert_eq!(p.analysis.as_ref(), Some(&a)),
                Err(_) => assert!(p.failure.is_some()),
            }
        }
    }

    #[test]
    fn fdi_flat_between_score_values() {
        // no score lies in [0.31, 0.39], so counts and FDI do not move there
        let (scores, asg) = fixture(&[
            ("A", vec![0.2, 0.5, 0.9], vec![0.1, 0.3, 0.4]),
            ("B", vec![0.25, 0.6, 0.8], vec![0.0, 0.2, 0.45]),
        ]);
        let grid = ThresholdGrid::parse("0.31:0.39:0.02").unwrap();
        let s = sweep(
            &scores,
            &asg,
            &grid,
            &AnalysisOptions::default(),
            Execution::Sequential,
        )
        .unwrap();
        let vals: Vec<f64> = s
            .fdi_values()
            .into_iter()
            .map(|(_, v)| v.unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn invalid_thresholds_are_flagged() {
        // validity depends only on per-class counts, which do not move with tau
        let (scores, asg) = fixture(&[("A", vec![0.9], vec![0.1]), ("B", vec![0.9], vec![])]);
        let grid = ThresholdGrid::parse("0.0:1.0:0.5").unwrap();
        assert!(matches!(
            sweep(
                &scores,
                &asg,
                &grid,
                &AnalysisOptions::default(),
                Execution::Sequential
            ),
            Err(Error::AllThresholdsInvalid)
        ));
    }
}
