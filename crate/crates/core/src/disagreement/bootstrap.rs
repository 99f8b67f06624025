use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sweep::analysis_from_table;
use super::AnalysisOptions;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grouping::PairGroupAssignment;
use crate::metrics::{group_metrics, GroupMetricsTable};
use crate::verification::{ConfusionCounts, LabeledScore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSettings {
    pub n_resamples: usize,
    pub seed: u64,
    /// Redraws allowed per resample when it fails the validity policy.
    pub max_redraws: usize,
}

impl BootstrapSettings {
    pub fn new(n_resamples: usize, seed: u64) -> Self {
        Self {
            n_resamples,
            seed,
            max_redraws: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapInterval {
    /// FDI on the original pairs.
    pub point: f64,
    /// 2.5th percentile of the resampled FDIs.
    pub ci_low: f64,
    /// 97.5th percentile of the resampled FDIs.
    pub ci_high: f64,
    pub n_resamples: usize,
    /// Resamples that stayed invalid after every redraw.
    pub n_failed: usize,
    pub n_redraws: usize,
}

/// Accept/reject outcome of every pair in one (group, class) stratum.
struct Stratum {
    accepted: Vec<bool>,
}

impl Stratum {
    fn draw(&self, rng: &mut ChaCha8Rng) -> u64 {
        let n = self.accepted.len();
        (0..n)
            .filter(|_| self.accepted[rng.random_range(0..n)])
            .count() as u64
    }
}

/// Percentile bootstrap of the FDI at `tau`.
///
/// Pairs are resampled with replacement inside each (group, class) stratum,
/// so every resample keeps the original per-group genuine/impostor counts.
/// Resample `r` draws from ChaCha8 stream `r` of `seed`; results do not depend
/// on the execution strategy.
pub fn bootstrap_fdi(
    scores: &[LabeledScore],
    assignment: &PairGroupAssignment,
    tau: f64,
    opts: &AnalysisOptions,
    settings: &BootstrapSettings,
    exec: Execution,
) -> Result<BootstrapInterval> {
    if settings.n_resamples == 0 {
        return Err(Error::NoResamples);
    }
    let point = analysis_from_table(
        group_metrics(scores, assignment, tau, &opts.validity)?,
        opts,
    )?
    .fdi();

    let strata: Vec<(Stratum, Stratum)> = assignment
        .group_pairs
        .iter()
        .map(|members| {
            let (mut gen, mut imp) = (Vec::new(), Vec::new());
            for &i in members {
                let s = &scores[i];
                if s.is_genuine { &mut gen } else { &mut imp }.push(s.accepted_at(tau));
            }
            (Stratum { accepted: gen }, Stratum { accepted: imp })
        })
        .collect();

    let outcomes = exec.map_range(settings.n_resamples, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        rng.set_stream(r as u64);
        let mut redraws = 0;
        loop {
            let counts: Vec<ConfusionCounts> = strata
                .iter()
                .map(|(gen, imp)| {
                    let tp = gen.draw(&mut rng);
                    let fp = imp.draw(&mut rng);
                    ConfusionCounts {
                        tp,
                        fn_: gen.accepted.len() as u64 - tp,
                        fp,
                        tn: imp.accepted.len() as u64 - fp,
                    }
                })
                .collect();
            let result = GroupMetricsTable::from_counts(
                tau,
                &assignment.group_labels,
                &counts,
                &opts.validity,
            )
            .and_then(|t| analysis_from_table(t, opts));
            match result {
                Ok(a) => return (Some(a.fdi()), redraws),
                Err(_) if redraws < settings.max_redraws => redraws += 1,
                Err(_) => return (None, redraws),
            }
        }
    });

    let n_redraws = outcomes.iter().map(|(_, r)| r).sum();
    let mut values: Vec<f64> = outcomes.iter().filter_map(|(v, _)| *v).collect();
    let n_failed = settings.n_resamples - values.len();
    if values.is_empty() {
        return Err(Error::NoResamples);
    }
    values.sort_by(f64::total_cmp);
    Ok(BootstrapInterval {
        point,
        ci_low: percentile(&values, 0.025),
        ci_high: percentile(&values, 0.975),
        n_resamples: settings.n_resamples,
        n_failed,
        n_redraws,
    })
}

/// Linear interpolation between closest ranks on sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
