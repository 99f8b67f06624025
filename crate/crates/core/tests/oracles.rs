//! fdi-core against the naive reference implementations in fdi-oracles.

use fdi_core::disagreement::{fdi, FdiOptions, MetricMatrix, RankOrientation};
use fdi_core::metrics::wasserstein_1d;
use fdi_core::verification::{confusion_at, rates, LabeledScore};
use fdi_oracles::{brute_force_w1, naive_fdi, naive_rates};
use proptest::prelude::*;

fn matrix_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=4, 2usize..=6).prop_flat_map(|(n, k)| {
        // A coarse lattice half of the time so ties are common.
        let cell = prop_oneof![-1.0f64..2.0, (0u8..4).prop_map(|v| f64::from(v) / 4.0)];
        prop::collection::vec(prop::collection::vec(cell, k), n)
    })
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn fdi_matches_the_literal_definition(rows in matrix_strategy(), alpha in 0.0f64..=1.0) {
        let m = MetricMatrix::new(labels("m", rows.len()), labels("g", rows[0].len()), rows.clone()).unwrap();
        let got = fdi(&m, &FdiOptions { alpha, orientation: RankOrientation::Raw }).unwrap();
        let want = naive_fdi(&rows, alpha, &vec![false; rows.len()]);
        prop_assert!((got.fdi - want.fdi).abs() < 1e-12, "{} vs {}", got.fdi, want.fdi);
        for i in 0..rows.len() {
            prop_assert_eq!(&got.ranks[i], &want.ranks[i]);
            for j in 0..rows.len() {
                prop_assert!((got.value_disagreement[i][j] - want.d[i][j]).abs() < 1e-12);
                prop_assert!((got.rank_disagreement[i][j] - want.r[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn oriented_ranks_flip_higher_is_better_rows(rows in matrix_strategy(), flip_seed in any::<u8>()) {
        let flip: Vec<bool> = (0..rows.len()).map(|i| flip_seed >> i & 1 == 1).collect();
        let m = MetricMatrix::with_orientation(
            labels("m", rows.len()),
            labels("g", rows[0].len()),
            rows.clone(),
            flip.clone(),
        )
        .unwrap();
        let got = fdi(&m, &FdiOptions { alpha: 0.5, orientation: RankOrientation::Oriented }).unwrap();
        let want = naive_fdi(&rows, 0.5, &flip);
        prop_assert!((got.fdi - want.fdi).abs() < 1e-12);
    }

    #[test]
    fn wasserstein_matches_optimal_transport(
        a in prop::collection::vec(-1.0f64..1.0, 1..=7),
        b in prop::collection::vec(-1.0f64..1.0, 1..=7),
    ) {
        let got = wasserstein_1d(&a, &b).unwrap();
        let want = brute_force_w1(&a, &b);
        prop_assert!((got - want).abs() < 1e-9, "{} vs {}", got, want);
    }

    #[test]
    fn rates_match_a_single_pass_count(
        pairs in prop::collection::vec(((0u8..=20).prop_map(|v| f64::from(v) / 10.0 - 1.0), any::<bool>()), 2..60),
        tau_step in 0u8..=20,
    ) {
        prop_assume!(pairs.iter().any(|p| p.1) && pairs.iter().any(|p| !p.1));
        // Lattice scores and thresholds make ties at tau frequent.
        let tau = f64::from(tau_step) / 10.0 - 1.0;
        let scores: Vec<LabeledScore> = pairs
            .iter()
            .enumerate()
            .map(|(i, &(s, g))| {
                let b = if g { format!("id{i}") } else { format!("other{i}") };
                LabeledScore::new(format!("id{i}"), b, s, g).unwrap()
            })
            .collect();
        let r = rates(&confusion_at(&scores, tau).unwrap()).unwrap();
        let (fpr, fnr, acc) = naive_rates(&pairs, tau);
        prop_assert_eq!((r.fpr, r.fnr, r.acc), (fpr, fnr, acc));
    }
}
