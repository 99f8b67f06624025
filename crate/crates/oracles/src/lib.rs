//! Deliberately naive reference implementations. They share no code with
//! `fdi-core` and favour the most literal reading of each definition over
//! speed, so agreement between the two is meaningful.

// Index loops mirror the summations as written.
#![allow(clippy::needless_range_loop)]

/// Literal four-step FDI on a metric-by-group matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveFdi {
    pub normalized: Vec<Vec<f64>>,
    pub ranks: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub fdi: f64,
}

/// `rows[i][k]` is metric `i` on group `k`. When `flip[i]` is set the metric
/// is ranked on its negated values (higher is better).
pub fn naive_fdi(rows: &[Vec<f64>], alpha: f64, flip: &[bool]) -> NaiveFdi {
    let n = rows.len();
    let k = rows[0].len();

    // Step 1: min-max per metric, constant rows to zero.
    let mut normalized = vec![vec![0.0f64; k]; n];
    for i in 0..n {
        let mut lo = rows[i][0];
        let mut hi = rows[i][0];
        for g in 0..k {
            if rows[i][g] < lo {
                lo = rows[i][g];
            }
            if rows[i][g] > hi {
                hi = rows[i][g];
            }
        }
        for g in 0..k {
            if hi > lo {
                normalized[i][g] = (rows[i][g] - lo) / (hi - lo);
            }
        }
    }

    // Ranks by counting: 1 + #smaller + (#equal - 1) / 2.
    let mut ranks = vec![vec![0.0f64; k]; n];
    for i in 0..n {
        let sign = if flip.get(i).copied().unwrap_or(false) {
            -1.0
        } else {
            1.0
        };
        for g in 0..k {
            let v = sign * rows[i][g];
            let mut smaller = 0.0;
            let mut equal = 0.0;
            for h in 0..k {
                let w = sign * rows[i][h];
                if w < v {
                    smaller += 1.0;
                } else if w == v {
                    equal += 1.0;
                }
            }
            ranks[i][g] = 1.0 + smaller + (equal - 1.0) / 2.0;
        }
    }

    // Steps 2 and 3.
    let mut d = vec![vec![0.0; n]; n];
    let mut r = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut sd = 0.0;
            let mut sr = 0.0;
            for g in 0..k {
                sd += (normalized[i][g] - normalized[j][g]).abs();
                sr += (ranks[i][g] - ranks[j][g]).abs();
            }
            d[i][j] = sd / k as f64;
            r[i][j] = sr / k as f64;
        }
    }

    // Step 4.
    let mut total = 0.0;
    let mut pairs = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += alpha * d[i][j] + (1.0 - alpha) * r[i][j];
            pairs += 1.0;
        }
    }
    NaiveFdi {
        normalized,
        ranks,
        d,
        r,
        fdi: total / pairs,
    }
}

/// Exact 1-D Wasserstein-1 between two empirical samples by optimal
/// transport: each point of `a` is copied `|b|` times and each point of `b`
/// `|a|` times, the copies are matched by a minimum-cost assignment, and the
/// cost is averaged. Cubic in `|a| * |b|`; meant for tiny samples.
pub fn brute_force_w1(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let left: Vec<f64> = a.iter().flat_map(|&x| std::iter::repeat_n(x, m)).collect();
    let right: Vec<f64> = b.iter().flat_map(|&y| std::iter::repeat_n(y, n)).collect();
    let cost: Vec<Vec<f64>> = left
        .iter()
        .map(|x| right.iter().map(|y| (x - y).abs()).collect())
        .collect();
    min_cost_assignment(&cost) / (n * m) as f64
}

/// Hungarian method with potentials on a square cost matrix; returns the
/// minimum total cost of a perfect matching.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row matched to column j (1-based, 0 = none).
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost[p[j] - 1][j - 1]).sum()
}

/// FPR, FNR and accuracy of `(score, is_genuine)` pairs at `tau`, accepting
/// ties. Counts by a single pass with no sorting.
pub fn naive_rates(pairs: &[(f64, bool)], tau: f64) -> (f64, f64, f64) {
    let (mut tp, mut fp, mut tn, mut fneg) = (0.0, 0.0, 0.0, 0.0);
    for &(s, genuine) in pairs {
        match (genuine, s >= tau) {
            (true, true) => tp += 1.0,
            (true, false) => fneg += 1.0,
            (false, true) => fp += 1.0,
            (false, false) => tn += 1.0,
        }
    }
    (
        fp / (fp + tn),
        fneg / (fneg + tp),
        (tp + tn) / (tp + tn + fp + fneg),
    )
}
