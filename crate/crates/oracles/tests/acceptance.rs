//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fdi_core::disagreement::{
    bootstrap_fdi, fdi, max_rank_disagreement, sweep, AnalysisOptions, BootstrapSettings,
    FdiOptions, MetricMatrix,
};
use fdi_core::grouping::{assign_pairs, CrossGroupPolicy};
use fdi_core::io::write_scores;
use fdi_core::metrics::{disparities, wasserstein_1d, GroupMetricsTable};
use fdi_core::pipeline::{run_analyze, run_compare, run_sweep, RunConfig};
use fdi_core::report::{write_report, OutputFormat};
use fdi_core::synth::{
    agreement_fixture, generate, opposing_conclusions_fixture, table_ii_fixture,
    threshold_flip_fixture, Fixture,
};
use fdi_core::verification::Rates;
use fdi_core::Execution;
use fdi_oracles::{brute_force_w1, naive_fdi};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const GROUPS: [&str; 4] = ["A", "B", "C", "D"];
const TABLE_FPR: [f64; 4] = [0.05, 0.06, 0.08, 0.10];
const TABLE_FNR: [f64; 4] = [0.03, 0.04, 0.05, 0.06];
const TABLE_ACC: [f64; 4] = [0.90, 0.88, 0.85, 0.83];
/// Oracle value of the FDI on the rows above, alpha 0.5, raw ranks.
const TABLE_FDI: f64 = 0.907_936_507_936_507_9;

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `a - b` computed in floating point is exact up to the rounding of its
/// operands and of the subtraction itself.
fn exact_difference(got: f64, a: f64, b: f64, want: f64) -> bool {
    (got - want).abs() <= f64::EPSILON * (a.abs() + b.abs())
}

fn table_ii_matrix() -> MetricMatrix {
    MetricMatrix::new(
        vec!["FPR".into(), "FNR".into(), "ACC".into()],
        GROUPS.iter().map(|g| g.to_string()).collect(),
        vec![TABLE_FPR.to_vec(), TABLE_FNR.to_vec(), TABLE_ACC.to_vec()],
    )
    .unwrap()
}

fn criterion_1() -> Outcome {
    let table = GroupMetricsTable::from_rates(
        0.5,
        (0..4).map(|k| {
            (
                GROUPS[k].to_string(),
                Rates {
                    fpr: TABLE_FPR[k],
                    fnr: TABLE_FNR[k],
                    acc: TABLE_ACC[k],
                },
            )
        }),
    )
    .map_err(|e| e.to_string())?;
    let d = disparities(&table);
    ensure(exact_difference(d.delta_acc, 0.90, 0.83, 0.07), || {
        format!("delta_acc {}", d.delta_acc)
    })?;
    ensure(exact_difference(d.delta_fpr, 0.10, 0.05, 0.05), || {
        format!("delta_fpr {}", d.delta_fpr)
    })?;
    ensure(exact_difference(d.delta_fnr, 0.06, 0.03, 0.03), || {
        format!("delta_fnr {}", d.delta_fnr)
    })?;
    ensure(d.acc_min == 0.83, || format!("acc_min {}", d.acc_min))?;

    let rows = vec![TABLE_FPR.to_vec(), TABLE_FNR.to_vec(), TABLE_ACC.to_vec()];
    let oracle = naive_fdi(&rows, 0.5, &[false; 3]);
    ensure((oracle.fdi - TABLE_FDI).abs() < 1e-12, || {
        format!("oracle drifted: {}", oracle.fdi)
    })?;
    let got = fdi(&table_ii_matrix(), &FdiOptions::default()).map_err(|e| e.to_string())?;
    ensure((got.fdi - oracle.fdi).abs() < 1e-12, || {
        format!("fdi {} vs oracle {}", got.fdi, oracle.fdi)
    })?;
    Ok(format!(
        "delta_acc={} delta_fpr={} delta_fnr={} acc_min={} fdi={:.10}",
        d.delta_acc, d.delta_fpr, d.delta_fnr, d.acc_min, got.fdi
    ))
}

/// 200 random matrices, some drawn from a coarse value set to force ties.
fn random_matrices() -> Vec<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xFD1);
    (0..200)
        .map(|i| {
            let n = rng.random_range(2..=4);
            let k = rng.random_range(2..=5);
            (0..n)
                .map(|_| {
                    (0..k)
                        .map(|_| {
                            if i % 4 == 0 {
                                f64::from(rng.random_range(0..3u8)) / 4.0
                            } else {
                                rng.random_range(-1.0..2.0)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn matrix_of(rows: &[Vec<f64>]) -> MetricMatrix {
    MetricMatrix::new(
        labels("m", rows.len()),
        labels("g", rows[0].len()),
        rows.to_vec(),
    )
    .unwrap()
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for rows in random_matrices() {
        let got = fdi(&matrix_of(&rows), &FdiOptions::default()).map_err(|e| e.to_string())?;
        let want = naive_fdi(&rows, 0.5, &vec![false; rows.len()]).fdi;
        worst = worst.max((got.fdi - want).abs());
        ensure((got.fdi - want).abs() < 1e-12, || {
            format!("{rows:?}: {} vs {want}", got.fdi)
        })?;
    }
    Ok(format!("200 matrices, max |diff| = {worst:e}"))
}

fn criterion_3() -> Outcome {
    let opts = FdiOptions::default();
    for rows in random_matrices() {
        let k = rows[0].len();
        let r_max = ((k * k) / 2) as f64 / k as f64;
        let res = fdi(&matrix_of(&rows), &opts).map_err(|e| e.to_string())?;
        for i in 0..rows.len() {
            for j in 0..rows.len() {
                let (d, r) = (res.value_disagreement[i][j], res.rank_disagreement[i][j]);
                ensure((0.0..=1.0).contains(&d), || format!("D out of range: {d}"))?;
                ensure((0.0..=r_max).contains(&r), || {
                    format!("R out of range: {r} > {r_max}")
                })?;
            }
        }
        let bound = opts.alpha + (1.0 - opts.alpha) * r_max;
        ensure((0.0..=bound).contains(&res.fdi), || {
            format!("FDI {} outside [0, {bound}]", res.fdi)
        })?;
        let same = vec![rows[0].clone(); rows.len()];
        let zero = fdi(&matrix_of(&same), &opts)
            .map_err(|e| e.to_string())?
            .fdi;
        ensure(zero == 0.0, || format!("identical rows gave {zero}"))?;
    }
    for k in 2..=8 {
        let up: Vec<f64> = (0..k).map(|g| g as f64).collect();
        let down: Vec<f64> = up.iter().rev().copied().collect();
        let res = fdi(&matrix_of(&[up, down]), &opts).map_err(|e| e.to_string())?;
        let want = max_rank_disagreement(k);
        ensure(res.rank_disagreement[0][1] == want, || {
            format!(
                "K={k}: reversal R {} vs bound {want}",
                res.rank_disagreement[0][1]
            )
        })?;
        ensure(want == ((k * k) / 2) as f64 / k as f64, || {
            format!("K={k}: bound {want}")
        })?;
    }
    Ok("bounds hold on 200 matrices; identical rows give 0; reversals attain the R bound for K=2..8".into())
}

fn sweep_fixture(f: &Fixture) -> fdi_core::Result<fdi_core::disagreement::SweepSeries> {
    let data = f.generate()?;
    let partition = data.partition()?;
    let asg = assign_pairs(&data.scores, &partition, CrossGroupPolicy::Exclude);
    sweep(
        &data.scores,
        &asg,
        &f.grid,
        &AnalysisOptions::default(),
        Execution::Parallel,
    )
}

fn criterion_4() -> Outcome {
    let (band_lo, band_hi, tol) = (0.83, 0.92, 0.02);
    let mut notes = Vec::new();
    for f in [
        table_ii_fixture(),
        opposing_conclusions_fixture(),
        threshold_flip_fixture(),
        agreement_fixture(),
    ] {
        let s = sweep_fixture(&f).map_err(|e| e.to_string())?;
        let pts: Vec<_> = s.valid_points().collect();
        ensure(pts.len() == s.points.len(), || {
            format!("{}: invalid thresholds", f.name)
        })?;
        for w in pts.windows(2) {
            let ((t0, a0), (t1, a1)) = (w[0], w[1]);
            for (r0, r1) in a0.table.rows.iter().zip(&a1.table.rows) {
                ensure(r1.fpr <= r0.fpr, || {
                    format!("{} {}: FPR rises {t0}->{t1}", f.name, r0.group)
                })?;
                ensure(r1.fnr >= r0.fnr, || {
                    format!("{} {}: FNR falls {t0}->{t1}", f.name, r0.group)
                })?;
            }
        }
        if f.name == "table-ii" {
            for (tau, a) in &pts {
                let o = a.table.overall();
                let acc = (o.tp + o.tn) as f64 / o.total() as f64;
                ensure((band_lo - tol..=band_hi + tol).contains(&acc), || {
                    format!("overall accuracy {acc:.4} at tau {tau} outside [{band_lo}, {band_hi}] +/- {tol}")
                })?;
            }
            let accs: Vec<f64> = pts
                .iter()
                .map(|(_, a)| {
                    let o = a.table.overall();
                    (o.tp + o.tn) as f64 / o.total() as f64
                })
                .collect();
            notes.push(format!(
                "table-ii accuracy {:.4}..{:.4}",
                accs.iter().copied().fold(f64::INFINITY, f64::min),
                accs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            ));
        }
    }
    Ok(format!("monotone on 4 fixtures; {}", notes.join("")))
}

fn criterion_5() -> Outcome {
    let a = sweep_fixture(&opposing_conclusions_fixture()).map_err(|e| e.to_string())?;
    let rs: Vec<f64> = a
        .valid_points()
        .map(|(_, x)| x.disagreement.mean_rank_disagreement)
        .collect();
    ensure(rs.len() == a.points.len(), || {
        "opposing-conclusions: invalid thresholds".into()
    })?;
    ensure(rs[0] > 0.0 && rs.iter().all(|&r| r == rs[0]), || {
        format!("opposing-conclusions mean R {rs:?}")
    })?;

    let b = sweep_fixture(&threshold_flip_fixture()).map_err(|e| e.to_string())?;
    let worst: Vec<(f64, String, String)> = b
        .valid_points()
        .map(|(t, x)| {
            (
                t,
                x.disparities.worst_fpr_group.clone(),
                x.disparities.worst_fnr_group.clone(),
            )
        })
        .collect();
    let split = worst
        .iter()
        .find(|(_, f, n)| f != n)
        .ok_or("threshold-flip: FPR and FNR always agree")?;
    ensure(worst.iter().any(|(_, f, _)| *f != worst[0].1), || {
        "threshold-flip: argmax FPR never changes".into()
    })?;
    ensure(worst.iter().all(|(_, _, n)| *n == worst[0].2), || {
        "threshold-flip: argmax FNR changes".into()
    })?;

    let c = sweep_fixture(&agreement_fixture()).map_err(|e| e.to_string())?;
    let n = c.points.len();
    for p in &c.points[1..n - 1] {
        ensure(p.fdi() == Some(0.0), || {
            format!("agreement: FDI {:?} at tau {}", p.fdi(), p.tau)
        })?;
    }
    Ok(format!(
        "mean R = {:.4} constant; worst FPR {} vs worst FNR {} at tau {}; agreement FDI 0 on {} interior points",
        rs[0],
        split.1,
        split.2,
        split.0,
        n - 2
    ))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3A55);
    let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let n = rng.random_range(1..=6);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (a, b, c) = (sample(&mut rng), sample(&mut rng), sample(&mut rng));
        let w = |x: &[f64], y: &[f64]| wasserstein_1d(x, y).map_err(|e| e.to_string());
        let ab = w(&a, &b)?;
        let oracle = brute_force_w1(&a, &b);
        worst = worst.max((ab - oracle).abs());
        ensure((ab - oracle).abs() < 1e-9, || {
            format!("{a:?} {b:?}: {ab} vs {oracle}")
        })?;
        ensure(ab == w(&b, &a)?, || format!("asymmetric on {a:?} {b:?}"))?;
        ensure(w(&a, &a)? == 0.0, || format!("W(a, a) != 0 for {a:?}"))?;
        ensure(w(&a, &c)? <= ab + w(&b, &c)? + 1e-12, || {
            format!("triangle fails on {a:?} {b:?} {c:?}")
        })?;
    }
    Ok(format!(
        "100 pairs, max |diff| vs optimal transport = {worst:e}; axioms hold"
    ))
}

fn scores_config(
    dir: &Path,
    name: &str,
    fixture: &Fixture,
    seed: u64,
) -> fdi_core::Result<RunConfig> {
    let path = dir.join(format!("{name}.csv"));
    write_scores(&path, &generate(&fixture.specs, seed)?.scores)?;
    Ok(RunConfig {
        label: Some(name.into()),
        scores: Some(path),
        ..Default::default()
    })
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let f = table_ii_fixture();
    let base = scores_config(dir.path(), "table-ii", &f, f.seed).map_err(|e| e.to_string())?;
    let cfg = RunConfig {
        tau: Some(0.5),
        bootstrap: Some(40),
        seed: Some(17),
        ..base
    }
    .resolve()
    .map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    let mut reports = Vec::new();
    for run in 0..2 {
        let report = run_analyze(&cfg, Execution::Parallel).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("report{run}.json"));
        write_report(&report, OutputFormat::Json, &path).map_err(|e| e.to_string())?;
        files.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        reports.push(report);
    }
    let identical = files[0] == files[1];
    let report = &reports[0];
    let rows = &report.analysis.as_ref().ok_or("no analysis")?.table.rows;
    let mut err = [0.0f64; 3];
    for (k, r) in rows.iter().enumerate() {
        err[0] = err[0].max((r.fpr - TABLE_FPR[k]).abs());
        err[1] = err[1].max((r.fnr - TABLE_FNR[k]).abs());
        err[2] = err[2].max((r.acc - TABLE_ACC[k]).abs());
    }
    let detail = format!(
        "max |diff| FPR {:.4} FNR {:.4} ACC {:.4}; reports byte-identical: {identical}",
        err[0], err[1], err[2]
    );
    if rows.len() == 4 && identical && err.iter().all(|&e| e <= 0.005) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let grid = "0.40:0.50:0.02";
    let models = [
        ("FaceNet", table_ii_fixture(), 1),
        ("ArcFace", opposing_conclusions_fixture(), 2),
    ];
    let mut cfgs = Vec::new();
    let mut sweeps = Vec::new();
    for (name, f, seed) in &models {
        let cfg = RunConfig {
            grid: Some(grid.into()),
            ..scores_config(dir.path(), name, f, *seed).map_err(|e| e.to_string())?
        }
        .resolve()
        .map_err(|e| e.to_string())?;
        let s = run_sweep(&cfg, Execution::Parallel).map_err(|e| e.to_string())?;
        sweeps.push(s.sweep.ok_or("sweep report has no series")?);
        cfgs.push(cfg);
    }
    let report = run_compare(&cfgs[0], &cfgs[1], Execution::Parallel).map_err(|e| e.to_string())?;
    let out = dir.path().join("compare");
    write_report(&report, OutputFormat::Tabular, &out).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(out.join("fdi_ranges.csv")).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    ensure(
        lines.next() == Some("model,fdi_range,fdi_max,fdi_min"),
        || format!("header of {text}"),
    )?;
    let mut shown = Vec::new();
    for ((name, _, _), series) in models.iter().zip(&sweeps) {
        let vals: Vec<f64> = series
            .fdi_values()
            .into_iter()
            .filter_map(|(_, v)| v)
            .collect();
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let range = format!("{hi:.2} – {lo:.2}");
        let want = format!("{name},{range},{hi},{lo}");
        let line = lines.next().ok_or("missing model row")?;
        ensure(line == want, || format!("row `{line}`, expected `{want}`"))?;
        shown.push(format!("{name} {range}"));
    }
    ensure(lines.next().is_none(), || {
        "extra rows in fdi_ranges.csv".into()
    })?;
    Ok(shown.join(", "))
}

fn criterion_9() -> Outcome {
    let data = opposing_conclusions_fixture()
        .generate()
        .map_err(|e| e.to_string())?;
    let partition = data.partition().map_err(|e| e.to_string())?;
    let asg = assign_pairs(&data.scores, &partition, CrossGroupPolicy::Exclude);
    let settings = BootstrapSettings::new(100, 99);
    let opts = AnalysisOptions::default();
    let run = |exec| {
        bootstrap_fdi(&data.scores, &asg, 0.4, &opts, &settings, exec).map_err(|e| e.to_string())
    };
    let (a, b, seq) = (
        run(Execution::Parallel)?,
        run(Execution::Parallel)?,
        run(Execution::Sequential)?,
    );
    let bits = |i: &fdi_core::disagreement::BootstrapInterval| {
        [i.point.to_bits(), i.ci_low.to_bits(), i.ci_high.to_bits()]
    };
    ensure(bits(&a) == bits(&b), || "two runs differ".into())?;
    ensure(bits(&a) == bits(&seq), || {
        "sequential and parallel runs differ".into()
    })?;
    ensure(a.ci_low <= a.ci_high, || {
        format!("interval [{}, {}] inverted", a.ci_low, a.ci_high)
    })?;
    Ok(format!(
        "point {:.6}, interval [{:.6}, {:.6}], bit-identical across runs",
        a.point, a.ci_low, a.ci_high
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("Table II oracle", criterion_1),
        ("formula equivalence", criterion_2),
        ("bounds and endpoints", criterion_3),
        ("threshold monotonicity", criterion_4),
        ("qualitative phenomena", criterion_5),
        ("Wasserstein oracle", criterion_6),
        ("pipeline end-to-end", criterion_7),
        ("cross-model report shape", criterion_8),
        ("bootstrap determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({ms} ms) {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({ms} ms) {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
