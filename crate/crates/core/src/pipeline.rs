//! End-to-end runs: configuration, input loading, partitioning and the
//! analyze / sweep / compare / group commands.
//!
//! A run is described by a [`RunConfig`] whose fields are all optional. Flags
//! and a TOML config file each produce one; [`RunConfig::merge`] combines them
//! and rejects any field set in both. [`RunConfig::resolve`] fills defaults and
//! validates, yielding the [`ResolvedConfig`] that is echoed into every report.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::disagreement::{
    analyze_at, bootstrap_fdi, compare_models, sweep, AnalysisOptions, BaseMetric,
    BootstrapSettings, FdiOptions, RankOrientation, SweepSeries,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grouping::{
    assign_pairs, intersect_partitions, proxy_partition, CrossGroupPolicy, GroupPartition,
    Membership, NonAlphaPolicy, PairGroupAssignment,
};
use crate::io::{read_embeddings, read_group_map, read_scores};
use crate::metrics::{group_score_divergences, ClassFilter, ValidityPolicy};
use crate::report::{AnalysisReport, Diagnostics, FailedThreshold, ModelRun, OutputFormat};
use crate::synth::GroupScoreSpec;
use crate::verification::{
    build_pairs, ImpostorSampling, LabeledScore, PairProtocol, ThresholdGrid,
};

pub const DEFAULT_TAU: f64 = 0.5;
pub const DEFAULT_GRID: &str = "0.20:0.28:0.02";
pub const DEFAULT_LABEL: &str = "model";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub label: Option<String>,
    pub scores: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub pairs_protocol: Option<String>,
    pub group_map: Option<PathBuf>,
    pub proxy_groups: Option<bool>,
    pub intersect: Option<PathBuf>,
    pub non_alpha: Option<NonAlphaPolicy>,
    pub tau: Option<f64>,
    pub grid: Option<String>,
    pub alpha: Option<f64>,
    pub rank_orientation: Option<RankOrientation>,
    pub cross_group: Option<CrossGroupPolicy>,
    pub min_genuine: Option<u64>,
    pub min_impostor: Option<u64>,
    pub metrics: Option<Vec<BaseMetric>>,
    pub divergence_class: Option<ClassFilter>,
    pub bootstrap: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
}

macro_rules! merge_fields {
    ($a:expr, $b:expr, $out:ident, [$($f:ident),* $(,)?]) => {
        $(
            $out.$f = match ($a.$f, $b.$f) {
                (Some(_), Some(_)) => {
                    return Err(Error::Config(format!(
                        "`{}` is set both on the command line and in the config file",
                        stringify!($f).replace('_', "-")
                    )))
                }
                (x, y) => x.or(y),
            };
        )*
    };
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Relative paths inside the file resolve against the file's directory.
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| Error::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.scores,
            &mut cfg.embeddings,
            &mut cfg.group_map,
            &mut cfg.intersect,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Field-wise union; a field set on both sides is an error.
    pub fn merge(self, other: RunConfig) -> Result<RunConfig> {
        let mut out = RunConfig::default();
        merge_fields!(
            self,
            other,
            out,
            [
                label,
                scores,
                embeddings,
                pairs_protocol,
                group_map,
                proxy_groups,
                intersect,
                non_alpha,
                tau,
                grid,
                alpha,
                rank_orientation,
                cross_group,
                min_genuine,
                min_impostor,
                metrics,
                divergence_class,
                bootstrap,
                seed,
                format,
            ]
        );
        Ok(out)
    }

    pub fn resolve(self) -> Result<ResolvedConfig> {
        let input = match (self.scores, self.embeddings) {
            (Some(path), None) => {
                if self.pairs_protocol.is_some() {
                    return Err(Error::Config(
                        "`pairs-protocol` applies only to embeddings input".into(),
                    ));
                }
                InputSource::Scores { path }
            }
            (None, Some(path)) => InputSource::Embeddings {
                path,
                pairs: parse_pair_protocol(
                    self.pairs_protocol.as_deref().unwrap_or("exhaustive"),
                    self.seed.unwrap_or(0),
                )?,
            },
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give exactly one input: scores or embeddings, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config("no input: give scores or embeddings".into()))
            }
        };
        let partition = match (self.group_map, self.proxy_groups.unwrap_or(false)) {
            (Some(_), true) => {
                return Err(Error::Config(
                    "give exactly one partition source: proxy-groups or group-map".into(),
                ))
            }
            (Some(path), false) => PartitionSource::Map { path },
            (None, _) => PartitionSource::Proxy,
        };
        let grid_spec = self.grid.unwrap_or_else(|| DEFAULT_GRID.to_string());
        let grid = ThresholdGrid::parse(&grid_spec)?;
        let tau = self.tau.unwrap_or(DEFAULT_TAU);
        if !tau.is_finite() {
            return Err(Error::Config(format!("tau must be finite, got {tau}")));
        }
        let alpha = self.alpha.unwrap_or(0.5);
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidAlpha(alpha));
        }
        let metrics = self
            .metrics
            .unwrap_or_else(|| BaseMetric::DEFAULT_SET.to_vec());
        if metrics.len() < 2 || metrics.iter().collect::<BTreeSet<_>>().len() != metrics.len() {
            return Err(Error::Config(
                "metrics must list at least 2 distinct metrics".into(),
            ));
        }
        Ok(ResolvedConfig {
            label: self.label.unwrap_or_else(|| DEFAULT_LABEL.to_string()),
            input,
            partition,
            intersect: self.intersect,
            non_alpha: self.non_alpha.unwrap_or_default(),
            cross_group: self.cross_group.unwrap_or_default(),
            tau,
            grid: grid_spec,
            grid_values: grid.values().to_vec(),
            alpha,
            rank_orientation: self.rank_orientation.unwrap_or_default(),
            min_genuine: self.min_genuine.unwrap_or(1),
            min_impostor: self.min_impostor.unwrap_or(1),
            metrics,
            divergence_class: self.divergence_class.unwrap_or_default(),
            bootstrap: self.bootstrap.unwrap_or(0),
            seed: self.seed.unwrap_or(0),
            format: self.format.unwrap_or_default(),
        })
    }
}

/// `exhaustive` or `sampled:<impostors per identity>`.
pub fn parse_pair_protocol(s: &str, seed: u64) -> Result<PairProtocol> {
    let impostors = match s.split_once(':') {
        None if s == "exhaustive" => ImpostorSampling::Exhaustive,
        Some(("sampled", cap)) => ImpostorSampling::Sampled {
            per_identity: cap
                .parse()
                .map_err(|_| Error::Config(format!("bad impostor cap `{cap}`")))?,
            seed,
        },
        _ => {
            return Err(Error::Config(format!(
                "pairs protocol must be `exhaustive` or `sampled:<cap>`, got `{s}`"
            )))
        }
    };
    Ok(PairProtocol {
        impostors,
        require_genuine: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputSource {
    Scores { path: PathBuf },
    Embeddings { path: PathBuf, pairs: PairProtocol },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PartitionSource {
    Proxy,
    Map { path: PathBuf },
}

/// Every setting of a run, defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub label: String,
    pub input: InputSource,
    pub partition: PartitionSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intersect: Option<PathBuf>,
    pub non_alpha: NonAlphaPolicy,
    pub cross_group: CrossGroupPolicy,
    pub tau: f64,
    pub grid: String,
    pub grid_values: Vec<f64>,
    pub alpha: f64,
    pub rank_orientation: RankOrientation,
    pub min_genuine: u64,
    pub min_impostor: u64,
    pub metrics: Vec<BaseMetric>,
    pub divergence_class: ClassFilter,
    pub bootstrap: usize,
    pub seed: u64,
    pub format: OutputFormat,
}

impl ResolvedConfig {
    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            fdi: FdiOptions {
                alpha: self.alpha,
                orientation: self.rank_orientation,
            },
            validity: ValidityPolicy {
                min_genuine: self.min_genuine,
                min_impostor: self.min_impostor,
            },
            metrics: self.metrics.clone(),
        }
    }

    pub fn grid(&self) -> Result<ThresholdGrid> {
        ThresholdGrid::new(self.grid_values.clone())
    }

    fn same_partitioning(&self, other: &Self) -> bool {
        self.partition == other.partition
            && self.intersect == other.intersect
            && self.non_alpha == other.non_alpha
            && self.cross_group == other.cross_group
    }
}

/// Loaded scores with their group assignment.
pub struct Prepared {
    pub scores: Vec<LabeledScore>,
    pub partition: GroupPartition,
    pub dropped: Vec<String>,
    pub assignment: PairGroupAssignment,
}

impl Prepared {
    fn diagnostics(&self) -> Diagnostics {
        let n_genuine = self.scores.iter().filter(|s| s.is_genuine).count();
        Diagnostics {
            n_pairs: self.scores.len(),
            n_genuine,
            n_impostor: self.scores.len() - n_genuine,
            n_dropped_identities: self.dropped.len(),
            dropped_identities: self.dropped.clone(),
            assignment: self.assignment.diagnostics,
            ..Default::default()
        }
    }
}

pub fn load_scores(cfg: &ResolvedConfig, exec: Execution) -> Result<Vec<LabeledScore>> {
    match &cfg.input {
        InputSource::Scores { path } => read_scores(path),
        InputSource::Embeddings { path, pairs } => {
            build_pairs(&read_embeddings(path)?, pairs, exec)
        }
    }
}

pub fn identities(scores: &[LabeledScore]) -> BTreeSet<&str> {
    scores
        .iter()
        .flat_map(|s| [s.identity_a.as_str(), s.identity_b.as_str()])
        .collect()
}

pub fn prepare(cfg: &ResolvedConfig, exec: Execution) -> Result<Prepared> {
    let scores = load_scores(cfg, exec)?;
    prepare_scores(cfg, scores)
}

pub fn prepare_scores(cfg: &ResolvedConfig, scores: Vec<LabeledScore>) -> Result<Prepared> {
    let (base, dropped) = match &cfg.partition {
        PartitionSource::Proxy => {
            let p = proxy_partition(identities(&scores), cfg.non_alpha)?;
            (p.partition, p.dropped)
        }
        PartitionSource::Map { path } => (read_group_map(path)?, vec![]),
    };
    let partition = match &cfg.intersect {
        Some(path) => intersect_partitions(&base, &read_group_map(path)?)?,
        None => base,
    };
    partition.require_comparable()?;
    let assignment = assign_pairs(&scores, &partition, cfg.cross_group);
    Ok(Prepared {
        scores,
        partition,
        dropped,
        assignment,
    })
}

pub fn run_analyze(cfg: &ResolvedConfig, exec: Execution) -> Result<AnalysisReport> {
    let prep = prepare(cfg, exec)?;
    analyze_prepared(cfg, &prep, exec)
}

pub fn analyze_prepared(
    cfg: &ResolvedConfig,
    prep: &Prepared,
    exec: Execution,
) -> Result<AnalysisReport> {
    let opts = cfg.analysis_options();
    let analysis = analyze_at(&prep.scores, &prep.assignment, cfg.tau, &opts)?;
    let mut diagnostics = prep.diagnostics();
    diagnostics.excluded_groups = analysis
        .table
        .excluded
        .iter()
        .map(|e| e.group.clone())
        .collect();
    let bootstrap = if cfg.bootstrap > 0 {
        Some(bootstrap_fdi(
            &prep.scores,
            &prep.assignment,
            cfg.tau,
            &opts,
            &BootstrapSettings::new(cfg.bootstrap, cfg.seed),
            exec,
        )?)
    } else {
        None
    };
    let mut report = AnalysisReport::new("analyze");
    report.config = Some(cfg.clone());
    report.diagnostics = Some(diagnostics);
    report.divergence = Some(group_score_divergences(
        &prep.scores,
        &prep.assignment,
        cfg.divergence_class,
    ));
    report.analysis = Some(analysis);
    report.bootstrap = bootstrap;
    Ok(report)
}

fn sweep_prepared(
    cfg: &ResolvedConfig,
    prep: &Prepared,
    exec: Execution,
) -> Result<(SweepSeries, Diagnostics)> {
    let series = sweep(
        &prep.scores,
        &prep.assignment,
        &cfg.grid()?,
        &cfg.analysis_options(),
        exec,
    )?;
    let mut diagnostics = prep.diagnostics();
    let excluded: BTreeSet<String> = series
        .valid_points()
        .flat_map(|(_, a)| a.table.excluded.iter().map(|e| e.group.clone()))
        .collect();
    diagnostics.excluded_groups = excluded.into_iter().collect();
    diagnostics.failed_thresholds = series
        .points
        .iter()
        .filter_map(|p| {
            p.failure.as_ref().map(|reason| FailedThreshold {
                tau: p.tau,
                reason: reason.clone(),
            })
        })
        .collect();
    Ok((series, diagnostics))
}

pub fn run_sweep(cfg: &ResolvedConfig, exec: Execution) -> Result<AnalysisReport> {
    let prep = prepare(cfg, exec)?;
    let (series, diagnostics) = sweep_prepared(cfg, &prep, exec)?;
    let mut report = AnalysisReport::new("sweep");
    report.config = Some(cfg.clone());
    report.diagnostics = Some(diagnostics);
    report.sweep = Some(series);
    Ok(report)
}

pub fn run_compare(
    a: &ResolvedConfig,
    b: &ResolvedConfig,
    exec: Execution,
) -> Result<AnalysisReport> {
    if a.grid_values != b.grid_values {
        return Err(Error::SeriesMismatch(format!(
            "grids differ: `{}` vs `{}`",
            a.grid, b.grid
        )));
    }
    if !a.same_partitioning(b) {
        return Err(Error::SeriesMismatch(
            "partition settings differ between the two configs".into(),
        ));
    }
    let mut runs = Vec::new();
    let mut series = Vec::new();
    for cfg in [a, b] {
        let prep = prepare(cfg, exec)?;
        let (s, diagnostics) = sweep_prepared(cfg, &prep, exec)?;
        runs.push(ModelRun {
            label: cfg.label.clone(),
            config: cfg.clone(),
            diagnostics,
        });
        series.push(s);
    }
    let comparison = compare_models(&a.label, &series[0], &b.label, &series[1])?;
    let mut report = AnalysisReport::new("compare");
    report.models = runs;
    report.comparison = Some(comparison);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSize {
    pub group: String,
    pub n_identities: usize,
    pub n_genuine_pairs: usize,
    pub n_impostor_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub partition_name: String,
    pub groups: Vec<GroupSize>,
    pub dropped_identities: Vec<String>,
    pub cross_group_pairs: usize,
    pub unknown_identity_pairs: usize,
}

impl fmt::Display for GroupSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "partition: {}", self.partition_name)?;
        writeln!(
            f,
            "{:<12} {:>10} {:>10} {:>10}",
            "group", "identities", "genuine", "impostor"
        )?;
        for g in &self.groups {
            writeln!(
                f,
                "{:<12} {:>10} {:>10} {:>10}",
                g.group, g.n_identities, g.n_genuine_pairs, g.n_impostor_pairs
            )?;
        }
        writeln!(f, "dropped identities: {}", self.dropped_identities.len())?;
        for id in &self.dropped_identities {
            writeln!(f, "  {id}")?;
        }
        writeln!(f, "cross-group pairs: {}", self.cross_group_pairs)?;
        write!(
            f,
            "pairs with unmapped identities: {}",
            self.unknown_identity_pairs
        )
    }
}

/// Group sizes under the configured partition. `K = 1` is reported, not
/// rejected, so a degenerate partition can be inspected.
pub fn run_group(cfg: &ResolvedConfig, exec: Execution) -> Result<GroupSummary> {
    let scores = load_scores(cfg, exec)?;
    let (base, dropped) = match &cfg.partition {
        PartitionSource::Proxy => {
            let p = proxy_partition(identities(&scores), cfg.non_alpha)?;
            (p.partition, p.dropped)
        }
        PartitionSource::Map { path } => (read_group_map(path)?, vec![]),
    };
    let partition = match &cfg.intersect {
        Some(path) => intersect_partitions(&base, &read_group_map(path)?)?,
        None => base,
    };
    let assignment = assign_pairs(&scores, &partition, cfg.cross_group);
    let groups = partition
        .groups()
        .iter()
        .zip(&assignment.group_pairs)
        .map(|(g, pairs)| {
            let n_genuine_pairs = pairs.iter().filter(|&&i| scores[i].is_genuine).count();
            GroupSize {
                group: g.label.clone(),
                n_identities: g.members.len(),
                n_genuine_pairs,
                n_impostor_pairs: pairs.len() - n_genuine_pairs,
            }
        })
        .collect();
    Ok(GroupSummary {
        partition_name: partition.name().to_string(),
        groups,
        dropped_identities: dropped,
        cross_group_pairs: assignment
            .membership
            .iter()
            .filter(|m| matches!(m, Membership::CrossGroup | Membership::Both(..)))
            .count(),
        unknown_identity_pairs: assignment.diagnostics.unknown_identity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpecFile {
    #[serde(default)]
    pub seed: Option<u64>,
    pub groups: Vec<GroupScoreSpec>,
}

/// Reads a synthetic-data spec: TOML, or JSON when the extension is `.json`.
pub fn read_synth_spec(path: impl AsRef<Path>) -> Result<SynthSpecFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|message| Error::File {
        path: path.to_path_buf(),
        message: format!("invalid synthetic spec: {message}"),
    })
}
