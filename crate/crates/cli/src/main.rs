use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use fdi_core::disagreement::{BaseMetric, RankOrientation};
use fdi_core::grouping::{CrossGroupPolicy, NonAlphaPolicy};
use fdi_core::io::{write_group_map, write_scores};
use fdi_core::metrics::ClassFilter;
use fdi_core::pipeline::{self, read_synth_spec, ResolvedConfig, RunConfig};
use fdi_core::report::{write_plot_series, write_report, AnalysisReport, OutputFormat};
use fdi_core::synth::{self, fixture_by_name};
use fdi_core::Execution;

/// Per-group verification metrics and the Fairness Disagreement Index.
#[derive(Parser)]
#[command(name = "fdi", version, about)]
struct Cli {
    /// Run on one thread instead of the rayon pool.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Group metrics, disparities, FDI and score divergences at one threshold.
    Analyze(RunArgs),
    /// FDI and group metrics over a threshold grid.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Also write the long-format plot series CSV here.
        #[arg(long)]
        plot_out: Option<PathBuf>,
    },
    /// Compare FDI(tau) of two models over the same grid and partition.
    Compare {
        #[arg(long)]
        config_a: PathBuf,
        #[arg(long)]
        config_b: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Generate a synthetic score file.
    Synth {
        /// TOML (or .json) file with a `groups` array.
        #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
        spec: Option<PathBuf>,
        /// Built-in fixture: table-ii, opposing-conclusions, threshold-flip, agreement.
        #[arg(long)]
        fixture: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the identity-to-group map.
        #[arg(long)]
        group_map_out: Option<PathBuf>,
    },
    /// Show group sizes under a partition.
    Group(RunArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Report destination: a file for json, a directory for tabular. json
    /// goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = enum_value::<OutputFormat>)]
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with run settings; a setting given both here and as a flag is an error.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    label: Option<String>,
    /// Score file: identity_a,identity_b,score,is_genuine
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Embedding file: identity_id,e0,e1,...
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// `exhaustive` or `sampled:<impostors per identity>`.
    #[arg(long)]
    pairs_protocol: Option<String>,
    /// Group map: identity_id,group
    #[arg(long)]
    group_map: Option<PathBuf>,
    /// Group identities by the first letter of their id (the default).
    #[arg(long)]
    proxy_groups: bool,
    /// Second group map, intersected with the primary partition.
    #[arg(long)]
    intersect: Option<PathBuf>,
    /// Proxy handling of ids not starting with a letter: reject, drop, other.
    #[arg(long, value_parser = enum_value::<NonAlphaPolicy>)]
    non_alpha: Option<NonAlphaPolicy>,
    #[arg(long)]
    tau: Option<f64>,
    /// start:end:step
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// raw (ascending values) or oriented (ACC ranked as a loss).
    #[arg(long, value_parser = enum_value::<RankOrientation>)]
    rank_orientation: Option<RankOrientation>,
    /// exclude or duplicate.
    #[arg(long, value_parser = enum_value::<CrossGroupPolicy>)]
    cross_group: Option<CrossGroupPolicy>,
    #[arg(long)]
    min_genuine: Option<u64>,
    #[arg(long)]
    min_impostor: Option<u64>,
    /// Comma-separated subset of FPR,FNR,ACC.
    #[arg(long, value_delimiter = ',', value_parser = metric_value)]
    metrics: Option<Vec<BaseMetric>>,
    /// genuine, impostor or all.
    #[arg(long, value_parser = enum_value::<ClassFilter>)]
    divergence_class: Option<ClassFilter>,
    /// Bootstrap resamples for the FDI interval (0 disables).
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

impl RunArgs {
    fn resolve(&self) -> Result<ResolvedConfig> {
        let flags = RunConfig {
            label: self.label.clone(),
            scores: self.scores.clone(),
            embeddings: self.embeddings.clone(),
            pairs_protocol: self.pairs_protocol.clone(),
            group_map: self.group_map.clone(),
            proxy_groups: self.proxy_groups.then_some(true),
            intersect: self.intersect.clone(),
            non_alpha: self.non_alpha,
            tau: self.tau,
            grid: self.grid.clone(),
            alpha: self.alpha,
            rank_orientation: self.rank_orientation,
            cross_group: self.cross_group,
            min_genuine: self.min_genuine,
            min_impostor: self.min_impostor,
            metrics: self.metrics.clone(),
            divergence_class: self.divergence_class,
            bootstrap: self.bootstrap,
            seed: self.seed,
            format: self.output.format,
        };
        let merged = match &self.config {
            Some(path) => flags.merge(RunConfig::from_toml_file(path)?)?,
            None => flags,
        };
        Ok(merged.resolve()?)
    }
}

/// Parses a CLI word into one of the core enums through its serde name.
fn enum_value<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn metric_value(s: &str) -> Result<BaseMetric, String> {
    enum_value(&s.trim().to_ascii_uppercase())
}

fn emit(report: &AnalysisReport, format: OutputFormat, out: Option<&Path>) -> Result<()> {
    match (format, out) {
        (_, Some(path)) => {
            write_report(report, format, path)?;
            eprintln!("wrote {}", path.display());
        }
        (OutputFormat::Json, None) => print!("{}", report.to_json()?),
        (OutputFormat::Tabular, None) => bail!("tabular output needs --out <DIR>"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Analyze(args) => {
            let cfg = args.resolve()?;
            let report = pipeline::run_analyze(&cfg, exec)?;
            emit(&report, cfg.format, args.output.out.as_deref())
        }
        Command::Sweep { run, plot_out } => {
            let cfg = run.resolve()?;
            let report = pipeline::run_sweep(&cfg, exec)?;
            if let (Some(path), Some(series)) = (&plot_out, &report.sweep) {
                write_plot_series(series, path)?;
            }
            emit(&report, cfg.format, run.output.out.as_deref())
        }
        Command::Compare {
            config_a,
            config_b,
            output,
        } => {
            let load = |p: &Path| -> Result<ResolvedConfig> {
                RunConfig::from_toml_file(p)?
                    .resolve()
                    .with_context(|| format!("in {}", p.display()))
            };
            let (a, b) = (load(&config_a)?, load(&config_b)?);
            let report = pipeline::run_compare(&a, &b, exec)?;
            emit(
                &report,
                output.format.unwrap_or_default(),
                output.out.as_deref(),
            )
        }
        Command::Synth {
            spec,
            fixture,
            seed,
            out,
            group_map_out,
        } => {
            let (specs, seed) = match (spec, fixture) {
                (Some(path), _) => {
                    let file = read_synth_spec(&path)?;
                    if seed.is_some() && file.seed.is_some() {
                        bail!(
                            "`seed` is set both on the command line and in {}",
                            path.display()
                        );
                    }
                    (file.groups, seed.or(file.seed).unwrap_or(0))
                }
                (None, Some(name)) => {
                    let f = fixture_by_name(&name)
                        .with_context(|| format!("unknown fixture `{name}`"))?;
                    (f.specs, seed.unwrap_or(f.seed))
                }
                (None, None) => bail!("give --spec or --fixture"),
            };
            let data = synth::generate(&specs, seed)?;
            write_scores(&out, &data.scores)?;
            if let Some(path) = group_map_out {
                write_group_map(path, &data.partition()?)?;
            }
            eprintln!("seed: {seed}");
            eprintln!("wrote {} pairs to {}", data.scores.len(), out.display());
            Ok(())
        }
        Command::Group(args) => {
            let cfg = args.resolve()?;
            println!("{}", pipeline::run_group(&cfg, exec)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
