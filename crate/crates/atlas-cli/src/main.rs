//! `atlas` — stage-driven pipeline for extracting and analyzing IPv4
//! endpoints embedded in IoT malware corpora.
//!
//! Usage: `atlas <stage> --config <path> --out <dir>` with per-stage
//! overrides. Stages: extract, enrich, affinity, geo, exposure, netscope,
//! report. Exit codes: 0 success, 2 config error, 3 dependency error,
//! 4 provider error.

mod artifacts;
mod config;
mod error;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use atlas_core::affinity::OverlapMetric;
use stages::Overrides;

#[derive(Parser)]
#[command(
    name = "atlas",
    about = "IoT malware endpoint extraction and analytics pipeline",
    version
)]
struct Cli {
    #[command(subcommand)]
    stage: Stage,
}

#[derive(Subcommand)]
enum Stage {
    /// Scan a directory of binary samples for IPv4 endpoints.
    Extract(StageArgs),
    /// Resolve geolocation and scan intelligence for extracted endpoints.
    Enrich(StageArgs),
    /// Build the dropzone→target graph and overlap statistics.
    Affinity(StageArgs),
    /// Country tables, flow map, and distance histogram.
    Geo(StageArgs),
    /// Port profiles, amplification flags, CVE and closure tables.
    Exposure(StageArgs),
    /// Masked-network scope expansion and its exposure report.
    Netscope(StageArgs),
    /// Bundle all available artifacts with a digest manifest.
    Report(StageArgs),
}

#[derive(Args)]
struct StageArgs {
    /// Pipeline config (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory shared by all stages of one run.
    #[arg(long)]
    out: PathBuf,
    /// Extract-stage input directory (overrides config input_dir).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Port-closure usage threshold override, e.g. 0.10.
    #[arg(long)]
    threshold: Option<f64>,
    /// Overlap metric override.
    #[arg(long, value_parser = parse_metric)]
    metric: Option<OverlapMetric>,
    /// Flow-map degree threshold override (strictly-greater-than).
    #[arg(long)]
    min_degree: Option<u64>,
    /// Force fixture providers regardless of config.
    #[arg(long)]
    offline: bool,
    /// Emit the full per-pair overlap table.
    #[arg(long)]
    pair_table: bool,
}

fn parse_metric(s: &str) -> Result<OverlapMetric, String> {
    match s {
        "jaccard" => Ok(OverlapMetric::Jaccard),
        "containment" => Ok(OverlapMetric::Containment),
        other => Err(format!("unknown metric {other:?}; use jaccard or containment")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.stage {
        Stage::Extract(a) => ("extract", a),
        Stage::Enrich(a) => ("enrich", a),
        Stage::Affinity(a) => ("affinity", a),
        Stage::Geo(a) => ("geo", a),
        Stage::Exposure(a) => ("exposure", a),
        Stage::Netscope(a) => ("netscope", a),
        Stage::Report(a) => ("report", a),
    };
    let overrides = Overrides {
        input: args.input.clone(),
        threshold: args.threshold,
        metric: args.metric,
        min_degree: args.min_degree,
        offline: args.offline,
        pair_table: args.pair_table,
    };
    match stages::run_stage(name, args.config.as_deref(), &args.out, &overrides) {
        Ok(()) => {
            eprintln!("{name}: ok ({})", args.out.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{name}: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
