//! `scabench`: build ground truth, run tools, evaluate and compare.

mod commands;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scabench_core::model::ToolId;

#[derive(Debug, Parser)]
#[command(name = "scabench", version, about = "SCA tool benchmark harness")]
pub struct Cli {
    /// Run configuration (TOML or JSON). Built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Serve every request from this fixture directory; no network.
    #[arg(long, global = true, conflicts_with = "record")]
    pub replay: Option<PathBuf>,
    /// Go to the network and store every exchange in this directory.
    #[arg(long, global = true)]
    pub record: Option<PathBuf>,
    /// Write artifacts here instead of `<output_dir>/<timestamp>-<digest>/`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a ground-truth snapshot with statistics.
    BuildGt,
    /// Emit the CycloneDX SBOM for a snapshot.
    EmitSbom {
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Run one tool adapter against a snapshot.
    RunTool {
        tool: ToolId,
        #[arg(long)]
        snapshot: PathBuf,
        /// SBOM to submit; emitted from the snapshot when omitted.
        #[arg(long)]
        sbom: Option<PathBuf>,
    },
    /// Match findings against a snapshot and compute recall and overlap.
    Evaluate {
        #[arg(long)]
        snapshot: PathBuf,
        /// Directory holding `<tool>.jsonl` or `<tool>/findings.jsonl`.
        #[arg(long)]
        findings: PathBuf,
    },
    /// Cochran's Q and pairwise McNemar tests over the tools' detections.
    StatsCompare {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        findings: PathBuf,
    },
    /// Difference between two snapshots.
    DiffGt { before: PathBuf, after: PathBuf },
    /// Difference between two evaluation.json files.
    DiffEval { before: PathBuf, after: PathBuf },
    /// Temporally controlled run: build, run all tools, rebuild, accept or retry.
    ControlledRun,
    /// Render tables from previously written JSON artifacts.
    Report {
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long)]
        evaluation: Option<PathBuf>,
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        snapshot_diff: Option<PathBuf>,
        #[arg(long)]
        evaluation_diff: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(summary) => {
            // A closed stdout is not a failure of the command.
            let _ = writeln!(
                std::io::stdout(),
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let body =
                serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
