//! Temporally controlled evaluation runs.
//!
//! Each attempt builds the ground truth, runs every tool `R` times on that
//! fixed snapshot, then rebuilds the ground truth. The attempt counts only if
//! all runs succeeded and both builds hash the same.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::adapters::{run_all, AdapterConfig, AdapterInput, ToolRunResult};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate, match_findings, DetectionMatrix, EvaluationReport, MatchOutcome, MetricRow,
    ToolEvaluation,
};
use crate::groundtruth::{build_snapshot, BuildConfig, Snapshot};
use crate::model::ToolId;
use crate::sbom::emit_sbom;
use crate::stats::{cochran_q, pairwise_table, OmnibusResult, PairwiseComparison};
use crate::transport::Transport;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlConfig {
    pub build: BuildConfig,
    pub adapters: Vec<AdapterConfig>,
    pub max_attempts: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_repeats() -> usize {
    2
}

impl ControlConfig {
    pub fn new(build: BuildConfig, adapters: Vec<AdapterConfig>, max_attempts: usize) -> Self {
        ControlConfig {
            build,
            adapters,
            max_attempts,
            repeats: default_repeats(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_attempts < 1 {
            return Err(Error::Config("max_attempts must be at least 1".into()));
        }
        if self.repeats < 1 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.adapters.is_empty() {
            return Err(Error::Config("no tools configured".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &self.adapters {
            a.validate()?;
            if !seen.insert(a.tool) {
                return Err(Error::Config(format!("tool {} configured twice", a.tool)));
            }
        }
        self.build.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttemptStatus {
    Accepted,
    FailedExecution,
    FailedDrift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAttempt {
    pub attempt_index: usize,
    pub gt_before: Option<String>,
    pub gt_after: Option<String>,
    /// Result hash per tool, one per completed repeat.
    pub repeat_results: BTreeMap<ToolId, Vec<String>>,
    pub status: AttemptStatus,
    pub error: Option<String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

impl RunAttempt {
    /// Tools whose repeats did not all produce the same result hash.
    pub fn divergent_tools(&self) -> Vec<ToolId> {
        self.repeat_results
            .iter()
            .filter(|(_, h)| h.windows(2).any(|w| w[0] != w[1]))
            .map(|(t, _)| *t)
            .collect()
    }
}

/// Auditable attempt log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub max_attempts: usize,
    pub repeats: usize,
    pub attempts: Vec<RunAttempt>,
    pub accepted_attempt: Option<usize>,
    pub repeat_divergence: Vec<ToolId>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct AcceptedRun {
    pub snapshot: Snapshot,
    pub sbom: Vec<u8>,
    /// Per tool, one result per repeat.
    pub results: BTreeMap<ToolId, Vec<ToolRunResult>>,
    /// Outcomes per repeat, in tool order.
    pub outcomes: Vec<Vec<MatchOutcome>>,
    pub repeat_reports: Vec<EvaluationReport>,
    pub report: EvaluationReport,
    /// Repeats stacked: `R * |GT|` rows.
    pub matrix: DetectionMatrix,
    pub omnibus: Option<OmnibusResult>,
    pub pairwise: Vec<PairwiseComparison>,
    pub manifest: RunManifest,
}

enum Outcome {
    Accepted(Box<AcceptedRun>),
    Rejected,
}

/// Errors worth another attempt. Bad configuration or usage will not get better.
fn transient(e: &Error) -> bool {
    !matches!(e, Error::Config(_) | Error::Usage(_))
}

/// Runs attempts until one is accepted or `max_attempts` is used up.
pub fn run_controlled(cfg: &ControlConfig, transport: &Transport) -> Result<AcceptedRun> {
    run_controlled_logged(cfg, transport).0
}

/// Like [`run_controlled`], also returning the manifest when the run aborts.
pub fn run_controlled_logged(
    cfg: &ControlConfig,
    transport: &Transport,
) -> (Result<AcceptedRun>, RunManifest) {
    let mut manifest = RunManifest {
        max_attempts: cfg.max_attempts,
        repeats: cfg.repeats,
        attempts: Vec::new(),
        accepted_attempt: None,
        repeat_divergence: Vec::new(),
        warnings: Vec::new(),
    };
    if let Err(e) = cfg.validate() {
        return (Err(e), manifest);
    }
    for a in 1..=cfg.max_attempts {
        match attempt(cfg, transport, a, &mut manifest) {
            Ok(Outcome::Accepted(mut run)) => {
                run.manifest = manifest.clone();
                return (Ok(*run), manifest);
            }
            Ok(Outcome::Rejected) => {
                let last = manifest.attempts.last().expect("attempt recorded");
                tracing::warn!(attempt = a, status = ?last.status, error = ?last.error, "attempt rejected");
            }
            Err(e) => return (Err(e), manifest),
        }
    }
    let reason = manifest
        .attempts
        .iter()
        .map(|a| format!("#{} {:?}", a.attempt_index, a.status))
        .collect::<Vec<_>>()
        .join(", ");
    let err = Error::Aborted {
        attempts: cfg.max_attempts,
        reason,
    };
    (Err(err), manifest)
}

fn attempt(
    cfg: &ControlConfig,
    t: &Transport,
    index: usize,
    manifest: &mut RunManifest,
) -> Result<Outcome> {
    let started_at = t.now()?;
    let mut log = RunAttempt {
        attempt_index: index,
        gt_before: None,
        gt_after: None,
        repeat_results: BTreeMap::new(),
        status: AttemptStatus::FailedExecution,
        error: None,
        started_at,
        finished_at: started_at,
    };
    macro_rules! reject {
        ($status:expr, $err:expr) => {{
            log.status = $status;
            log.error = $err;
            log.finished_at = t.now()?;
            manifest.attempts.push(log);
            return Ok(Outcome::Rejected);
        }};
    }
    macro_rules! step {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(e) if transient(&e) => {
                    reject!(AttemptStatus::FailedExecution, Some(e.to_string()))
                }
                Err(e) => return Err(e),
            }
        };
    }

    let gt0 = step!(build_snapshot(&cfg.build, t));
    log.gt_before = Some(gt0.digest.clone());
    let sbom = emit_sbom(&gt0)?;
    let input = AdapterInput {
        snapshot: &gt0,
        sbom: &sbom,
    };
    let jobs: Vec<(AdapterConfig, Transport)> = cfg
        .adapters
        .iter()
        .map(|a| (a.clone(), t.clone()))
        .collect();

    let mut results: BTreeMap<ToolId, Vec<ToolRunResult>> = BTreeMap::new();
    for _ in 0..cfg.repeats {
        for r in run_all(input, &jobs) {
            let r = step!(r);
            log.repeat_results
                .entry(r.tool)
                .or_default()
                .push(r.result_hash.clone());
            results.entry(r.tool).or_default().push(r);
        }
    }

    let gt1 = step!(build_snapshot(&cfg.build, t));
    log.gt_after = Some(gt1.digest.clone());
    if gt0.digest != gt1.digest {
        reject!(AttemptStatus::FailedDrift, None);
    }

    let divergent = log.divergent_tools();
    if !divergent.is_empty() {
        let names: Vec<String> = divergent.iter().map(ToString::to_string).collect();
        let msg = format!(
            "attempt {index}: repeat result hashes differ for {}; inspect before using these results",
            names.join(", ")
        );
        tracing::warn!("{msg}");
        manifest.warnings.push(msg);
        manifest.repeat_divergence = divergent;
    }

    let tools: Vec<ToolId> = results.keys().copied().collect();
    let mut outcomes = Vec::with_capacity(cfg.repeats);
    let mut repeat_reports = Vec::with_capacity(cfg.repeats);
    let mut parts = Vec::with_capacity(cfg.repeats);
    for rep in 0..cfg.repeats {
        let per_tool: Vec<MatchOutcome> = tools
            .iter()
            .map(|tool| match_findings(*tool, &gt0, results[tool][rep].findings.clone()))
            .collect::<Result<_>>()?;
        let evals = per_tool
            .iter()
            .map(|o| evaluate(&gt0, o))
            .collect::<Result<Vec<_>>>()?;
        repeat_reports.push(EvaluationReport::new(gt0.digest.clone(), evals));
        let refs: Vec<&MatchOutcome> = per_tool.iter().collect();
        parts.push(DetectionMatrix::from_outcomes(&gt0, &refs)?);
        outcomes.push(per_tool);
    }
    let matrix = DetectionMatrix::concat(&parts)?;
    let report = aggregate_repeats(&repeat_reports)?;
    let (omnibus, pairwise) = if tools.len() >= 2 && matrix.rows() > 0 {
        (Some(cochran_q(&matrix)?), pairwise_table(&matrix)?)
    } else {
        (None, Vec::new())
    };

    log.status = AttemptStatus::Accepted;
    log.finished_at = t.now()?;
    manifest.attempts.push(log);
    manifest.accepted_attempt = Some(index);
    Ok(Outcome::Accepted(Box::new(AcceptedRun {
        snapshot: gt0,
        sbom,
        results,
        outcomes,
        repeat_reports,
        report,
        matrix,
        omnibus,
        pairwise,
        manifest: manifest.clone(),
    })))
}

fn mean(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Repeat-level aggregation: recall and overlap are means over repeats,
/// counts are those of the first repeat. Identical repeats aggregate to
/// themselves.
pub fn aggregate_repeats(reports: &[EvaluationReport]) -> Result<EvaluationReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Usage("no repeat reports to aggregate".into()))?;
    if reports.len() == 1 {
        return Ok(first.clone());
    }
    let mut tools = Vec::new();
    for te in &first.tools {
        let mut rows = Vec::new();
        for row in &te.rows {
            let peers: Vec<&MetricRow> = reports
                .iter()
                .map(|r| {
                    r.tool(te.tool)
                        .and_then(|t| t.row(row.scope))
                        .ok_or_else(|| {
                            Error::Usage(format!("repeat lacks {} {}", te.tool, row.scope))
                        })
                })
                .collect::<Result<_>>()?;
            let mut out = row.clone();
            out.recall = mean(&peers.iter().map(|p| p.recall).collect::<Vec<_>>());
            out.overlap = mean(&peers.iter().map(|p| p.overlap).collect::<Vec<_>>());
            rows.push(out);
        }
        tools.push(ToolEvaluation {
            tool: te.tool,
            rows,
        });
    }
    Ok(EvaluationReport::new(first.snapshot_digest.clone(), tools))
}
