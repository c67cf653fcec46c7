use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use scabench_core::adapters::{
    findings_jsonl, run_adapter, AdapterConfig, AdapterInput, ToolRunResult,
};
use scabench_core::config::RunConfigFile;
use scabench_core::diff::{diff_evaluations, diff_snapshots, EvaluationDiff, SnapshotDiff};
use scabench_core::eval::{
    evaluate, match_findings, outcome_jsonl, DetectionMatrix, EvaluationReport, MatchOutcome,
};
use scabench_core::groundtruth::{build_snapshot, read_snapshot, write_snapshot, Snapshot};
use scabench_core::model::{NormalizedFinding, ToolId};
use scabench_core::report;
use scabench_core::sbom::{emit_sbom, sbom_file_name};
use scabench_core::stats::{cochran_q, pairwise_table, OmnibusResult, PairwiseComparison};
use scabench_core::temporal::run_controlled_logged;
use scabench_core::transport::{Mode, Transport};
use scabench_core::{Error, Result};

use crate::output::{read, RunDir};
use crate::{Cli, Command};

#[derive(Debug, Serialize, Deserialize)]
struct StatsFile {
    omnibus: Option<OmnibusResult>,
    pairwise: Vec<PairwiseComparison>,
}

struct Ctx<'a> {
    cli: &'a Cli,
    cfg: RunConfigFile,
    transport: Transport,
}

impl Ctx<'_> {
    fn run_dir(&self, digest: &str) -> Result<RunDir> {
        RunDir::create(
            self.cli.out.as_deref(),
            &self.cfg.output_dir,
            digest,
            Utc::now(),
        )
    }
}

fn load_config(cli: &Cli) -> Result<RunConfigFile> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfigFile::load(p)?,
        None => RunConfigFile::default(),
    };
    if let Some(d) = &cli.replay {
        cfg.mode = Mode::Replay;
        cfg.fixtures = Some(d.clone());
    }
    if let Some(d) = &cli.record {
        cfg.mode = Mode::Record;
        cfg.fixtures = Some(d.clone());
    }
    cfg.validate()?;
    if let (Mode::Replay, Some(d)) = (cfg.mode, &cfg.fixtures) {
        if !d.is_dir() {
            return Err(Error::Config(format!(
                "fixture directory {} does not exist",
                d.display()
            )));
        }
    }
    Ok(cfg)
}

fn transport(cfg: &RunConfigFile) -> Transport {
    let timeout = Duration::from_secs(cfg.http_timeout_secs);
    match (cfg.mode, &cfg.fixtures) {
        (Mode::Replay, Some(d)) => Transport::replay(d),
        (Mode::Record, Some(d)) => Transport::record(d, timeout),
        _ => Transport::live(timeout),
    }
}

pub fn run(cli: &Cli) -> Result<Value> {
    let cfg = load_config(cli)?;
    let cx = Ctx {
        cli,
        transport: transport(&cfg),
        cfg,
    };
    let (mut dir, mut summary) = dispatch(&cx)?;
    // Replay must never reach a live backend.
    if cx.cfg.mode == Mode::Replay && cx.transport.backend_calls() != 0 {
        return Err(Error::Transport(format!(
            "{} live calls made in replay mode",
            cx.transport.backend_calls()
        )));
    }
    let manifest = json!({
        "command": command_name(&cli.command),
        "created_at": Utc::now(),
        "mode": cx.cfg.mode,
        "artifacts": dir.artifacts(),
    });
    dir.json("run.json", &manifest)?;
    summary["run_dir"] = json!(dir.path);
    Ok(summary)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::BuildGt => "build-gt",
        Command::EmitSbom { .. } => "emit-sbom",
        Command::RunTool { .. } => "run-tool",
        Command::Evaluate { .. } => "evaluate",
        Command::StatsCompare { .. } => "stats-compare",
        Command::DiffGt { .. } => "diff-gt",
        Command::DiffEval { .. } => "diff-eval",
        Command::ControlledRun => "controlled-run",
        Command::Report { .. } => "report",
    }
}

fn dispatch(cx: &Ctx<'_>) -> Result<(RunDir, Value)> {
    match &cx.cli.command {
        Command::BuildGt => build_gt(cx),
        Command::EmitSbom { snapshot } => {
            let snap = read_snapshot(snapshot)?;
            let mut dir = cx.run_dir(&snap.digest)?;
            let name = sbom_file_name(&snap);
            dir.write(&name, emit_sbom(&snap)?)?;
            Ok((dir, json!({ "sbom": name, "digest": snap.digest })))
        }
        Command::RunTool {
            tool,
            snapshot,
            sbom,
        } => run_tool(cx, *tool, snapshot, sbom.as_deref()),
        Command::Evaluate { snapshot, findings } => {
            let snap = read_snapshot(snapshot)?;
            let outcomes = load_outcomes(&snap, findings)?;
            let mut dir = cx.run_dir(&snap.digest)?;
            let rep = write_evaluation(&mut dir, &snap, &outcomes)?;
            Ok((
                dir,
                json!({ "digest": snap.digest, "tools": rep.tool_ids() }),
            ))
        }
        Command::StatsCompare { snapshot, findings } => {
            let snap = read_snapshot(snapshot)?;
            let outcomes = load_outcomes(&snap, findings)?;
            let refs: Vec<&MatchOutcome> = outcomes.iter().collect();
            let m = DetectionMatrix::from_outcomes(&snap, &refs)?;
            let mut dir = cx.run_dir(&snap.digest)?;
            let s = write_stats(&mut dir, &m)?;
            Ok((
                dir,
                json!({ "digest": snap.digest, "omnibus": s.omnibus, "pairs": s.pairwise.len() }),
            ))
        }
        Command::DiffGt { before, after } => {
            let (s0, s1) = (read_snapshot(before)?, read_snapshot(after)?);
            let d = diff_snapshots(&s0, &s1);
            for w in &d.warnings {
                tracing::warn!("{w}");
            }
            let mut dir = cx.run_dir(&s1.digest)?;
            dir.json("snapshot_diff.json", &d)?;
            dir.table("table_ix", &report::table_ix(&d))?;
            Ok((
                dir,
                json!({ "removed": d.removed.len(), "added": d.added.len(), "warnings": d.warnings }),
            ))
        }
        Command::DiffEval { before, after } => {
            let e0: EvaluationReport = parse(before)?;
            let e1: EvaluationReport = parse(after)?;
            let d = diff_evaluations(&e0, &e1)?;
            let mut dir = cx.run_dir(&e1.snapshot_digest)?;
            dir.json("evaluation_diff.json", &d)?;
            dir.table("table_x", &report::table_x(&d))?;
            dir.table("table_xiii", &report::table_xiii(&d))?;
            Ok((dir, json!({ "tools": d.tools() })))
        }
        Command::ControlledRun => controlled_run(cx),
        Command::Report {
            snapshot,
            evaluation,
            stats,
            snapshot_diff,
            evaluation_diff,
        } => report_cmd(
            cx,
            snapshot.as_deref(),
            evaluation.as_deref(),
            stats.as_deref(),
            snapshot_diff.as_deref(),
            evaluation_diff.as_deref(),
        ),
    }
}

fn parse<T: serde::de::DeserializeOwned>(p: &Path) -> Result<T> {
    serde_json::from_str(&read(p)?).map_err(|e| Error::Decode(format!("{}: {e}", p.display())))
}

fn write_snapshot_dir(dir: &mut RunDir, snap: &Snapshot) -> Result<()> {
    write_snapshot(&dir.path.join("snapshot"), snap)?;
    for f in ["entries.jsonl", "stats.json", "manifest.json"] {
        dir.write(
            &format!("snapshot/{f}"),
            read(&dir.path.join("snapshot").join(f))?,
        )?;
    }
    dir.table("table_iii", &report::table_iii(&snap.stats))?;
    dir.table("table_iv", &report::table_iv(&snap.stats))?;
    Ok(())
}

fn build_gt(cx: &Ctx<'_>) -> Result<(RunDir, Value)> {
    let snap = build_snapshot(&cx.cfg.build, &cx.transport)?;
    let mut dir = cx.run_dir(&snap.digest)?;
    write_snapshot_dir(&mut dir, &snap)?;
    Ok((
        dir,
        json!({ "digest": snap.digest, "entries": snap.entries.len() }),
    ))
}

fn tool_config(cx: &Ctx<'_>, tool: ToolId) -> AdapterConfig {
    cx.cfg
        .tool(tool)
        .cloned()
        .unwrap_or_else(|| AdapterConfig::new(tool))
}

fn write_tool_result(dir: &mut RunDir, prefix: &str, r: &ToolRunResult) -> Result<()> {
    dir.write(
        &format!("{prefix}/findings.jsonl"),
        findings_jsonl(&r.findings)?,
    )?;
    for a in &r.raw_artifacts {
        dir.write(&format!("{prefix}/raw/{}", a.name), &a.body)?;
    }
    dir.json(
        &format!("{prefix}/result.json"),
        &json!({
            "tool": r.tool,
            "result_hash": r.result_hash,
            "accounting": r.accounting,
            "skips": r.skips,
            "out_of_input": r.out_of_input(),
            "attempts": r.attempts,
            "started_at": r.started_at,
            "finished_at": r.finished_at,
        }),
    )?;
    Ok(())
}

fn run_tool(
    cx: &Ctx<'_>,
    tool: ToolId,
    snapshot: &Path,
    sbom: Option<&Path>,
) -> Result<(RunDir, Value)> {
    let snap = read_snapshot(snapshot)?;
    let bytes = match sbom {
        Some(p) => std::fs::read(p).map_err(|e| Error::Io {
            path: p.display().to_string(),
            source: e,
        })?,
        None => emit_sbom(&snap)?,
    };
    let input = AdapterInput {
        snapshot: &snap,
        sbom: &bytes,
    };
    let r = run_adapter(tool, input, &tool_config(cx, tool), &cx.transport)?;
    let mut dir = cx.run_dir(&snap.digest)?;
    dir.write(&sbom_file_name(&snap), &bytes)?;
    write_tool_result(&mut dir, &format!("tools/{tool}"), &r)?;
    Ok((
        dir,
        json!({
            "tool": tool,
            "findings": r.findings.len(),
            "accounting": r.accounting,
            "result_hash": r.result_hash,
        }),
    ))
}

/// Findings file for `tool` under `dir`, in any of the supported layouts.
fn findings_path(dir: &Path, tool: ToolId) -> Option<PathBuf> {
    [
        dir.join(format!("{tool}.jsonl")),
        dir.join(tool.as_str()).join("findings.jsonl"),
        dir.join("tools").join(tool.as_str()).join("findings.jsonl"),
    ]
    .into_iter()
    .find(|p| p.is_file())
}

fn load_outcomes(snap: &Snapshot, dir: &Path) -> Result<Vec<MatchOutcome>> {
    if !dir.is_dir() {
        return Err(Error::Usage(format!(
            "findings directory {} does not exist",
            dir.display()
        )));
    }
    let mut out = Vec::new();
    for tool in ToolId::EVALUATED {
        let Some(p) = findings_path(dir, tool) else {
            continue;
        };
        let mut findings = Vec::new();
        for (i, line) in read(&p)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: NormalizedFinding = serde_json::from_str(line)
                .map_err(|e| Error::Decode(format!("{} line {}: {e}", p.display(), i + 1)))?;
            findings.push(f);
        }
        out.push(match_findings(tool, snap, findings)?);
    }
    Ok(out)
}

fn write_evaluation(
    dir: &mut RunDir,
    snap: &Snapshot,
    outcomes: &[MatchOutcome],
) -> Result<EvaluationReport> {
    let mut evals = Vec::new();
    for o in outcomes {
        dir.write(&format!("outcomes/{}.jsonl", o.tool), outcome_jsonl(o)?)?;
        evals.push(evaluate(snap, o)?);
    }
    let rep = EvaluationReport::new(snap.digest.clone(), evals);
    write_report(dir, &rep)?;
    Ok(rep)
}

fn write_report(dir: &mut RunDir, rep: &EvaluationReport) -> Result<()> {
    dir.json("evaluation.json", rep)?;
    dir.table("table_vii", &report::table_vii(rep))?;
    dir.write("plots/fig4_recall_overlap.csv", report::fig4_csv(rep)?)?;
    Ok(())
}

fn write_stats(dir: &mut RunDir, m: &DetectionMatrix) -> Result<StatsFile> {
    let s = StatsFile {
        omnibus: Some(cochran_q(m)?),
        pairwise: pairwise_table(m)?,
    };
    write_stats_file(dir, &s)?;
    Ok(s)
}

fn write_stats_file(dir: &mut RunDir, s: &StatsFile) -> Result<()> {
    dir.json("stats.json", s)?;
    dir.table("table_viii", &report::table_viii(&s.pairwise))?;
    if let Some(o) = &s.omnibus {
        dir.write("reports/omnibus.md", report::omnibus_line(o) + "\n")?;
    }
    dir.write(
        "plots/fig6_significance.csv",
        report::fig6_csv(&s.pairwise)?,
    )?;
    Ok(())
}

fn controlled_run(cx: &Ctx<'_>) -> Result<(RunDir, Value)> {
    let (res, manifest) = run_controlled_logged(&cx.cfg.control(), &cx.transport);
    let digest = match &res {
        Ok(run) => run.snapshot.digest.clone(),
        Err(_) => manifest
            .attempts
            .last()
            .and_then(|a| a.gt_before.clone())
            .unwrap_or_else(|| "aborted".into()),
    };
    let mut dir = cx.run_dir(&digest)?;
    dir.json("manifest.json", &manifest)?;
    let run = match res {
        Ok(run) => run,
        Err(e) => {
            dir.json(
                "run.json",
                &json!({ "command": "controlled-run", "error": e.to_string() }),
            )?;
            return Err(e);
        }
    };
    for w in &run.manifest.warnings {
        tracing::warn!("{w}");
    }
    write_snapshot_dir(&mut dir, &run.snapshot)?;
    dir.write(&sbom_file_name(&run.snapshot), &run.sbom)?;
    for (tool, results) in &run.results {
        for (i, r) in results.iter().enumerate() {
            write_tool_result(&mut dir, &format!("tools/{tool}/repeat-{}", i + 1), r)?;
        }
    }
    for (i, rep) in run.repeat_reports.iter().enumerate() {
        dir.json(&format!("repeats/evaluation-{}.json", i + 1), rep)?;
    }
    write_report(&mut dir, &run.report)?;
    write_stats_file(
        &mut dir,
        &StatsFile {
            omnibus: run.omnibus.clone(),
            pairwise: run.pairwise.clone(),
        },
    )?;
    let hashes: BTreeMap<String, Vec<String>> = run
        .results
        .iter()
        .map(|(t, rs)| {
            (
                t.to_string(),
                rs.iter().map(|r| r.result_hash.clone()).collect(),
            )
        })
        .collect();
    Ok((
        dir,
        json!({
            "accepted_attempt": run.manifest.accepted_attempt,
            "attempts": run.manifest.attempts.len(),
            "digest": run.snapshot.digest,
            "rows": run.matrix.rows(),
            "repeat_hashes": hashes,
            "warnings": run.manifest.warnings,
        }),
    ))
}

fn report_cmd(
    cx: &Ctx<'_>,
    snapshot: Option<&Path>,
    evaluation: Option<&Path>,
    stats: Option<&Path>,
    snapshot_diff: Option<&Path>,
    evaluation_diff: Option<&Path>,
) -> Result<(RunDir, Value)> {
    if [snapshot, evaluation, stats, snapshot_diff, evaluation_diff]
        .iter()
        .all(Option::is_none)
    {
        return Err(Error::Usage(
            "report needs at least one of --snapshot, --evaluation, --stats, --snapshot-diff, --evaluation-diff".into(),
        ));
    }
    let snap = snapshot.map(read_snapshot).transpose()?;
    let eval: Option<EvaluationReport> = evaluation.map(parse).transpose()?;
    let digest = snap
        .as_ref()
        .map(|s| s.digest.clone())
        .or_else(|| eval.as_ref().map(|e| e.snapshot_digest.clone()))
        .filter(|d| !d.is_empty())
        .unwrap_or_else(|| "report".into());
    let mut dir = cx.run_dir(&digest)?;
    let mut tables = Vec::new();
    if let Some(s) = &snap {
        dir.table("table_iii", &report::table_iii(&s.stats))?;
        dir.table("table_iv", &report::table_iv(&s.stats))?;
        tables.extend(["table_iii", "table_iv"]);
    }
    if let Some(e) = &eval {
        dir.table("table_vii", &report::table_vii(e))?;
        dir.write("plots/fig4_recall_overlap.csv", report::fig4_csv(e)?)?;
        tables.push("table_vii");
    }
    if let Some(p) = stats {
        let s: StatsFile = parse(p)?;
        write_stats_file(&mut dir, &s)?;
        tables.push("table_viii");
    }
    if let Some(p) = snapshot_diff {
        let d: SnapshotDiff = parse(p)?;
        dir.table("table_ix", &report::table_ix(&d))?;
        tables.push("table_ix");
    }
    if let Some(p) = evaluation_diff {
        let d: EvaluationDiff = parse(p)?;
        dir.table("table_x", &report::table_x(&d))?;
        dir.table("table_xiii", &report::table_xiii(&d))?;
        tables.extend(["table_x", "table_xiii"]);
    }
    Ok((dir, json!({ "tables": tables })))
}
