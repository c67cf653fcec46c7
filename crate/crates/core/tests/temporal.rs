//! Controlled runs: acceptance, drift rejection, execution failures, abort.

mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use common::{control, dataset, drifted, tool_config, Flaky, Generations};
use scabench_core::eval::Scope;
use scabench_core::model::ToolId;
use scabench_core::sim::SimBackend;
use scabench_core::temporal::{run_controlled, AttemptStatus};
use scabench_core::transport::{Backend, Request, Response, Transport, EXEC_METHOD};
use scabench_core::Result;

#[test]
fn frozen_replay_is_accepted_on_first_attempt() {
    let d = dataset();
    let dir = tempfile::tempdir().unwrap();
    let rec = Transport::recording_backend(Arc::new(SimBackend::new(d.clone())), dir.path());
    let recorded = run_controlled(&control(&d, 3), &rec).unwrap();

    let replay = Transport::replay(dir.path());
    let run = run_controlled(&control(&d, 3), &replay).unwrap();
    assert_eq!(replay.backend_calls(), 0);
    assert_eq!(run.manifest.accepted_attempt, Some(1));
    assert_eq!(run.manifest.attempts.len(), 1);
    let a = &run.manifest.attempts[0];
    assert_eq!(a.status, AttemptStatus::Accepted);
    assert_eq!(a.gt_before, a.gt_after);
    assert_eq!(a.gt_before.as_deref(), Some(run.snapshot.digest.as_str()));
    assert_eq!(a.repeat_results.len(), 5);
    assert!(a
        .repeat_results
        .values()
        .all(|h| h.len() == 2 && h[0] == h[1]));
    assert!(run.manifest.warnings.is_empty());

    assert_eq!(run.matrix.rows(), 2 * run.snapshot.entries.len());
    assert_eq!(run.matrix.tools.len(), 5);
    assert_eq!(run.repeat_reports.len(), 2);
    assert_eq!(run.report, run.repeat_reports[0]);
    assert!(run.omnibus.is_some());
    assert_eq!(run.pairwise.len(), 10);

    assert_eq!(run.snapshot.digest, recorded.snapshot.digest);
    assert_eq!(run.report, recorded.report);
    assert_eq!(run.matrix, recorded.matrix);
}

#[test]
fn one_drift_rejects_exactly_one_attempt() {
    let d = dataset();
    let t = Transport::with_backend(Arc::new(Generations::new(&d, |g| g == 0)));
    let run = run_controlled(&control(&d, 3), &t).unwrap();
    let statuses: Vec<AttemptStatus> = run.manifest.attempts.iter().map(|a| a.status).collect();
    assert_eq!(
        statuses,
        [AttemptStatus::FailedDrift, AttemptStatus::Accepted]
    );
    let first = &run.manifest.attempts[0];
    assert_ne!(first.gt_before, first.gt_after);
    // The rejected attempt still ran every tool twice before the rebuild.
    assert!(first.repeat_results.values().all(|h| h.len() == 2));
    assert_eq!(
        run.snapshot.digest,
        common::sim_snapshot(&drifted(&d)).digest
    );
    assert_eq!(run.manifest.accepted_attempt, Some(2));
}

#[test]
fn persistent_drift_aborts_after_max_attempts() {
    let d = dataset();
    let t = Transport::with_backend(Arc::new(Generations::new(&d, |g| g % 2 == 0)));
    let err = run_controlled(&control(&d, 3), &t).unwrap_err();
    assert_eq!(err.kind(), "aborted");
    match err {
        scabench_core::Error::Aborted { attempts, reason } => {
            assert_eq!(attempts, 3);
            assert_eq!(reason.matches("FailedDrift").count(), 3);
        }
        e => panic!("{e}"),
    }
}

#[test]
fn execution_failure_moves_to_next_attempt() {
    let d = dataset();
    let mut cfg = control(&d, 2);
    for a in &mut cfg.adapters {
        a.retry = 1;
    }
    let t = Transport::with_backend(Arc::new(Flaky {
        inner: SimBackend::new(d.clone()),
        failures: AtomicUsize::new(1),
    }));
    let run = run_controlled(&cfg, &t).unwrap();
    let statuses: Vec<AttemptStatus> = run.manifest.attempts.iter().map(|a| a.status).collect();
    assert_eq!(
        statuses,
        [AttemptStatus::FailedExecution, AttemptStatus::Accepted]
    );
    let failed = &run.manifest.attempts[0];
    assert!(failed
        .error
        .as_deref()
        .unwrap()
        .contains("authentication failed"));
    assert!(failed.gt_after.is_none());

    let t = Transport::with_backend(Arc::new(Flaky {
        inner: SimBackend::new(d.clone()),
        failures: AtomicUsize::new(usize::MAX),
    }));
    assert_eq!(run_controlled(&cfg, &t).unwrap_err().kind(), "aborted");
}

/// Trivy sees the drifted database on its first invocation only.
struct StaleScanner {
    fresh: SimBackend,
    stale: SimBackend,
    execs: AtomicUsize,
}

impl Backend for StaleScanner {
    fn send(&self, req: &Request) -> Result<Response> {
        if req.method == EXEC_METHOD
            && req.url == "exec:trivy"
            && self.execs.fetch_add(1, Ordering::SeqCst) == 0
        {
            return self.stale.send(req);
        }
        self.fresh.send(req)
    }
}

#[test]
fn repeat_divergence_is_recorded_not_rejected() {
    let d = dataset();
    let mut stale = d.clone();
    let dropped = stale.advisories.remove(0).id;
    let t = Transport::with_backend(Arc::new(StaleScanner {
        fresh: SimBackend::new(d.clone()),
        stale: SimBackend::new(stale),
        execs: AtomicUsize::new(0),
    }));
    let run = run_controlled(&control(&d, 1), &t).unwrap();
    assert_eq!(run.manifest.accepted_attempt, Some(1), "dropped {dropped}");
    assert_eq!(run.manifest.repeat_divergence, [ToolId::Trivy]);
    assert_eq!(run.manifest.warnings.len(), 1);
    assert!(run.manifest.warnings[0].contains("trivy"));

    let hashes = &run.manifest.attempts[0].repeat_results[&ToolId::Trivy];
    assert_ne!(hashes[0], hashes[1]);
    let r: Vec<f64> = run
        .repeat_reports
        .iter()
        .map(|rep| rep.tool(ToolId::Trivy).unwrap().total().recall.unwrap())
        .collect();
    assert_ne!(r[0], r[1]);
    let agg = run
        .report
        .tool(ToolId::Trivy)
        .unwrap()
        .row(Scope::Total)
        .unwrap();
    assert!((agg.recall.unwrap() - (r[0] + r[1]) / 2.0).abs() < 1e-12);
}

#[test]
fn invalid_control_config_is_rejected() {
    let d = dataset();
    let mut cfg = control(&d, 0);
    assert_eq!(
        run_controlled(&cfg, &common::sim_transport(&d))
            .unwrap_err()
            .kind(),
        "config"
    );
    cfg.max_attempts = 1;
    cfg.repeats = 0;
    assert_eq!(
        run_controlled(&cfg, &common::sim_transport(&d))
            .unwrap_err()
            .kind(),
        "config"
    );
    cfg.repeats = 2;
    cfg.adapters.push(tool_config(ToolId::Trivy));
    assert_eq!(
        run_controlled(&cfg, &common::sim_transport(&d))
            .unwrap_err()
            .kind(),
        "config"
    );
}
