//! Differences between two snapshots and between two evaluations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{EvaluationReport, MetricRow, Scope};
use crate::groundtruth::Snapshot;
use crate::model::{EcosystemId, EntryKey, GroundTruthEntry, ToolId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeDiff {
    pub scope: Scope,
    pub removed: usize,
    pub added: usize,
    pub delta_cve_findings: i64,
    pub delta_distinct_cves: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotDiff {
    pub before: String,
    pub after: String,
    /// In the earlier snapshot only, canonical order.
    pub removed: Vec<GroundTruthEntry>,
    /// In the later snapshot only.
    pub added: Vec<GroundTruthEntry>,
    /// One row per ecosystem, then TOTAL.
    pub rows: Vec<ScopeDiff>,
    pub warnings: Vec<String>,
}

impl SnapshotDiff {
    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty()
    }

    pub fn row(&self, scope: Scope) -> Option<&ScopeDiff> {
        self.rows.iter().find(|r| r.scope == scope)
    }
}

fn signed(a: usize, b: usize) -> i64 {
    b as i64 - a as i64
}

/// Set difference on exact `(e, c, v, u)` tuples. An identifier swap on the
/// same component version shows up as one removal plus one addition.
pub fn diff_snapshots(s0: &Snapshot, s1: &Snapshot) -> SnapshotDiff {
    let k0: BTreeSet<EntryKey> = s0.entries.iter().map(GroundTruthEntry::key).collect();
    let k1: BTreeSet<EntryKey> = s1.entries.iter().map(GroundTruthEntry::key).collect();
    let removed: Vec<GroundTruthEntry> = s0
        .entries
        .iter()
        .filter(|e| !k1.contains(&e.key()))
        .cloned()
        .collect();
    let added: Vec<GroundTruthEntry> = s1
        .entries
        .iter()
        .filter(|e| !k0.contains(&e.key()))
        .cloned()
        .collect();

    let mut warnings = Vec::new();
    if s0.config != s1.config {
        warnings.push("snapshots were built with different configurations".to_string());
    }

    let count =
        |v: &[GroundTruthEntry], e: EcosystemId| v.iter().filter(|x| x.ecosystem == e).count();
    let (st0, st1) = (&s0.stats, &s1.stats);
    let mut rows = Vec::new();
    for e in EcosystemId::ALL {
        let a = st0.ecosystems.get(&e).cloned().unwrap_or_default();
        let b = st1.ecosystems.get(&e).cloned().unwrap_or_default();
        rows.push(ScopeDiff {
            scope: Scope::Ecosystem(e),
            removed: count(&removed, e),
            added: count(&added, e),
            delta_cve_findings: signed(a.cve_backed_findings, b.cve_backed_findings),
            delta_distinct_cves: signed(a.distinct_cves, b.distinct_cves),
        });
    }
    // A CVE shared across ecosystems counts once in the TOTAL row.
    rows.push(ScopeDiff {
        scope: Scope::Total,
        removed: removed.len(),
        added: added.len(),
        delta_cve_findings: signed(st0.total.cve_backed_findings, st1.total.cve_backed_findings),
        delta_distinct_cves: signed(st0.global_distinct_cves, st1.global_distinct_cves),
    });
    SnapshotDiff {
        before: s0.digest.clone(),
        after: s1.digest.clone(),
        removed,
        added,
        rows,
        warnings,
    }
}

/// Counts of one side of an evaluation diff.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    fn of(row: Option<&MetricRow>) -> Self {
        row.map(|r| Counts {
            tp: r.tp,
            fp: r.fp_gt,
            fn_: r.fn_,
        })
        .unwrap_or_default()
    }

    /// `tp / (tp + fn)` on these counts.
    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn overlap(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffRow {
    pub tool: ToolId,
    pub scope: Scope,
    pub before: Counts,
    pub after: Counts,
    pub delta_tp: i64,
    pub delta_fp: i64,
    #[serde(rename = "delta_fn")]
    pub delta_fn_: i64,
    /// Pooled over the row's counts, full precision.
    pub delta_recall: Option<f64>,
    pub delta_overlap: Option<f64>,
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn delta(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(b? - a?)
}

impl DiffRow {
    /// Difference of the two ratios after each is rounded to three decimals,
    /// the way the printed tables compute it.
    pub fn delta_recall_3dp(&self) -> Option<f64> {
        delta(
            self.before.recall().map(round3),
            self.after.recall().map(round3),
        )
        .map(round3)
    }

    pub fn delta_overlap_3dp(&self) -> Option<f64> {
        delta(
            self.before.overlap().map(round3),
            self.after.overlap().map(round3),
        )
        .map(round3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationDiff {
    pub before: String,
    pub after: String,
    /// Per tool: ecosystem rows in order, then TOTAL.
    pub rows: Vec<DiffRow>,
}

impl EvaluationDiff {
    pub fn row(&self, tool: ToolId, scope: Scope) -> Option<&DiffRow> {
        self.rows
            .iter()
            .find(|r| r.tool == tool && r.scope == scope)
    }

    pub fn tools(&self) -> Vec<ToolId> {
        let set: BTreeSet<ToolId> = self.rows.iter().map(|r| r.tool).collect();
        set.into_iter().collect()
    }
}

/// Element-wise signed differences. Both reports must cover the same tools.
pub fn diff_evaluations(e0: &EvaluationReport, e1: &EvaluationReport) -> Result<EvaluationDiff> {
    let (t0, t1) = (e0.tool_ids(), e1.tool_ids());
    if t0 != t1 {
        return Err(Error::Usage(format!(
            "evaluations cover different tools: {} vs {}",
            names(&t0),
            names(&t1)
        )));
    }
    let mut rows = Vec::new();
    for tool in t0 {
        let (a, b) = (
            e0.tool(tool).expect("listed"),
            e1.tool(tool).expect("listed"),
        );
        let mut scopes: BTreeMap<Scope, ()> = BTreeMap::new();
        for r in a.rows.iter().chain(&b.rows) {
            scopes.insert(r.scope, ());
        }
        scopes.insert(Scope::Total, ());
        for scope in scopes.into_keys() {
            let before = Counts::of(a.row(scope));
            let after = Counts::of(b.row(scope));
            rows.push(DiffRow {
                tool,
                scope,
                before,
                after,
                delta_tp: signed(before.tp, after.tp),
                delta_fp: signed(before.fp, after.fp),
                delta_fn_: signed(before.fn_, after.fn_),
                delta_recall: delta(before.recall(), after.recall()),
                delta_overlap: delta(before.overlap(), after.overlap()),
            });
        }
    }
    Ok(EvaluationDiff {
        before: e0.snapshot_digest.clone(),
        after: e1.snapshot_digest.clone(),
        rows,
    })
}

fn names(tools: &[ToolId]) -> String {
    let v: Vec<String> = tools.iter().map(ToString::to_string).collect();
    format!("[{}]", v.join(", "))
}
