//! Matching of normalized findings against a ground-truth snapshot.

mod matrix;
mod metrics;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::canonical::to_canonical_json;
use crate::error::{Error, Result};
use crate::groundtruth::Snapshot;
use crate::model::{
    dedup_findings, EcosystemId, GroundTruthEntry, MatchBasis, NormalizedFinding, ToolId, VulnId,
};
use crate::version::{compare_raw, parse_range, parse_version, satisfies, VersionRange};

pub use matrix::{detection_vector, DetectionMatrix};
pub use metrics::{
    aggregate_total, evaluate, metrics, EvaluationReport, MetricRow, Scope, ToolEvaluation,
};

/// The finding that credited a ground-truth entry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatchedBy {
    pub version: String,
    pub vuln: VulnId,
    pub basis: MatchBasis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TpEntry {
    pub entry: GroundTruthEntry,
    pub matched_by: Vec<MatchedBy>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub tool: ToolId,
    pub tp: Vec<TpEntry>,
    pub fp_gt: Vec<NormalizedFinding>,
    #[serde(rename = "fn")]
    pub fn_: Vec<GroundTruthEntry>,
    /// Deduplicated findings credited to at least one entry.
    pub matched_findings: Vec<NormalizedFinding>,
    /// Raw findings absorbed by deduplication.
    pub duplicates: usize,
}

fn versions_equal(eco: EcosystemId, a: &str, b: &str) -> bool {
    a == b || matches!(compare_raw(eco, a, b), Ok(Ordering::Equal))
}

fn finding_range(f: &NormalizedFinding) -> Result<Option<VersionRange>> {
    if f.basis != MatchBasis::Range {
        return Ok(None);
    }
    let text = f.affected.as_deref().ok_or_else(|| {
        Error::Data(format!(
            "range finding {} on {} has no affected interval",
            f.vuln, f.component
        ))
    })?;
    parse_range(f.ecosystem, text)
        .map(Some)
        .map_err(|e| Error::Data(format!("finding {} on {}: {e}", f.vuln, f.component)))
}

/// How `f` matches `g`, if at all. Exact wins when both apply.
fn match_basis(
    g: &GroundTruthEntry,
    f: &NormalizedFinding,
    range: Option<&VersionRange>,
) -> Option<MatchBasis> {
    if g.ecosystem != f.ecosystem || g.component != f.component {
        return None;
    }
    if f.identifiers().is_disjoint(&g.identifiers()) {
        return None;
    }
    if versions_equal(g.ecosystem, &g.version.raw, &f.version) {
        return Some(MatchBasis::Exact);
    }
    let range = range?;
    // A GT version the grammar rejects can only match exactly.
    let v = parse_version(g.ecosystem, &g.version.raw).ok()?;
    satisfies(g.ecosystem, &v, range)
        .ok()?
        .then_some(MatchBasis::Range)
}

/// Matches one tool's findings against `gt`.
///
/// Findings are deduplicated first, so `fp_gt` never counts the same
/// `(e, c, v, u)` twice. A finding may credit several entries.
pub fn match_findings(
    tool: ToolId,
    gt: &Snapshot,
    findings: Vec<NormalizedFinding>,
) -> Result<MatchOutcome> {
    for f in &findings {
        if f.tool != tool {
            return Err(Error::Usage(format!(
                "finding from {} passed to {tool} matching",
                f.tool
            )));
        }
        if f.ecosystem != f.component.ecosystem {
            return Err(Error::Data(format!(
                "finding {} declares {} but its component {} is {}",
                f.vuln, f.ecosystem, f.component, f.component.ecosystem
            )));
        }
    }
    let (findings, duplicates) = dedup_findings(findings);
    let ranges = findings
        .iter()
        .map(finding_range)
        .collect::<Result<Vec<_>>>()?;

    let mut by_component: BTreeMap<(EcosystemId, String), Vec<usize>> = BTreeMap::new();
    for (i, f) in findings.iter().enumerate() {
        by_component
            .entry((f.ecosystem, f.component.key()))
            .or_default()
            .push(i);
    }

    let mut used: BTreeSet<usize> = BTreeSet::new();
    let mut tp = Vec::new();
    let mut fn_ = Vec::new();
    for g in &gt.entries {
        let mut matched_by = Vec::new();
        if let Some(candidates) = by_component.get(&(g.ecosystem, g.component.key())) {
            for &i in candidates {
                if let Some(basis) = match_basis(g, &findings[i], ranges[i].as_ref()) {
                    used.insert(i);
                    matched_by.push(MatchedBy {
                        version: findings[i].version.clone(),
                        vuln: findings[i].vuln.clone(),
                        basis,
                    });
                }
            }
        }
        if matched_by.is_empty() {
            fn_.push(g.clone());
        } else {
            matched_by.sort();
            tp.push(TpEntry {
                entry: g.clone(),
                matched_by,
            });
        }
    }

    let mut fp_gt = Vec::new();
    let mut matched_findings = Vec::new();
    for (i, f) in findings.into_iter().enumerate() {
        if used.contains(&i) {
            matched_findings.push(f);
        } else {
            fp_gt.push(f);
        }
    }
    Ok(MatchOutcome {
        tool,
        tp,
        fp_gt,
        fn_,
        matched_findings,
        duplicates,
    })
}

/// One JSON object per line: every tp, fn and fp_gt record.
pub fn outcome_jsonl(outcome: &MatchOutcome) -> Result<String> {
    #[derive(Serialize)]
    #[serde(tag = "class", rename_all = "snake_case")]
    enum Line<'a> {
        Tp {
            entry: &'a GroundTruthEntry,
            matched_by: &'a [MatchedBy],
        },
        Fn {
            entry: &'a GroundTruthEntry,
        },
        FpGt {
            finding: &'a NormalizedFinding,
        },
    }
    let mut out = String::new();
    let lines = outcome
        .tp
        .iter()
        .map(|t| Line::Tp {
            entry: &t.entry,
            matched_by: &t.matched_by,
        })
        .chain(outcome.fn_.iter().map(|entry| Line::Fn { entry }))
        .chain(outcome.fp_gt.iter().map(|finding| Line::FpGt { finding }));
    for line in lines {
        out.push_str(&to_canonical_json(&line)?);
        out.push('\n');
    }
    Ok(out)
}
