//! Recall, overlap and their TOTAL aggregation.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::MatchOutcome;
use crate::error::{Error, Result};
use crate::groundtruth::Snapshot;
use crate::model::{EcosystemId, ToolId};

/// One ecosystem, or the TOTAL row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    Ecosystem(EcosystemId),
    Total,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Ecosystem(e) => f.write_str(e.as_str()),
            Scope::Total => f.write_str("TOTAL"),
        }
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("total") {
            Ok(Scope::Total)
        } else {
            s.parse().map(Scope::Ecosystem)
        }
    }
}

impl Serialize for Scope {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub tool: ToolId,
    pub scope: Scope,
    pub components: usize,
    pub vulnerabilities: usize,
    pub cves: usize,
    pub tp: usize,
    pub fp_gt: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Absent when `tp + fn = 0`.
    pub recall: Option<f64>,
    /// Absent when `tp + fp_gt = 0`.
    pub overlap: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl MetricRow {
    #[allow(clippy::too_many_arguments)]
    pub fn from_counts(
        tool: ToolId,
        scope: Scope,
        components: usize,
        vulnerabilities: usize,
        cves: usize,
        tp: usize,
        fp_gt: usize,
        fn_: usize,
    ) -> Self {
        MetricRow {
            tool,
            scope,
            components,
            vulnerabilities,
            cves,
            tp,
            fp_gt,
            fn_,
            recall: ratio(tp, tp + fn_),
            overlap: ratio(tp, tp + fp_gt),
        }
    }

    /// `tp / (tp + fn)` over the row's summed counts.
    pub fn pooled_recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn pooled_overlap(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp_gt)
    }
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// TOTAL row: counts are sums, recall and overlap are unweighted means of the
/// per-ecosystem values. Rows whose ratio is undefined are left out of the mean.
pub fn aggregate_total(rows: &[MetricRow]) -> Result<MetricRow> {
    let first = rows
        .first()
        .ok_or_else(|| Error::Usage("TOTAL needs at least one ecosystem row".into()))?;
    if let Some(r) = rows
        .iter()
        .find(|r| r.tool != first.tool || r.scope == Scope::Total)
    {
        return Err(Error::Usage(format!(
            "cannot aggregate {} {} with {} rows",
            r.tool, r.scope, first.tool
        )));
    }
    let sum = |f: fn(&MetricRow) -> usize| rows.iter().map(f).sum::<usize>();
    Ok(MetricRow {
        tool: first.tool,
        scope: Scope::Total,
        components: sum(|r| r.components),
        vulnerabilities: sum(|r| r.vulnerabilities),
        cves: sum(|r| r.cves),
        tp: sum(|r| r.tp),
        fp_gt: sum(|r| r.fp_gt),
        fn_: sum(|r| r.fn_),
        recall: mean(rows.iter().map(|r| r.recall)),
        overlap: mean(rows.iter().map(|r| r.overlap)),
    })
}

fn ecosystem_row(gt: &Snapshot, outcome: &MatchOutcome, e: EcosystemId) -> MetricRow {
    let in_gt: Vec<_> = gt.entries.iter().filter(|g| g.ecosystem == e).collect();
    let components: BTreeSet<String> = in_gt.iter().map(|g| g.component.key()).collect();
    let cves: BTreeSet<_> = in_gt.iter().flat_map(|g| g.cves.iter()).collect();
    MetricRow::from_counts(
        outcome.tool,
        Scope::Ecosystem(e),
        components.len(),
        in_gt.len(),
        cves.len(),
        outcome.tp.iter().filter(|t| t.entry.ecosystem == e).count(),
        outcome.fp_gt.iter().filter(|f| f.ecosystem == e).count(),
        outcome.fn_.iter().filter(|g| g.ecosystem == e).count(),
    )
}

fn ecosystems_in(gt: &Snapshot, outcome: &MatchOutcome) -> Vec<EcosystemId> {
    EcosystemId::ALL
        .into_iter()
        .filter(|e| {
            gt.entries.iter().any(|g| g.ecosystem == *e)
                || outcome.fp_gt.iter().any(|f| f.ecosystem == *e)
        })
        .collect()
}

/// Metric row for one scope. TOTAL is the macro aggregate of the ecosystem
/// rows present in the snapshot or the findings.
pub fn metrics(gt: &Snapshot, outcome: &MatchOutcome, scope: Scope) -> Result<MetricRow> {
    match scope {
        Scope::Ecosystem(e) => Ok(ecosystem_row(gt, outcome, e)),
        Scope::Total => {
            let rows: Vec<MetricRow> = ecosystems_in(gt, outcome)
                .into_iter()
                .map(|e| ecosystem_row(gt, outcome, e))
                .collect();
            if rows.is_empty() {
                return Ok(MetricRow::from_counts(
                    outcome.tool,
                    Scope::Total,
                    0,
                    0,
                    0,
                    0,
                    0,
                    0,
                ));
            }
            aggregate_total(&rows)
        }
    }
}

/// Per-ecosystem rows followed by TOTAL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolEvaluation {
    pub tool: ToolId,
    pub rows: Vec<MetricRow>,
}

impl ToolEvaluation {
    pub fn from_rows(tool: ToolId, mut rows: Vec<MetricRow>) -> Result<Self> {
        rows.retain(|r| r.scope != Scope::Total);
        rows.sort_by_key(|r| r.scope);
        let total = if rows.is_empty() {
            MetricRow::from_counts(tool, Scope::Total, 0, 0, 0, 0, 0, 0)
        } else {
            aggregate_total(&rows)?
        };
        rows.push(total);
        Ok(ToolEvaluation { tool, rows })
    }

    pub fn row(&self, scope: Scope) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.scope == scope)
    }

    pub fn total(&self) -> &MetricRow {
        self.rows.last().expect("TOTAL row is always present")
    }
}

pub fn evaluate(gt: &Snapshot, outcome: &MatchOutcome) -> Result<ToolEvaluation> {
    let rows = ecosystems_in(gt, outcome)
        .into_iter()
        .map(|e| ecosystem_row(gt, outcome, e))
        .collect();
    ToolEvaluation::from_rows(outcome.tool, rows)
}

/// Evaluations of several tools over one snapshot, ordered by tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub snapshot_digest: String,
    pub tools: Vec<ToolEvaluation>,
}

impl EvaluationReport {
    pub fn new(snapshot_digest: impl Into<String>, mut tools: Vec<ToolEvaluation>) -> Self {
        tools.sort_by_key(|t| t.tool);
        EvaluationReport {
            snapshot_digest: snapshot_digest.into(),
            tools,
        }
    }

    pub fn tool(&self, t: ToolId) -> Option<&ToolEvaluation> {
        self.tools.iter().find(|e| e.tool == t)
    }

    pub fn tool_ids(&self) -> Vec<ToolId> {
        self.tools.iter().map(|t| t.tool).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(scope: EcosystemId, tp: usize, fp: usize, fn_: usize) -> MetricRow {
        MetricRow::from_counts(
            ToolId::Github,
            Scope::Ecosystem(scope),
            0,
            tp + fn_,
            0,
            tp,
            fp,
            fn_,
        )
    }

    #[test]
    fn recall_example_and_absent_ratios() {
        let r = row(EcosystemId::Maven, 204, 314, 46);
        assert!((r.recall.unwrap() - 0.816).abs() < 1e-12);
        let empty = row(EcosystemId::Maven, 0, 0, 0);
        assert_eq!(empty.recall, None);
        assert_eq!(empty.overlap, None);
    }

    #[test]
    fn single_row_total_equals_row() {
        let r = row(EcosystemId::Npm, 10, 5, 3);
        let t = aggregate_total(std::slice::from_ref(&r)).unwrap();
        assert_eq!((t.tp, t.fp_gt, t.fn_), (10, 5, 3));
        assert_eq!((t.recall, t.overlap), (r.recall, r.overlap));
    }

    #[test]
    fn total_needs_rows() {
        assert_eq!(aggregate_total(&[]).unwrap_err().kind(), "usage");
    }

    #[test]
    fn scope_serializes_as_label() {
        assert_eq!(serde_json::to_string(&Scope::Total).unwrap(), "\"TOTAL\"");
        assert_eq!(
            serde_json::to_string(&Scope::Ecosystem(EcosystemId::PyPI)).unwrap(),
            "\"PyPI\""
        );
        let back: Scope = serde_json::from_str("\"npm\"").unwrap();
        assert_eq!(back, Scope::Ecosystem(EcosystemId::Npm));
    }

    proptest! {
        #[test]
        fn macro_recall_equals_pooled_under_balance(
            size in 1usize..300,
            tps in prop::collection::vec(0.0f64..=1.0, 1..=4),
            fps in prop::collection::vec(0usize..400, 4),
        ) {
            let rows: Vec<MetricRow> = tps
                .iter()
                .zip(EcosystemId::ALL)
                .zip(&fps)
                .map(|((f, e), fp)| {
                    let tp = (f * size as f64).round() as usize;
                    row(e, tp, *fp, size - tp)
                })
                .collect();
            let t = aggregate_total(&rows).unwrap();
            let pooled = t.pooled_recall().unwrap();
            prop_assert!((t.recall.unwrap() - pooled).abs() < 1e-12);
        }
    }
}
