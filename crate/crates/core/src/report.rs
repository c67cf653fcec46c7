//! Markdown and CSV renderings of the result tables, plus plot data.
//!
//! Ratios print with two decimals, deltas of ratios with three. Plot data
//! keeps full precision.

use serde::Serialize;

use crate::diff::{EvaluationDiff, SnapshotDiff};
use crate::error::{Error, Result};
use crate::eval::{EvaluationReport, MetricRow, Scope};
use crate::groundtruth::{EcosystemStats, SnapshotStats};
use crate::stats::{OmnibusResult, PairwiseComparison};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub legend: Option<String>,
}

impl Table {
    fn new(title: &str, header: &[&str]) -> Self {
        Table {
            title: title.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            legend: None,
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_markdown(&self) -> String {
        let esc = |s: &str| s.replace('|', "\\|");
        let line = |cells: &[String]| {
            format!(
                "| {} |\n",
                cells.iter().map(|c| esc(c)).collect::<Vec<_>>().join(" | ")
            )
        };
        let mut out = format!("### {}\n\n", self.title);
        out.push_str(&line(&self.header));
        let align: Vec<String> = (0..self.header.len())
            .map(|i| {
                if i == 0 {
                    ":--".to_string()
                } else {
                    "--:".to_string()
                }
            })
            .collect();
        out.push_str(&format!("|{}|\n", align.join("|")));
        for r in &self.rows {
            out.push_str(&line(r));
        }
        if let Some(l) = &self.legend {
            out.push_str(&format!("\n{l}\n"));
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        csv_of(&self.header, &self.rows)
    }
}

fn csv_of(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Data(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Data(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(format!("csv: {e}")))
}

fn r2(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.2}"))
}

fn pct(x: f64) -> String {
    format!("{x:.1}%")
}

fn signed(x: i64) -> String {
    if x > 0 {
        format!("+{x}")
    } else {
        x.to_string()
    }
}

fn signed3(x: Option<f64>) -> String {
    match x {
        None => "n/a".into(),
        Some(v) if v > 0.0 => format!("+{v:.3}"),
        // Avoid "-0.000".
        Some(0.0) => "0.000".into(),
        Some(v) => format!("{v:.3}"),
    }
}

fn p_value(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{p:.3}")
    }
}

/// Dataset statistics per ecosystem.
pub fn table_iii(stats: &SnapshotStats) -> Table {
    let mut t = Table::new(
        "Per-ecosystem ground-truth statistics",
        &[
            "Eco",
            "Comp.",
            "OSV",
            "CVE-F.",
            "CVEs",
            "Comp./OSV",
            "CVE-F./OSV",
            "V-Share",
            "C-Share",
        ],
    );
    let row = |name: String, s: &EcosystemStats| {
        vec![
            name,
            s.unique_components.to_string(),
            s.osv_entries.to_string(),
            s.cve_backed_findings.to_string(),
            s.distinct_cves.to_string(),
            r2(Some(s.comp_per_osv)),
            r2(Some(s.cvef_per_osv)),
            pct(s.v_share),
            pct(s.c_share),
        ]
    };
    for (e, s) in &stats.ecosystems {
        t.push(row(e.to_string(), s));
    }
    if !stats.ecosystems.is_empty() {
        t.push(row("TOTAL".into(), &stats.total));
    }
    t.legend = Some(
        "Comp. = unique components; OSV = OSV vulnerability entries; CVE-F. = CVE-backed findings; \
         CVEs = distinct CVE identifiers; V-Share and C-Share = share of entries and of components. \
         The TOTAL CVE count is the sum of the per-ecosystem counts."
            .into(),
    );
    t
}

/// Component and component-version frequencies.
pub fn table_iv(stats: &SnapshotStats) -> Table {
    let mut t = Table::new(
        "Component and component-version frequency",
        &[
            "Eco", "Max-C", "Avg-C", "Min-C", "Med-C", "Max-CV", "Avg-CV", "Min-CV", "Med-CV",
        ],
    );
    let row = |name: String, s: &EcosystemStats| {
        let (c, cv) = (&s.component_frequency, &s.component_version_frequency);
        vec![
            name,
            c.max.to_string(),
            format!("{:.2}", c.avg),
            c.min.to_string(),
            format!("{:.2}", c.median),
            cv.max.to_string(),
            format!("{:.2}", cv.avg),
            cv.min.to_string(),
            format!("{:.2}", cv.median),
        ]
    };
    for (e, s) in &stats.ecosystems {
        t.push(row(e.to_string(), s));
    }
    if !stats.ecosystems.is_empty() {
        t.push(row("TOTAL".into(), &stats.total));
    }
    t
}

fn metric_cells(r: &MetricRow) -> Vec<String> {
    vec![
        r.components.to_string(),
        r.vulnerabilities.to_string(),
        r.cves.to_string(),
        r.tp.to_string(),
        r.fp_gt.to_string(),
        r.fn_.to_string(),
        r2(r.recall),
        r2(r.overlap),
    ]
}

/// Per-tool, per-ecosystem evaluation results.
pub fn table_vii(report: &EvaluationReport) -> Table {
    let mut t = Table::new(
        "Per-ecosystem evaluation results",
        &[
            "Tool",
            "Ecosystem",
            "Components",
            "Vulnerabilities",
            "CVEs",
            "TP",
            "FP_GT",
            "FN",
            "Recall",
            "Overlap",
        ],
    );
    for te in &report.tools {
        for r in &te.rows {
            let mut cells = vec![te.tool.to_string(), r.scope.to_string()];
            cells.extend(metric_cells(r));
            t.push(cells);
        }
    }
    t.legend =
        Some("TOTAL recall and overlap are unweighted means of the ecosystem values.".into());
    t
}

/// Pairwise exact McNemar tests with Holm-adjusted p values.
pub fn table_viii(pairs: &[PairwiseComparison]) -> Table {
    let mut t = Table::new(
        "Pairwise significance tests for recall",
        &["Tool A", "Tool B", "n10", "n01", "p", "p_adj"],
    );
    for p in pairs {
        t.push(vec![
            p.tool_a.to_string(),
            p.tool_b.to_string(),
            p.n10.to_string(),
            p.n01.to_string(),
            p_value(p.p_raw),
            p_value(p.p_adj),
        ]);
    }
    t.legend =
        Some("n10 = instances detected by Tool A but missed by Tool B; n01 = the converse.".into());
    t
}

pub fn omnibus_line(o: &OmnibusResult) -> String {
    let p = if o.p_value < 0.001 {
        format!("p < 0.001 (ln p = {:.2})", o.ln_p_value)
    } else {
        format!("p = {:.3}", o.p_value)
    };
    format!(
        "Cochran's Q = {:.2}, df = {}, {p}, over {} instances.",
        o.q_statistic, o.degrees_freedom, o.instances
    )
}

/// Ground-truth changes between two snapshots.
pub fn table_ix(d: &SnapshotDiff) -> Table {
    let mut t = Table::new(
        "Ground-truth changes between snapshots",
        &["Eco", "Removed", "Added", "Delta CVE-F.", "Delta CVEs"],
    );
    for r in &d.rows {
        t.push(vec![
            r.scope.to_string(),
            r.removed.to_string(),
            r.added.to_string(),
            signed(r.delta_cve_findings),
            signed(r.delta_distinct_cves),
        ]);
    }
    t.legend = Some(
        "Removed = records contained in the earlier ground-truth snapshot but no longer contained in the later \
         snapshot; Added = records newly contained in the later snapshot. Delta CVE-F. is the change in \
         CVE-backed findings, Delta CVEs the change in distinct CVE identifiers (TOTAL: globally distinct)."
            .into(),
    );
    t
}

/// Overall comparison of two evaluations, one row per tool.
pub fn table_x(d: &EvaluationDiff) -> Table {
    let mut t = Table::new(
        "Overall comparison of two evaluations",
        &[
            "Tool",
            "TP_0",
            "TP_1",
            "Delta TP",
            "FP_0",
            "FP_1",
            "Delta FP",
            "FN_0",
            "FN_1",
            "Delta FN",
            "Delta Recall",
            "Delta Overlap",
        ],
    );
    for r in d.rows.iter().filter(|r| r.scope == Scope::Total) {
        t.push(vec![
            r.tool.to_string(),
            r.before.tp.to_string(),
            r.after.tp.to_string(),
            signed(r.delta_tp),
            r.before.fp.to_string(),
            r.after.fp.to_string(),
            signed(r.delta_fp),
            r.before.fn_.to_string(),
            r.after.fn_.to_string(),
            signed(r.delta_fn_),
            signed3(r.delta_recall_3dp()),
            signed3(r.delta_overlap_3dp()),
        ]);
    }
    t.legend = Some("Recall and overlap are pooled over the TOTAL counts, rounded to three decimals before differencing.".into());
    t
}

/// Per-ecosystem comparison of two evaluations.
pub fn table_xiii(d: &EvaluationDiff) -> Table {
    let mut t = Table::new(
        "Per-ecosystem comparison of two evaluations",
        &[
            "Tool", "Eco", "TP_0", "TP_1", "Delta TP", "FP_0", "FP_1", "Delta FP", "FN_0", "FN_1",
            "Delta FN",
        ],
    );
    let mut last = None;
    for r in &d.rows {
        // Tool name only on its first row, as in the printed layout.
        let name = if last == Some(r.tool) {
            String::new()
        } else {
            r.tool.to_string()
        };
        last = Some(r.tool);
        t.push(vec![
            name,
            r.scope.to_string(),
            r.before.tp.to_string(),
            r.after.tp.to_string(),
            signed(r.delta_tp),
            r.before.fp.to_string(),
            r.after.fp.to_string(),
            signed(r.delta_fp),
            r.before.fn_.to_string(),
            r.after.fn_.to_string(),
            signed(r.delta_fn_),
        ]);
    }
    t
}

/// Mean recall against mean overlap per tool (TOTAL row), full precision.
pub fn fig4_csv(report: &EvaluationReport) -> Result<String> {
    let header = ["tool", "mean_recall", "mean_overlap"].map(String::from);
    let rows: Vec<Vec<String>> = report
        .tools
        .iter()
        .map(|te| {
            let t = te.total();
            let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            vec![te.tool.to_string(), f(t.recall), f(t.overlap)]
        })
        .collect();
    csv_of(&header, &rows)
}

/// Significance matrix data: every pair with adjusted p and a flag at 0.05.
pub fn fig6_csv(pairs: &[PairwiseComparison]) -> Result<String> {
    let header = [
        "tool_a",
        "tool_b",
        "n10",
        "n01",
        "p_raw",
        "p_adj",
        "significant",
    ]
    .map(String::from);
    let rows: Vec<Vec<String>> = pairs
        .iter()
        .map(|p| {
            vec![
                p.tool_a.to_string(),
                p.tool_b.to_string(),
                p.n10.to_string(),
                p.n01.to_string(),
                p.p_raw.to_string(),
                p.p_adj.to_string(),
                p.significant(0.05).to_string(),
            ]
        })
        .collect();
    csv_of(&header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::ToolEvaluation;
    use crate::model::{EcosystemId, ToolId};

    #[test]
    fn table_vii_row_format() {
        let row = MetricRow::from_counts(
            ToolId::Snyk,
            Scope::Ecosystem(EcosystemId::Maven),
            99,
            250,
            42,
            204,
            314,
            46,
        );
        let te = ToolEvaluation::from_rows(ToolId::Snyk, vec![row]).unwrap();
        let t = table_vii(&EvaluationReport::new("d", vec![te]));
        assert_eq!(
            t.rows[0][2..].join(" & "),
            "99 & 250 & 42 & 204 & 314 & 46 & 0.82 & 0.39"
        );
        assert_eq!(t.rows[1][1], "TOTAL");
    }

    #[test]
    fn empty_inputs_give_header_only_tables() {
        let t = table_vii(&EvaluationReport::new("d", vec![]));
        assert!(t.rows.is_empty());
        assert!(t.to_markdown().contains("| Tool | Ecosystem |"));
        assert_eq!(t.to_csv().unwrap().lines().count(), 1);
        assert!(table_iii(&SnapshotStats::default()).rows.is_empty());
        assert_eq!(fig6_csv(&[]).unwrap().lines().count(), 1);
    }

    #[test]
    fn number_formats() {
        assert_eq!(signed(2), "+2");
        assert_eq!(signed(0), "0");
        assert_eq!(signed(-22), "-22");
        assert_eq!(signed3(Some(-0.012)), "-0.012");
        assert_eq!(signed3(Some(0.0)), "0.000");
        assert_eq!(p_value(0.0004), "<0.001");
        assert_eq!(p_value(0.104012), "0.104");
        assert_eq!(pct(25.0), "25.0%");
    }

    #[test]
    fn markdown_escapes_pipes_and_csv_quotes() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec!["p|q".into(), "1,2".into()]);
        assert!(t.to_markdown().contains("p\\|q"));
        assert!(t.to_csv().unwrap().contains("\"1,2\""));
    }
}
