//! The bundled reference fixtures and the published Table VII counts.

use std::path::PathBuf;

use scabench_core::eval::{evaluate, match_findings, EvaluationReport, MetricRow};
use scabench_core::groundtruth::{read_snapshot, Snapshot};
use scabench_core::model::{NormalizedFinding, ToolId};

pub fn fixtures() -> PathBuf {
    [
        env!("CARGO_MANIFEST_DIR"),
        "..",
        "..",
        "fixtures",
        "reference",
    ]
    .iter()
    .collect()
}

pub fn snapshot(date: &str) -> Snapshot {
    read_snapshot(&fixtures().join(format!("gt-{date}"))).unwrap()
}

pub fn report(date: &str, gt: &Snapshot) -> EvaluationReport {
    let tools = ToolId::EVALUATED
        .iter()
        .map(|t| {
            let text =
                std::fs::read_to_string(fixtures().join(format!("findings-{date}/{t}.jsonl")))
                    .unwrap();
            let findings: Vec<NormalizedFinding> = text
                .lines()
                .map(|l| serde_json::from_str(l).unwrap())
                .collect();
            evaluate(gt, &match_findings(*t, gt, findings).unwrap()).unwrap()
        })
        .collect();
    EvaluationReport::new(gt.digest.clone(), tools)
}

pub fn table_vii() -> Vec<(MetricRow, f64, f64)> {
    let mut reader = csv_rows(include_str!("../data/table_vii.csv"));
    reader.remove(0);
    reader
        .into_iter()
        .map(|r| {
            let n = |i: usize| r[i].parse::<usize>().unwrap();
            let row = MetricRow::from_counts(
                r[0].parse().unwrap(),
                r[1].parse().unwrap(),
                n(2),
                n(3),
                n(4),
                n(5),
                n(6),
                n(7),
            );
            (row, r[8].parse().unwrap(), r[9].parse().unwrap())
        })
        .collect()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}
