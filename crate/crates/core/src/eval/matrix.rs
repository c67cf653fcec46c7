//! Binary detection vectors and the tool × instance matrix built from them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::MatchOutcome;
use crate::error::{Error, Result};
use crate::groundtruth::Snapshot;
use crate::model::{EntryKey, ToolId};

/// `x[g] = 1` iff entry `g` of the snapshot is a true positive of the outcome.
pub fn detection_vector(gt: &Snapshot, outcome: &MatchOutcome) -> Result<Vec<bool>> {
    if outcome.tp.len() + outcome.fn_.len() != gt.entries.len() {
        return Err(Error::Data(format!(
            "{} outcome covers {} entries, snapshot has {}",
            outcome.tool,
            outcome.tp.len() + outcome.fn_.len(),
            gt.entries.len()
        )));
    }
    let hits: BTreeSet<EntryKey> = outcome.tp.iter().map(|t| t.entry.key()).collect();
    Ok(gt.entries.iter().map(|g| hits.contains(&g.key())).collect())
}

/// Paired binary observations: one column per tool, one row per instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionMatrix {
    pub tools: Vec<ToolId>,
    pub instances: Vec<EntryKey>,
    /// `columns[t][g]`.
    pub columns: Vec<Vec<bool>>,
}

impl DetectionMatrix {
    pub fn new(
        tools: Vec<ToolId>,
        instances: Vec<EntryKey>,
        columns: Vec<Vec<bool>>,
    ) -> Result<Self> {
        if tools.len() != columns.len() {
            return Err(Error::Usage(format!(
                "{} tools but {} columns",
                tools.len(),
                columns.len()
            )));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != instances.len()) {
            return Err(Error::Usage(format!(
                "column of length {} for {} instances",
                c.len(),
                instances.len()
            )));
        }
        if tools.iter().collect::<BTreeSet<_>>().len() != tools.len() {
            return Err(Error::Usage("duplicate tool in detection matrix".into()));
        }
        Ok(DetectionMatrix {
            tools,
            instances,
            columns,
        })
    }

    /// Columns from per-tool outcomes over the same snapshot, in the given order.
    pub fn from_outcomes(gt: &Snapshot, outcomes: &[&MatchOutcome]) -> Result<Self> {
        let tools = outcomes.iter().map(|o| o.tool).collect();
        let columns = outcomes
            .iter()
            .map(|o| detection_vector(gt, o))
            .collect::<Result<Vec<_>>>()?;
        Self::new(tools, gt.entries.iter().map(|g| g.key()).collect(), columns)
    }

    /// Stacks matrices over the same tools, e.g. the repeats of a run.
    pub fn concat(parts: &[DetectionMatrix]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Usage("nothing to concatenate".into()))?;
        let mut out = DetectionMatrix {
            tools: first.tools.clone(),
            instances: Vec::new(),
            columns: vec![Vec::new(); first.tools.len()],
        };
        for p in parts {
            if p.tools != first.tools {
                return Err(Error::Usage(
                    "detection matrices have different tools".into(),
                ));
            }
            out.instances.extend(p.instances.iter().cloned());
            for (dst, src) in out.columns.iter_mut().zip(&p.columns) {
                dst.extend_from_slice(src);
            }
        }
        Ok(out)
    }

    pub fn rows(&self) -> usize {
        self.instances.len()
    }

    pub fn column(&self, t: ToolId) -> Option<&[bool]> {
        self.tools
            .iter()
            .position(|x| *x == t)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn column_total(&self, i: usize) -> usize {
        self.columns[i].iter().filter(|x| **x).count()
    }

    /// Number of detecting tools on row `g`.
    pub fn row_total(&self, g: usize) -> usize {
        self.columns.iter().filter(|c| c[g]).count()
    }
}
