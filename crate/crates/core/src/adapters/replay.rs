//! Findings read from a JSONL file instead of a live tool.

use super::{Adapter, Collected, Ctx, RawArtifact, Skip, SkipReason};
use crate::error::{Error, Result};
use crate::model::{NormalizedFinding, ToolId};

/// Answers for the wrapped tool id from `replay_findings` (or `endpoint`).
pub struct Replay(pub ToolId);

impl Adapter for Replay {
    fn tool(&self) -> ToolId {
        self.0
    }

    fn consumes_sbom(&self) -> bool {
        false
    }

    fn invoke(&self, cx: &Ctx<'_>) -> Result<Collected> {
        let path = cx
            .cfg
            .replay_findings
            .clone()
            .or_else(|| cx.cfg.endpoint.as_ref().map(Into::into))
            .ok_or_else(|| Error::Config(format!("{}: replay needs a findings file", cx.tool)))?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = Collected::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            out.records.push(
                serde_json::from_str::<NormalizedFinding>(line)
                    .map_err(|e| Skip::new(SkipReason::Malformed, format!("line {}: {e}", i + 1))),
            );
        }
        out.artifacts.push(RawArtifact {
            name: "findings.jsonl".into(),
            body: text,
        });
        Ok(out)
    }
}
