//! On-disk snapshot layout: `entries.jsonl`, `stats.json`, `manifest.json`.

use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{BuildConfig, Snapshot};
use crate::canonical::to_canonical_json;
use crate::error::{Error, Result};
use crate::model::GroundTruthEntry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub digest: String,
    pub created_at: DateTime<Utc>,
    pub entry_count: usize,
    pub config: BuildConfig,
}

pub fn write_snapshot(dir: &Path, s: &Snapshot) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut lines = String::new();
    for e in &s.entries {
        lines.push_str(&to_canonical_json(e)?);
        lines.push('\n');
    }
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("entries.jsonl", lines)?;
    write("stats.json", serde_json::to_string_pretty(&s.stats)? + "\n")?;
    let manifest = SnapshotManifest {
        digest: s.digest.clone(),
        created_at: s.created_at,
        entry_count: s.entries.len(),
        config: s.config.clone(),
    };
    write(
        "manifest.json",
        serde_json::to_string_pretty(&manifest)? + "\n",
    )
}

/// Loads a snapshot directory and checks the recorded digest.
pub fn read_snapshot(dir: &Path) -> Result<Snapshot> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
    };
    let manifest: SnapshotManifest = serde_json::from_str(&read("manifest.json")?)
        .map_err(|e| Error::Decode(format!("manifest.json: {e}")))?;
    let mut entries = Vec::new();
    for (i, line) in read("entries.jsonl")?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: GroundTruthEntry = serde_json::from_str(line)
            .map_err(|e| Error::Decode(format!("entries.jsonl line {}: {e}", i + 1)))?;
        entries.push(e);
    }
    let s = Snapshot::from_entries(entries, manifest.config, manifest.created_at);
    if s.digest != manifest.digest {
        return Err(Error::Data(format!(
            "snapshot digest mismatch: manifest {} but entries hash to {}",
            manifest.digest, s.digest
        )));
    }
    Ok(s)
}
