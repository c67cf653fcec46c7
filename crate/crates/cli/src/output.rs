//! Run directory layout and artifact writing.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use scabench_core::report::Table;
use scabench_core::{Error, Result};
use serde::Serialize;

pub struct RunDir {
    pub path: PathBuf,
    written: Vec<String>,
}

impl RunDir {
    /// `out` when given, else `<root>/<timestamp>-<digest prefix>/`.
    pub fn create(
        out: Option<&Path>,
        root: &Path,
        digest: &str,
        now: DateTime<Utc>,
    ) -> Result<Self> {
        let path = match out {
            Some(p) => p.to_path_buf(),
            None => {
                let prefix = &digest[..12.min(digest.len())];
                root.join(format!("{}-{prefix}", now.format("%Y%m%dT%H%M%SZ")))
            }
        };
        fs::create_dir_all(&path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Ok(RunDir {
            path,
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.path.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
        }
        fs::write(&p, bytes).map_err(|e| io(&p, e))?;
        self.written.push(rel.to_string());
        Ok(p)
    }

    pub fn json<T: Serialize>(&mut self, rel: &str, v: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(v)? + "\n";
        self.write(rel, text)
    }

    /// `reports/<name>.md` and `reports/<name>.csv`.
    pub fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        self.write(&format!("reports/{name}.md"), t.to_markdown())?;
        self.write(&format!("reports/{name}.csv"), t.to_csv()?)?;
        Ok(())
    }

    pub fn artifacts(&self) -> Vec<String> {
        let mut v = self.written.clone();
        v.sort();
        v.dedup();
        v
    }
}

fn io(p: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: p.display().to_string(),
        source: e,
    }
}

pub fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).map_err(|e| io(p, e))
}
