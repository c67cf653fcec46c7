//! Run configuration file, TOML or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapters::AdapterConfig;
use crate::error::{Error, Result};
use crate::groundtruth::BuildConfig;
use crate::model::ToolId;
use crate::temporal::ControlConfig;
use crate::transport::Mode;

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

fn default_attempts() -> usize {
    3
}

fn default_repeats() -> usize {
    2
}

fn default_http_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(default)]
    pub build: BuildConfig,
    #[serde(default)]
    pub tools: Vec<AdapterConfig>,
    #[serde(default)]
    pub mode: Mode,
    /// Fixture directory for record and replay.
    #[serde(default)]
    pub fixtures: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_http_timeout")]
    pub http_timeout_secs: u64,
}

impl Default for RunConfigFile {
    fn default() -> Self {
        RunConfigFile {
            build: BuildConfig::default(),
            tools: ToolId::EVALUATED
                .iter()
                .map(|t| AdapterConfig::new(*t))
                .collect(),
            mode: Mode::Live,
            fixtures: None,
            output_dir: default_output(),
            max_attempts: default_attempts(),
            repeats: default_repeats(),
            http_timeout_secs: default_http_timeout(),
        }
    }
}

impl RunConfigFile {
    /// Parses `text`; JSON when it starts with `{`, TOML otherwise.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfigFile = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("JSON config: {e}")))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(format!("TOML config: {e}")))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &Path| {
            if p.is_relative() {
                base.join(p)
            } else {
                p.to_path_buf()
            }
        };
        cfg.fixtures = cfg.fixtures.as_deref().map(resolve);
        cfg.output_dir = resolve(&cfg.output_dir);
        for t in &mut cfg.tools {
            t.replay_findings = t.replay_findings.as_deref().map(resolve);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.build.validate()?;
        if self.max_attempts < 1 || self.repeats < 1 {
            return Err(Error::Config(
                "max_attempts and repeats must be at least 1".into(),
            ));
        }
        if self.http_timeout_secs == 0 {
            return Err(Error::Config("http_timeout_secs must be positive".into()));
        }
        if self.mode != Mode::Live && self.fixtures.is_none() {
            return Err(Error::Config(format!(
                "{:?} mode needs a fixtures directory",
                self.mode
            )));
        }
        for t in &self.tools {
            t.validate()?;
        }
        Ok(())
    }

    pub fn tool(&self, tool: ToolId) -> Option<&AdapterConfig> {
        self.tools.iter().find(|t| t.tool == tool)
    }

    pub fn control(&self) -> ControlConfig {
        ControlConfig {
            build: self.build.clone(),
            adapters: self.tools.clone(),
            max_attempts: self.max_attempts,
            repeats: self.repeats,
        }
    }
}
