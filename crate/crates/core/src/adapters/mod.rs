//! One adapter per evaluated tool. Each runs the tool against a snapshot
//! (or its SBOM) and maps whatever it reports onto [`NormalizedFinding`]s.

mod dtrack;
mod github;
mod ossindex;
mod replay;
mod snyk;
mod trivy;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::canonical::{sha256_hex, to_canonical_json};
use crate::error::{Error, Result};
use crate::groundtruth::Snapshot;
use crate::model::{dedup_findings, EcosystemId, NormalizedFinding, ToolId};
use crate::sbom::cyclonedx::serial_number;
use crate::transport::{Mode, Transport};
use crate::version::compare_raw;

pub use github::GITHUB_GRAPHQL;
pub use ossindex::OSSINDEX_API;

fn default_retry() -> u32 {
    3
}

fn default_timeout() -> u64 {
    180
}

fn default_poll_interval() -> u64 {
    2000
}

fn default_max_polls() -> u32 {
    300
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterConfig {
    pub tool: ToolId,
    /// Base URL for REST/GraphQL tools, executable for CLI tools.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Role (`api_key`, `user`, `token`, `url`) to environment variable name.
    #[serde(default)]
    pub credentials: BTreeMap<String, String>,
    /// Maximum attempts, including the first.
    #[serde(default = "default_retry")]
    pub retry: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    /// Findings JSONL answered instead of running the tool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_findings: Option<PathBuf>,
    #[serde(default = "default_poll_interval")]
    pub poll_interval_ms: u64,
    #[serde(default = "default_max_polls")]
    pub max_polls: u32,
}

impl AdapterConfig {
    /// Defaults for `tool`, with the conventional credential variables.
    pub fn new(tool: ToolId) -> Self {
        let creds: &[(&str, &str)] = match tool {
            ToolId::Dtrack => &[("url", "DTRACK_URL"), ("api_key", "DTRACK_API_KEY")],
            ToolId::Snyk => &[("token", "SNYK_TOKEN")],
            ToolId::OssIndex => &[("user", "OSSINDEX_USER"), ("token", "OSSINDEX_TOKEN")],
            ToolId::Github => &[("token", "GITHUB_TOKEN")],
            _ => &[],
        };
        AdapterConfig {
            tool,
            endpoint: None,
            credentials: creds
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            retry: default_retry(),
            timeout_secs: default_timeout(),
            batch_size: (tool == ToolId::OssIndex).then_some(ossindex::DEFAULT_BATCH),
            replay_findings: None,
            poll_interval_ms: default_poll_interval(),
            max_polls: default_max_polls(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout_secs == 0 {
            return Err(Error::Config(format!(
                "{}: timeout must be positive",
                self.tool
            )));
        }
        if self.retry < 1 {
            return Err(Error::Config(format!(
                "{}: retry must be at least 1",
                self.tool
            )));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config(format!(
                "{}: batch_size must be positive",
                self.tool
            )));
        }
        for (role, var) in &self.credentials {
            let ok = !var.is_empty()
                && var
                    .chars()
                    .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
                && !var.starts_with(|c: char| c.is_ascii_digit());
            if !ok {
                return Err(Error::Config(format!(
                    "{}: credential {role:?} must name an environment variable, got {var:?}",
                    self.tool
                )));
            }
        }
        Ok(())
    }

    /// Value of the environment variable configured for `role`.
    pub fn credential(&self, role: &str) -> Option<String> {
        let var = self.credentials.get(role)?;
        std::env::var(var).ok().filter(|v| !v.is_empty())
    }

    pub(crate) fn required_credential(&self, role: &str, t: &Transport) -> Result<Option<String>> {
        match self.credential(role) {
            Some(v) => Ok(Some(v)),
            // Replay never sends credentials anywhere.
            None if t.mode() == Mode::Replay => Ok(None),
            None => Err(Error::Config(format!(
                "{}: environment variable {} is not set",
                self.tool,
                self.credentials
                    .get(role)
                    .map(String::as_str)
                    .unwrap_or(role)
            ))),
        }
    }
}

/// What the adapters consume: the snapshot and the SBOM emitted for it.
#[derive(Debug, Clone, Copy)]
pub struct AdapterInput<'a> {
    pub snapshot: &'a Snapshot,
    pub sbom: &'a [u8],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    Malformed,
    UnsupportedEcosystem,
    InvalidCoordinate,
    InvalidVersion,
    InvalidRange,
    NotAffected,
    Withdrawn,
    Duplicate,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::Malformed => "malformed",
            SkipReason::UnsupportedEcosystem => "unsupported-ecosystem",
            SkipReason::InvalidCoordinate => "invalid-coordinate",
            SkipReason::InvalidVersion => "invalid-version",
            SkipReason::InvalidRange => "invalid-range",
            SkipReason::NotAffected => "not-affected",
            SkipReason::Withdrawn => "withdrawn",
            SkipReason::Duplicate => "duplicate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub reason: SkipReason,
    pub detail: String,
}

impl Skip {
    pub fn new(reason: SkipReason, detail: impl Into<String>) -> Self {
        Skip {
            reason,
            detail: detail.into(),
        }
    }
}

/// A raw response kept verbatim for audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawArtifact {
    pub name: String,
    pub body: String,
}

/// `raw = normalized + Σ skipped`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accounting {
    pub raw: usize,
    pub normalized: usize,
    pub skipped: BTreeMap<SkipReason, usize>,
}

impl Accounting {
    pub fn skipped_total(&self) -> usize {
        self.skipped.values().sum()
    }

    pub fn reconciles(&self) -> bool {
        self.raw == self.normalized + self.skipped_total()
    }
}

/// Output of one adapter invocation before deduplication.
#[derive(Debug, Default)]
pub struct Collected {
    pub artifacts: Vec<RawArtifact>,
    /// One entry per raw finding the tool reported.
    pub records: Vec<std::result::Result<NormalizedFinding, Skip>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolRunResult {
    pub tool: ToolId,
    pub findings: Vec<NormalizedFinding>,
    pub raw_artifacts: Vec<RawArtifact>,
    pub skips: Vec<Skip>,
    pub accounting: Accounting,
    pub result_hash: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub attempts: u32,
}

impl ToolRunResult {
    pub fn out_of_input(&self) -> usize {
        self.findings.iter().filter(|f| f.out_of_input).count()
    }
}

/// SHA-256 of the canonical JSON array of `findings` in canonical order.
pub fn findings_hash(findings: &[NormalizedFinding]) -> String {
    let mut sorted: Vec<&NormalizedFinding> = findings.iter().collect();
    sorted.sort_by_key(|f| f.key());
    sha256_hex(
        to_canonical_json(&sorted)
            .expect("findings serialize")
            .as_bytes(),
    )
}

/// Canonical JSONL, one finding per line.
pub fn findings_jsonl(findings: &[NormalizedFinding]) -> Result<String> {
    let mut out = String::new();
    for f in findings {
        out.push_str(&to_canonical_json(f)?);
        out.push('\n');
    }
    Ok(out)
}

pub struct Ctx<'a> {
    pub tool: ToolId,
    pub cfg: &'a AdapterConfig,
    pub input: AdapterInput<'a>,
    pub transport: &'a Transport,
}

impl Ctx<'_> {
    /// The SBOM in a temporary file, for CLI tools.
    pub fn sbom_file(&self) -> Result<tempfile::NamedTempFile> {
        let mut f = tempfile::Builder::new()
            .prefix("scabench-")
            .suffix(".cdx.json")
            .tempfile()
            .map_err(|e| Error::io(std::env::temp_dir(), e))?;
        f.write_all(self.input.sbom)
            .map_err(|e| Error::io(f.path(), e))?;
        Ok(f)
    }

    pub fn finding(
        &self,
        ecosystem: EcosystemId,
        component: crate::model::ComponentRef,
        version: String,
        vuln: crate::model::VulnId,
    ) -> NormalizedFinding {
        NormalizedFinding {
            tool: self.tool,
            ecosystem,
            component,
            version,
            vuln,
            aliases: BTreeSet::new(),
            basis: crate::model::MatchBasis::Exact,
            affected: None,
            out_of_input: false,
        }
    }

    pub fn exec_failed(&self, status: u16, stderr: Option<&String>) -> Error {
        let tail: String = stderr
            .map(|s| {
                s.trim()
                    .chars()
                    .rev()
                    .take(400)
                    .collect::<Vec<_>>()
                    .into_iter()
                    .rev()
                    .collect()
            })
            .unwrap_or_default();
        Error::Execution {
            tool: self.tool.to_string(),
            message: format!("exit status {status}: {tail}"),
        }
    }
}

/// The contract every tool adapter implements.
pub trait Adapter: Send + Sync {
    fn tool(&self) -> ToolId;
    /// Whether the tool reads the SBOM (and so needs it to match the snapshot).
    fn consumes_sbom(&self) -> bool;
    fn invoke(&self, cx: &Ctx<'_>) -> Result<Collected>;
}

/// The native adapter for `tool`; `replay` for the findings-file adapter.
pub fn adapter_for(tool: ToolId) -> Box<dyn Adapter> {
    match tool {
        ToolId::Dtrack => Box::new(dtrack::Dtrack),
        ToolId::Snyk => Box::new(snyk::Snyk),
        ToolId::OssIndex => Box::new(ossindex::OssIndex),
        ToolId::Github => Box::new(github::Github),
        ToolId::Trivy => Box::new(trivy::Trivy),
        ToolId::Replay => Box::new(replay::Replay(tool)),
    }
}

fn retryable(e: &Error) -> bool {
    matches!(
        e,
        Error::Execution { .. } | Error::Transport(_) | Error::Decode(_)
    )
}

/// Runs one tool over the input and normalizes its output.
///
/// When `cfg.replay_findings` is set the findings file stands in for the tool
/// and its findings are attributed to `tool`.
pub fn run_adapter(
    tool: ToolId,
    input: AdapterInput<'_>,
    cfg: &AdapterConfig,
    transport: &Transport,
) -> Result<ToolRunResult> {
    cfg.validate()?;
    if cfg.tool != tool {
        return Err(Error::Usage(format!(
            "adapter config is for {} but {tool} was requested",
            cfg.tool
        )));
    }
    let adapter: Box<dyn Adapter> = if cfg.replay_findings.is_some() {
        Box::new(replay::Replay(tool))
    } else {
        adapter_for(tool)
    };
    if adapter.consumes_sbom() {
        check_sbom(input)?;
    }
    let cx = Ctx {
        tool,
        cfg,
        input,
        transport,
    };
    let started_at = transport.now()?;
    let mut attempt = 0;
    let collected = loop {
        attempt += 1;
        match adapter.invoke(&cx) {
            Ok(c) => break c,
            Err(e) if retryable(&e) && attempt < cfg.retry => {
                tracing::warn!(%tool, attempt, error = %e, "tool run failed, retrying");
            }
            Err(e) if retryable(&e) => {
                return Err(Error::Execution {
                    tool: tool.to_string(),
                    message: format!("failed after {attempt} attempt(s): {e}"),
                })
            }
            Err(e) => return Err(e),
        }
    };
    let finished_at = transport.now()?;
    Ok(finish(
        tool,
        input.snapshot,
        collected,
        started_at,
        finished_at,
        attempt,
    ))
}

fn check_sbom(input: AdapterInput<'_>) -> Result<()> {
    #[derive(Deserialize)]
    struct Head {
        #[serde(rename = "serialNumber")]
        serial_number: Option<String>,
    }
    let head: Head = serde_json::from_slice(input.sbom)
        .map_err(|e| Error::Usage(format!("SBOM is not CycloneDX JSON: {e}")))?;
    let want = serial_number(&input.snapshot.digest);
    if head.serial_number.as_deref() != Some(want.as_str()) {
        return Err(Error::Usage(format!(
            "SBOM serial {:?} does not belong to snapshot {}",
            head.serial_number,
            input.snapshot.digest_prefix()
        )));
    }
    Ok(())
}

fn finish(
    tool: ToolId,
    snapshot: &Snapshot,
    collected: Collected,
    started_at: DateTime<Utc>,
    finished_at: DateTime<Utc>,
    attempts: u32,
) -> ToolRunResult {
    let raw = collected.records.len();
    let mut normalized = Vec::new();
    let mut skips = Vec::new();
    for r in collected.records {
        match r {
            Ok(mut f) => {
                f.tool = tool;
                normalized.push(f);
            }
            Err(s) => skips.push(s),
        }
    }
    let (mut findings, duplicates) = dedup_findings(normalized);
    for _ in 0..duplicates {
        skips.push(Skip::new(
            SkipReason::Duplicate,
            "merged at canonical identifier level",
        ));
    }

    let mut inputs: BTreeMap<(EcosystemId, String), Vec<String>> = BTreeMap::new();
    for (c, v) in snapshot.component_versions() {
        inputs
            .entry((c.ecosystem, c.key()))
            .or_default()
            .push(v.raw);
    }
    for f in &mut findings {
        let known = inputs
            .get(&(f.ecosystem, f.component.key()))
            .is_some_and(|vs| {
                vs.iter().any(|v| {
                    *v == f.version
                        || compare_raw(f.ecosystem, v, &f.version).is_ok_and(|o| o.is_eq())
                })
            });
        f.out_of_input = !known;
    }

    let mut skipped = BTreeMap::new();
    for s in &skips {
        *skipped.entry(s.reason).or_insert(0) += 1;
    }
    let accounting = Accounting {
        raw,
        normalized: findings.len(),
        skipped,
    };
    debug_assert!(accounting.reconciles());
    ToolRunResult {
        tool,
        result_hash: findings_hash(&findings),
        findings,
        raw_artifacts: collected.artifacts,
        skips,
        accounting,
        started_at,
        finished_at,
        attempts,
    }
}

/// Runs every configured tool, one thread per tool, each on its own
/// transport. Results come back in input order.
pub fn run_all(
    input: AdapterInput<'_>,
    jobs: &[(AdapterConfig, Transport)],
) -> Vec<Result<ToolRunResult>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(cfg, t)| s.spawn(move || run_adapter(cfg.tool, input, cfg, t)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("adapter thread"))
            .collect()
    })
}
