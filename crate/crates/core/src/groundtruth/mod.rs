//! Ground-truth construction: curated components, version selection, OSV
//! mapping, deduplication and per-ecosystem balancing.

mod stats;
mod store;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical::{sha256_hex, to_canonical_json, to_canonical_value};
use crate::clients::{OsvClient, RegistryClient, RegistryRelease};
use crate::error::{Error, Result};
use crate::model::{
    canonicalize_component, ComponentRef, EcosystemId, EntryKey, GroundTruthEntry, VersionRef,
};
use crate::transport::{map_bounded, Transport};

pub use stats::{compute_stats, EcosystemStats, FrequencyStats, SnapshotStats};
pub use store::{read_snapshot, write_snapshot, SnapshotManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl DateWindow {
    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t <= self.end
    }
}

fn default_cap() -> usize {
    10
}

fn default_targets() -> BTreeMap<EcosystemId, usize> {
    EcosystemId::ALL.iter().map(|e| (*e, 250)).collect()
}

fn default_concurrency() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    /// Curated component names per ecosystem, canonicalized at build time.
    #[serde(default)]
    pub components: BTreeMap<EcosystemId, Vec<String>>,
    #[serde(default = "default_cap")]
    pub version_cap: usize,
    #[serde(default)]
    pub date_window: Option<DateWindow>,
    #[serde(default = "default_targets")]
    pub target_entries: BTreeMap<EcosystemId, usize>,
    #[serde(default)]
    pub include_prereleases: bool,
    #[serde(default)]
    pub per_version_advisory_cap: Option<usize>,
    /// Registry requests in flight at once.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        let list = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let mut components = BTreeMap::new();
        components.insert(
            EcosystemId::Maven,
            list(&[
                "org.springframework:spring-expression",
                "org.apache.logging.log4j:log4j-core",
                "com.fasterxml.jackson.core:jackson-databind",
            ]),
        );
        components.insert(EcosystemId::Npm, list(&["vite", "lodash", "axios"]));
        components.insert(
            EcosystemId::NuGet,
            list(&["Newtonsoft.Json", "System.Text.Encodings.Web"]),
        );
        components.insert(EcosystemId::PyPI, list(&["requests", "tornado", "django"]));
        BuildConfig {
            components,
            version_cap: default_cap(),
            date_window: None,
            target_entries: default_targets(),
            include_prereleases: false,
            per_version_advisory_cap: None,
            concurrency: default_concurrency(),
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version_cap < 1 {
            return Err(Error::Config("version_cap must be at least 1".into()));
        }
        if let Some(w) = &self.date_window {
            if w.start > w.end {
                return Err(Error::Config("date_window start is after end".into()));
            }
        }
        Ok(())
    }

    pub fn target_for(&self, e: EcosystemId) -> usize {
        self.target_entries.get(&e).copied().unwrap_or(0)
    }

    /// Canonical components per ecosystem, first occurrence wins.
    pub fn component_refs(&self) -> Result<BTreeMap<EcosystemId, Vec<ComponentRef>>> {
        let mut out = BTreeMap::new();
        for (e, names) in &self.components {
            let mut seen = BTreeSet::new();
            let mut refs = Vec::new();
            for n in names {
                let c = canonicalize_component(*e, n)?;
                if seen.insert(c.clone()) {
                    refs.push(c);
                }
            }
            out.insert(*e, refs);
        }
        Ok(out)
    }
}

/// Picks the versions of one component that enter the ground truth.
///
/// `releases` must be ascending. Yanked releases are dropped, pre-releases
/// unless configured, and anything outside the date window (including
/// releases without a timestamp when a window is set). Of the survivors the
/// `version_cap` most recent are kept; NuGet instead keeps an evenly spaced
/// selection across the survivors.
pub fn select_versions(
    component: &ComponentRef,
    releases: &[RegistryRelease],
    cfg: &BuildConfig,
) -> Vec<VersionRef> {
    let survivors: Vec<&RegistryRelease> = releases
        .iter()
        .filter(|r| !r.yanked)
        .filter(|r| cfg.include_prereleases || !r.version.prerelease)
        .filter(|r| match (&cfg.date_window, r.version.released_at) {
            (None, _) => true,
            (Some(w), Some(t)) => w.contains(t),
            (Some(_), None) => false,
        })
        .collect();
    let cap = cfg.version_cap;
    let n = survivors.len();
    let picked: Vec<&RegistryRelease> = if n <= cap {
        survivors
    } else if component.ecosystem == EcosystemId::NuGet {
        even_indices(n, cap)
            .into_iter()
            .map(|i| survivors[i])
            .collect()
    } else {
        survivors[n - cap..].to_vec()
    };
    picked.into_iter().map(|r| r.version.clone()).collect()
}

/// `k` indices spread evenly over `0..n` (`k <= n`), starting at 0.
pub fn even_indices(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| i * n / k).collect()
}

/// A balanced, hashed ground-truth set.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Canonical order, unique per `(e, c, v, u)`.
    pub entries: Vec<GroundTruthEntry>,
    pub config: BuildConfig,
    pub created_at: DateTime<Utc>,
    pub digest: String,
    pub stats: SnapshotStats,
}

impl Snapshot {
    /// Sorts, collapses duplicate tuples and computes digest and stats.
    pub fn from_entries(
        entries: Vec<GroundTruthEntry>,
        config: BuildConfig,
        created_at: DateTime<Utc>,
    ) -> Self {
        let mut by_key: BTreeMap<EntryKey, GroundTruthEntry> = BTreeMap::new();
        for e in entries {
            by_key.entry(e.key()).or_insert(e);
        }
        let entries: Vec<GroundTruthEntry> = by_key.into_values().collect();
        let digest = hash_entries(&entries);
        let stats = compute_stats(&entries);
        Snapshot {
            entries,
            config,
            created_at,
            digest,
            stats,
        }
    }

    pub fn digest_prefix(&self) -> &str {
        &self.digest[..12.min(self.digest.len())]
    }

    /// Distinct `(e, c, v)` triples in canonical order.
    pub fn component_versions(&self) -> Vec<(ComponentRef, VersionRef)> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for e in &self.entries {
            if seen.insert((e.ecosystem, e.component.key(), e.version.raw.clone())) {
                out.push((e.component.clone(), e.version.clone()));
            }
        }
        out
    }
}

/// SHA-256 over the canonical JSON array of entries sorted by
/// `(ecosystem, component, version, vuln)`, with `retrieved_at` removed.
pub fn hash_entries(entries: &[GroundTruthEntry]) -> String {
    let mut sorted: Vec<&GroundTruthEntry> = entries.iter().collect();
    sorted.sort_by_key(|e| e.key());
    let values: Vec<Value> = sorted
        .into_iter()
        .map(|e| {
            let mut v = to_canonical_value(e).expect("entries serialize");
            v.as_object_mut()
                .expect("entry is an object")
                .remove("retrieved_at");
            v
        })
        .collect();
    sha256_hex(
        to_canonical_json(&values)
            .expect("canonical entries")
            .as_bytes(),
    )
}

pub fn hash_snapshot(s: &Snapshot) -> String {
    hash_entries(&s.entries)
}

/// Builds snapshots from registry listings and OSV.
#[derive(Debug, Clone)]
pub struct GroundTruthBuilder {
    pub osv: OsvClient,
    pub registry: RegistryClient,
    pub transport: Transport,
}

impl GroundTruthBuilder {
    /// Clients on the public endpoints, all sharing `transport`.
    pub fn new(transport: Transport) -> Self {
        GroundTruthBuilder {
            osv: OsvClient::new(transport.clone()),
            registry: RegistryClient::new(transport.clone()),
            transport,
        }
    }

    pub fn build(&self, cfg: &BuildConfig) -> Result<Snapshot> {
        cfg.validate()?;
        let components = cfg.component_refs()?;
        if components.values().all(Vec::is_empty) {
            return Ok(Snapshot::from_entries(Vec::new(), cfg.clone(), Utc::now()));
        }
        let retrieved_at = self.transport.now()?;
        let mut entries = Vec::new();
        for (eco, comps) in &components {
            let target = cfg.target_for(*eco);
            if comps.is_empty() || target == 0 {
                continue;
            }
            let listings = map_bounded(comps, cfg.concurrency, |c| self.registry.list_versions(c));
            let mut items = Vec::new();
            for (c, releases) in comps.iter().zip(listings) {
                for v in select_versions(c, &releases?, cfg) {
                    items.push((c.clone(), v));
                }
            }
            tracing::info!(ecosystem = %eco, items = items.len(), "querying OSV");

            let mut collected: BTreeMap<EntryKey, GroundTruthEntry> = BTreeMap::new();
            for chunk in items.chunks(self.osv.batch_size.max(1)) {
                if collected.len() >= target {
                    break;
                }
                for result in self.osv.query_batch(chunk)? {
                    let mut per_version: Vec<GroundTruthEntry> = result
                        .vulns
                        .into_iter()
                        .map(|rec| {
                            GroundTruthEntry::new(
                                result.component.clone(),
                                result.version.clone(),
                                rec.id,
                                rec.aliases,
                                retrieved_at,
                            )
                        })
                        .collect();
                    per_version.sort_by(|a, b| a.vuln.cmp(&b.vuln));
                    per_version.dedup_by(|a, b| a.vuln == b.vuln);
                    if let Some(cap) = cfg.per_version_advisory_cap {
                        per_version.truncate(cap);
                    }
                    for e in per_version {
                        collected.entry(e.key()).or_insert(e);
                    }
                }
            }
            // Balancing: canonical order, stable truncation to the target.
            entries.extend(collected.into_values().take(target));
        }
        Ok(Snapshot::from_entries(entries, cfg.clone(), Utc::now()))
    }
}

/// Builds a snapshot against the public endpoints through `transport`.
pub fn build_snapshot(cfg: &BuildConfig, transport: &Transport) -> Result<Snapshot> {
    GroundTruthBuilder::new(transport.clone()).build(cfg)
}
