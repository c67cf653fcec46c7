//! Domain types shared by every stage of the pipeline: ecosystems, component
//! coordinates, versions, vulnerability identifiers, ground-truth entries and
//! normalized tool findings.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[non_exhaustive]
pub enum EcosystemId {
    Maven,
    #[serde(rename = "npm")]
    Npm,
    NuGet,
    PyPI,
}

impl EcosystemId {
    pub const ALL: [EcosystemId; 4] = [
        EcosystemId::Maven,
        EcosystemId::Npm,
        EcosystemId::NuGet,
        EcosystemId::PyPI,
    ];

    /// Name as used by OSV and in all serialized artifacts.
    pub fn as_str(self) -> &'static str {
        match self {
            EcosystemId::Maven => "Maven",
            EcosystemId::Npm => "npm",
            EcosystemId::NuGet => "NuGet",
            EcosystemId::PyPI => "PyPI",
        }
    }

    pub fn purl_type(self) -> &'static str {
        match self {
            EcosystemId::Maven => "maven",
            EcosystemId::Npm => "npm",
            EcosystemId::NuGet => "nuget",
            EcosystemId::PyPI => "pypi",
        }
    }

    pub fn from_purl_type(t: &str) -> Option<Self> {
        match t.to_ascii_lowercase().as_str() {
            "maven" => Some(EcosystemId::Maven),
            "npm" => Some(EcosystemId::Npm),
            "nuget" => Some(EcosystemId::NuGet),
            "pypi" => Some(EcosystemId::PyPI),
            _ => None,
        }
    }
}

impl fmt::Display for EcosystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EcosystemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "maven" => Ok(EcosystemId::Maven),
            "npm" => Ok(EcosystemId::Npm),
            "nuget" => Ok(EcosystemId::NuGet),
            "pypi" => Ok(EcosystemId::PyPI),
            _ => Err(Error::Usage(format!("unknown ecosystem {s:?}"))),
        }
    }
}

/// A component coordinate in canonical form.
///
/// Equality, ordering and hashing use [`ComponentRef::key`], which folds case
/// for NuGet while `name` keeps the display casing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentRef {
    pub ecosystem: EcosystemId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub name: String,
}

impl ComponentRef {
    /// Comparison key: `group:name` for Maven, the canonical name otherwise,
    /// lowercased for NuGet.
    pub fn key(&self) -> String {
        match (self.ecosystem, &self.group) {
            (EcosystemId::NuGet, _) => self.name.to_lowercase(),
            (_, Some(g)) => format!("{g}:{}", self.name),
            (_, None) => self.name.clone(),
        }
    }
}

impl PartialEq for ComponentRef {
    fn eq(&self, other: &Self) -> bool {
        self.ecosystem == other.ecosystem && self.key() == other.key()
    }
}

impl Eq for ComponentRef {}

impl Hash for ComponentRef {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.ecosystem.hash(state);
        self.key().hash(state);
    }
}

impl PartialOrd for ComponentRef {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ComponentRef {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ecosystem
            .cmp(&other.ecosystem)
            .then_with(|| self.key().cmp(&other.key()))
    }
}

impl fmt::Display for ComponentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.group {
            Some(g) => write!(f, "{g}:{}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

/// Normalizes a raw component name into its canonical coordinate.
pub fn canonicalize_component(ecosystem: EcosystemId, raw_name: &str) -> Result<ComponentRef> {
    let raw = raw_name.trim();
    if raw.is_empty() {
        return Err(Error::Coordinate("empty component name".into()));
    }
    let component = match ecosystem {
        EcosystemId::Maven => {
            let (group, artifact) = raw.split_once(':').ok_or_else(|| {
                Error::Coordinate(format!("Maven coordinate {raw:?} is missing ':'"))
            })?;
            let (group, artifact) = (group.trim(), artifact.trim());
            if group.is_empty() || artifact.is_empty() || artifact.contains(':') {
                return Err(Error::Coordinate(format!(
                    "Maven coordinate {raw:?} must be group:artifact"
                )));
            }
            ComponentRef {
                ecosystem,
                group: Some(group.to_string()),
                name: artifact.to_string(),
            }
        }
        EcosystemId::Npm => ComponentRef {
            ecosystem,
            group: None,
            name: raw.to_lowercase(),
        },
        EcosystemId::PyPI => ComponentRef {
            ecosystem,
            group: None,
            name: normalize_pypi_name(raw),
        },
        EcosystemId::NuGet => ComponentRef {
            ecosystem,
            group: None,
            name: raw.to_string(),
        },
    };
    Ok(component)
}

/// Lowercase and collapse runs of `.`, `_`, `-` into a single `-`.
pub fn normalize_pypi_name(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut in_sep = false;
    for ch in raw.chars() {
        if matches!(ch, '.' | '_' | '-') {
            if !in_sep {
                out.push('-');
                in_sep = true;
            }
        } else {
            out.extend(ch.to_lowercase());
            in_sep = false;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VersionRef {
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub released_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub prerelease: bool,
}

impl VersionRef {
    pub fn new(raw: impl Into<String>) -> Self {
        VersionRef {
            raw: raw.into(),
            released_at: None,
            prerelease: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VulnScheme {
    Cve,
    Ghsa,
    OsvNative,
    Other,
}

/// A vulnerability identifier. The scheme is derived from the prefix, and the
/// identifier text itself is kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VulnId(String);

const OSV_NATIVE_PREFIXES: [&str; 3] = ["PYSEC-", "GO-", "RUSTSEC-"];

impl VulnId {
    pub fn new(id: impl Into<String>) -> Self {
        VulnId(id.into())
    }

    /// Builds an id from tool output, fixing the case of well-known prefixes
    /// (`cve-2021-1` becomes `CVE-2021-1`, GHSA bodies are lowercase).
    pub fn normalized(id: &str) -> Self {
        let id = id.trim();
        let upper = id.to_ascii_uppercase();
        if upper.starts_with("CVE-") {
            VulnId(upper)
        } else if upper.starts_with("GHSA-") {
            VulnId(format!("GHSA-{}", id[5..].to_ascii_lowercase()))
        } else if let Some(p) = OSV_NATIVE_PREFIXES.iter().find(|p| upper.starts_with(*p)) {
            VulnId(format!("{p}{}", &id[p.len()..]))
        } else {
            VulnId(id.to_string())
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn scheme(&self) -> VulnScheme {
        let upper = self.0.to_ascii_uppercase();
        if upper.starts_with("CVE-") {
            VulnScheme::Cve
        } else if upper.starts_with("GHSA-") {
            VulnScheme::Ghsa
        } else if OSV_NATIVE_PREFIXES.iter().any(|p| upper.starts_with(p)) {
            VulnScheme::OsvNative
        } else {
            VulnScheme::Other
        }
    }

    pub fn is_cve(&self) -> bool {
        self.scheme() == VulnScheme::Cve
    }
}

impl fmt::Display for VulnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for VulnId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Data("empty vulnerability id".into()));
        }
        Ok(VulnId(s.to_string()))
    }
}

impl Serialize for VulnId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for VulnId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s.is_empty() {
            return Err(serde::de::Error::custom("empty vulnerability id"));
        }
        Ok(VulnId(s))
    }
}

/// Picks the identifier returned by the OSV query as canonical; every other
/// identifier of the record is kept as an alias.
pub fn canonical_vuln(
    entry_id: &VulnId,
    aliases: &BTreeSet<VulnId>,
    osv_returned: &VulnId,
) -> (VulnId, BTreeSet<VulnId>) {
    let mut all: BTreeSet<VulnId> = aliases.clone();
    all.insert(entry_id.clone());
    all.remove(osv_returned);
    (osv_returned.clone(), all)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ToolId {
    #[serde(rename = "dtrack")]
    Dtrack,
    #[serde(rename = "snyk")]
    Snyk,
    #[serde(rename = "oss-index")]
    OssIndex,
    #[serde(rename = "github")]
    Github,
    #[serde(rename = "trivy")]
    Trivy,
    #[serde(rename = "replay")]
    Replay,
}

impl ToolId {
    pub const EVALUATED: [ToolId; 5] = [
        ToolId::Dtrack,
        ToolId::Github,
        ToolId::OssIndex,
        ToolId::Snyk,
        ToolId::Trivy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ToolId::Dtrack => "dtrack",
            ToolId::Snyk => "snyk",
            ToolId::OssIndex => "oss-index",
            ToolId::Github => "github",
            ToolId::Trivy => "trivy",
            ToolId::Replay => "replay",
        }
    }
}

impl fmt::Display for ToolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ToolId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dtrack" => Ok(ToolId::Dtrack),
            "snyk" => Ok(ToolId::Snyk),
            "oss-index" => Ok(ToolId::OssIndex),
            "github" => Ok(ToolId::Github),
            "trivy" => Ok(ToolId::Trivy),
            "replay" => Ok(ToolId::Replay),
            _ => Err(Error::Usage(format!("unknown tool {s:?}"))),
        }
    }
}

/// One ground-truth tuple `(ecosystem, component, version, vulnerability)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub ecosystem: EcosystemId,
    pub component: ComponentRef,
    pub version: VersionRef,
    pub vuln: VulnId,
    #[serde(default)]
    pub aliases: BTreeSet<VulnId>,
    #[serde(default)]
    pub cves: BTreeSet<VulnId>,
    pub retrieved_at: DateTime<Utc>,
}

/// Identity of a ground-truth entry within a snapshot.
pub type EntryKey = (EcosystemId, String, String, VulnId);

impl GroundTruthEntry {
    pub fn new(
        component: ComponentRef,
        version: VersionRef,
        vuln: VulnId,
        aliases: BTreeSet<VulnId>,
        retrieved_at: DateTime<Utc>,
    ) -> Self {
        let cves = aliases
            .iter()
            .chain(std::iter::once(&vuln))
            .filter(|v| v.is_cve())
            .cloned()
            .collect();
        GroundTruthEntry {
            ecosystem: component.ecosystem,
            component,
            version,
            vuln,
            aliases,
            cves,
            retrieved_at,
        }
    }

    pub fn key(&self) -> EntryKey {
        (
            self.ecosystem,
            self.component.key(),
            self.version.raw.clone(),
            self.vuln.clone(),
        )
    }

    /// `{vuln} ∪ aliases`.
    pub fn identifiers(&self) -> BTreeSet<VulnId> {
        let mut ids = self.aliases.clone();
        ids.insert(self.vuln.clone());
        ids
    }

    pub fn is_cve_backed(&self) -> bool {
        !self.cves.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchBasis {
    Exact,
    Range,
}

/// A tool-reported vulnerability mapped onto `(e, c, v, u)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedFinding {
    pub tool: ToolId,
    pub ecosystem: EcosystemId,
    pub component: ComponentRef,
    pub version: String,
    pub vuln: VulnId,
    #[serde(default)]
    pub aliases: BTreeSet<VulnId>,
    pub basis: MatchBasis,
    /// Affected interval in the comparator grammar, present for range findings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affected: Option<String>,
    /// Set when the finding names a coordinate that was not part of the input.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub out_of_input: bool,
}

pub type FindingKey = (ToolId, EcosystemId, String, String, VulnId);

impl NormalizedFinding {
    pub fn key(&self) -> FindingKey {
        (
            self.tool,
            self.ecosystem,
            self.component.key(),
            self.version.clone(),
            self.vuln.clone(),
        )
    }

    pub fn identifiers(&self) -> BTreeSet<VulnId> {
        let mut ids = self.aliases.clone();
        ids.insert(self.vuln.clone());
        ids
    }
}

fn scheme_rank(id: &VulnId) -> u8 {
    match id.scheme() {
        VulnScheme::Ghsa => 0,
        VulnScheme::OsvNative => 1,
        VulnScheme::Cve => 2,
        VulnScheme::Other => 3,
    }
}

/// Collapses findings that describe the same vulnerability on the same
/// `(tool, e, c, v)`. Two findings are merged when their identifier sets
/// intersect; the merged finding takes the preferred identifier (GHSA, then
/// OSV-native, then CVE, then others) as `vuln` and all remaining ones as
/// aliases. Returns the merged findings in canonical order plus the number of
/// inputs absorbed as duplicates.
pub fn dedup_findings(findings: Vec<NormalizedFinding>) -> (Vec<NormalizedFinding>, usize) {
    use std::collections::BTreeMap;

    let input_len = findings.len();
    let mut groups: BTreeMap<(ToolId, EcosystemId, String, String), Vec<NormalizedFinding>> =
        BTreeMap::new();
    for f in findings {
        groups
            .entry((f.tool, f.ecosystem, f.component.key(), f.version.clone()))
            .or_default()
            .push(f);
    }

    let mut out = Vec::new();
    for (_, members) in groups {
        let mut clusters: Vec<(BTreeSet<VulnId>, NormalizedFinding)> = Vec::new();
        for f in members {
            let ids = f.identifiers();
            let mut merged_ids = ids.clone();
            let mut merged = f;
            let mut i = 0;
            while i < clusters.len() {
                if !clusters[i].0.is_disjoint(&merged_ids) {
                    let (other_ids, other) = clusters.swap_remove(i);
                    merged_ids.extend(other_ids);
                    merged = merge_pair(other, merged);
                    i = 0;
                } else {
                    i += 1;
                }
            }
            clusters.push((merged_ids, merged));
        }
        for (ids, mut f) in clusters {
            let primary = ids
                .iter()
                .min_by(|a, b| scheme_rank(a).cmp(&scheme_rank(b)).then_with(|| a.cmp(b)))
                .cloned()
                .expect("non-empty identifier set");
            f.aliases = ids.into_iter().filter(|i| *i != primary).collect();
            f.vuln = primary;
            out.push(f);
        }
    }
    out.sort_by_key(|a| a.key());
    let absorbed = input_len - out.len();
    (out, absorbed)
}

fn merge_pair(first: NormalizedFinding, second: NormalizedFinding) -> NormalizedFinding {
    // Exact beats range; an exact report is the stronger statement.
    let (mut keep, other) = if first.basis <= second.basis {
        (first, second)
    } else {
        (second, first)
    };
    keep.out_of_input &= other.out_of_input;
    if keep.affected.is_none() {
        keep.affected = other.affected;
    }
    keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn maven_coordinates_split() {
        let c = canonicalize_component(EcosystemId::Maven, "org.springframework:spring-expression")
            .unwrap();
        assert_eq!(c.group.as_deref(), Some("org.springframework"));
        assert_eq!(c.name, "spring-expression");
        assert_eq!(c.to_string(), "org.springframework:spring-expression");
    }

    #[test]
    fn maven_requires_colon() {
        let err =
            canonicalize_component(EcosystemId::Maven, "org.apache.logging.log4j").unwrap_err();
        assert_eq!(err.kind(), "coordinate");
        assert!(canonicalize_component(EcosystemId::Maven, "a:b:c").is_err());
        assert!(canonicalize_component(EcosystemId::Maven, ":b").is_err());
    }

    #[test]
    fn pypi_normalization() {
        assert_eq!(
            canonicalize_component(EcosystemId::PyPI, "Requests")
                .unwrap()
                .name,
            "requests"
        );
        assert_eq!(
            canonicalize_component(EcosystemId::PyPI, "foo.bar_baz")
                .unwrap()
                .name,
            "foo-bar-baz"
        );
        // Cases from the packaging name-normalization corpus.
        for raw in [
            "friendly-bard",
            "Friendly-Bard",
            "FRIENDLY-BARD",
            "friendly.bard",
            "friendly_bard",
            "friendly--bard",
            "FrIeNdLy-._.-bArD",
        ] {
            assert_eq!(normalize_pypi_name(raw), "friendly-bard", "{raw}");
        }
    }

    #[test]
    fn nuget_case_insensitive_but_display_preserved() {
        let a = canonicalize_component(EcosystemId::NuGet, "Microsoft.Data.SqlClient").unwrap();
        let b = canonicalize_component(EcosystemId::NuGet, "microsoft.data.sqlclient").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.name, "Microsoft.Data.SqlClient");
    }

    #[test]
    fn empty_name_rejected() {
        assert!(canonicalize_component(EcosystemId::Npm, "  ").is_err());
    }

    #[test]
    fn vuln_schemes() {
        assert_eq!(VulnId::new("CVE-2025-24010").scheme(), VulnScheme::Cve);
        assert_eq!(
            VulnId::new("GHSA-vg6x-rcgg-rjx6").scheme(),
            VulnScheme::Ghsa
        );
        assert_eq!(
            VulnId::new("PYSEC-2023-175").scheme(),
            VulnScheme::OsvNative
        );
        assert_eq!(
            VulnId::new("RUSTSEC-2020-0001").scheme(),
            VulnScheme::OsvNative
        );
        assert_eq!(VulnId::new("sonatype-2020-1").scheme(), VulnScheme::Other);
        let id: VulnId = "GHSA-vg6x-rcgg-rjx6".parse().unwrap();
        assert_eq!(id.to_string(), "GHSA-vg6x-rcgg-rjx6");
        assert_eq!(
            VulnId::normalized("ghsa-VG6X-rcgg-rjx6").as_str(),
            "GHSA-vg6x-rcgg-rjx6"
        );
        assert_eq!(
            VulnId::normalized("cve-2021-44228").as_str(),
            "CVE-2021-44228"
        );
    }

    #[test]
    fn canonical_vuln_keeps_returned_id() {
        let ghsa = VulnId::new("GHSA-vg6x-rcgg-rjx6");
        let cve = VulnId::new("CVE-2025-24010");
        let (canon, aliases) = canonical_vuln(&ghsa, &[cve.clone()].into(), &ghsa);
        assert_eq!(canon, ghsa);
        assert_eq!(aliases, [cve].into());

        let lone = VulnId::new("PYSEC-2023-175");
        let (canon, aliases) = canonical_vuln(&lone, &BTreeSet::new(), &lone);
        assert_eq!(canon, lone);
        assert!(aliases.is_empty());
        let entry = GroundTruthEntry::new(
            canonicalize_component(EcosystemId::PyPI, "pillow").unwrap(),
            VersionRef::new("9.5.0"),
            canon,
            aliases,
            Utc::now(),
        );
        assert!(entry.cves.is_empty());
    }

    #[test]
    fn cves_are_subset_of_identifiers() {
        let e = GroundTruthEntry::new(
            canonicalize_component(EcosystemId::Npm, "vite").unwrap(),
            VersionRef::new("0.1.0"),
            VulnId::new("GHSA-vg6x-rcgg-rjx6"),
            [VulnId::new("CVE-2025-24010")].into(),
            Utc::now(),
        );
        assert!(e.cves.is_subset(&e.identifiers()));
        assert_eq!(e.cves.len(), 1);
    }

    #[test]
    fn tool_ids_roundtrip() {
        for t in ToolId::EVALUATED.iter().chain([ToolId::Replay].iter()) {
            let s = serde_json::to_string(t).unwrap();
            assert_eq!(s, format!("\"{}\"", t.as_str()));
            assert_eq!(t.as_str().parse::<ToolId>().unwrap(), *t);
        }
    }

    fn finding(ver: &str, vuln: &str, aliases: &[&str]) -> NormalizedFinding {
        NormalizedFinding {
            tool: ToolId::Trivy,
            ecosystem: EcosystemId::Npm,
            component: canonicalize_component(EcosystemId::Npm, "vite").unwrap(),
            version: ver.into(),
            vuln: VulnId::new(vuln),
            aliases: aliases.iter().map(|a| VulnId::new(*a)).collect(),
            basis: MatchBasis::Exact,
            affected: None,
            out_of_input: false,
        }
    }

    #[test]
    fn dedup_merges_alias_overlap() {
        let (out, absorbed) = dedup_findings(vec![
            finding("0.1.0", "CVE-2025-24010", &[]),
            finding("0.1.0", "GHSA-vg6x-rcgg-rjx6", &["CVE-2025-24010"]),
            finding("0.1.0", "CVE-2025-24010", &[]),
            finding("0.1.1", "CVE-2025-24010", &[]),
        ]);
        assert_eq!(out.len(), 2);
        assert_eq!(absorbed, 2);
        assert_eq!(out[0].vuln.as_str(), "GHSA-vg6x-rcgg-rjx6");
        assert_eq!(out[0].aliases.len(), 1);
        assert_eq!(out[1].version, "0.1.1");
    }

    fn mutate_case_and_separators(base: &str, seed: u64) -> String {
        let mut s = seed;
        base.chars()
            .map(|c| {
                s = s
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                let r = (s >> 33) % 4;
                match (c, r) {
                    ('-' | '_' | '.', 0) => '_',
                    ('-' | '_' | '.', 1) => '.',
                    ('-' | '_' | '.', _) => '-',
                    (c, 0) => c.to_ascii_uppercase(),
                    (c, _) => c,
                }
            })
            .collect()
    }

    proptest! {
        #[test]
        fn canonicalization_is_idempotent(
            name in "[a-zA-Z][a-zA-Z0-9._-]{0,20}",
            eco in prop::sample::select(vec![EcosystemId::Npm, EcosystemId::PyPI, EcosystemId::NuGet]),
        ) {
            let once = canonicalize_component(eco, &name).unwrap();
            let twice = canonicalize_component(eco, &once.to_string()).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(once.to_string(), twice.to_string());
        }

        #[test]
        fn pypi_mutations_collapse(name in "[a-z][a-z0-9]{0,6}([._-][a-z0-9]{1,6}){0,3}", seed in any::<u64>()) {
            let mutated = mutate_case_and_separators(&name, seed);
            prop_assert_eq!(
                canonicalize_component(EcosystemId::PyPI, &name).unwrap(),
                canonicalize_component(EcosystemId::PyPI, &mutated).unwrap()
            );
        }

        #[test]
        fn maven_idempotent(g in "[a-z]{1,8}(\\.[a-z]{1,8}){0,3}", a in "[a-z][a-z0-9-]{0,12}") {
            let once = canonicalize_component(EcosystemId::Maven, &format!("{g}:{a}")).unwrap();
            let twice = canonicalize_component(EcosystemId::Maven, &once.to_string()).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn entry_serialization_roundtrip(
            name in "[a-z]{1,10}",
            ver in "[0-9]{1,3}\\.[0-9]{1,3}",
            id in "GHSA-[a-z0-9]{4}-[a-z0-9]{4}-[a-z0-9]{4}",
            cve in prop::option::of("CVE-20[0-9]{2}-[0-9]{4,6}"),
            secs in 0i64..4_000_000_000,
        ) {
            let aliases: BTreeSet<VulnId> = cve.into_iter().map(VulnId::new).collect();
            let e = GroundTruthEntry::new(
                canonicalize_component(EcosystemId::PyPI, &name).unwrap(),
                VersionRef { raw: ver, released_at: DateTime::from_timestamp(secs, 0), prerelease: false },
                VulnId::new(id),
                aliases,
                DateTime::from_timestamp(secs, 0).unwrap(),
            );
            let text = crate::canonical::to_canonical_json(&e).unwrap();
            let back: GroundTruthEntry = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(&back, &e);
            prop_assert_eq!(crate::canonical::to_canonical_json(&back).unwrap(), text);
        }
    }
}
