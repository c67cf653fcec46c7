//! Random matching instances and the brute-force matching oracle.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use chrono::{TimeZone, Utc};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use scabench_core::groundtruth::{BuildConfig, Snapshot};
use scabench_core::model::{
    canonicalize_component, EcosystemId, EntryKey, FindingKey, GroundTruthEntry, MatchBasis,
    NormalizedFinding, ToolId, VersionRef, VulnId,
};
use scabench_core::version::{compare, parse_range, parse_version, satisfies};

const IDS: [&str; 6] = [
    "CVE-2024-0001",
    "CVE-2024-0002",
    "GHSA-aaaa-bbbb-cccc",
    "GHSA-dddd-eeee-ffff",
    "PYSEC-2024-1",
    "CVE-2024-0003",
];
const VERSIONS: [&str; 6] = ["1.0.0", "1.0.1", "1.1.0", "2.0.0-beta.1", "2.0.0", "2.1.0"];
const RANGES: [&str; 6] = [
    "<1.1.0",
    ">=1.0.1,<2.0.0",
    "=2.0.0-beta.1",
    ">1.0.0",
    "<=2.0.0",
    ">=2.0.0-beta.1,<2.1.0",
];

fn coordinates() -> Vec<(EcosystemId, &'static str)> {
    vec![
        (EcosystemId::Npm, "left-pad"),
        (EcosystemId::Npm, "vite"),
        (EcosystemId::PyPI, "Django"),
        (EcosystemId::Maven, "org.example:lib"),
    ]
}

fn pypi_version(v: &str) -> String {
    // "2.0.0-beta.1" is not PEP 440 spelling; use the equivalent "2.0.0b1".
    v.replace("-beta.", "b")
}

fn ids(rng: &mut ChaCha8Rng) -> (VulnId, BTreeSet<VulnId>) {
    let primary = VulnId::new(IDS[rng.random_range(0..IDS.len())]);
    let aliases = (0..rng.random_range(0..3))
        .map(|_| VulnId::new(IDS[rng.random_range(0..IDS.len())]))
        .filter(|a| *a != primary)
        .collect();
    (primary, aliases)
}

fn version_for(eco: EcosystemId, raw: &str) -> String {
    if eco == EcosystemId::PyPI {
        pypi_version(raw)
    } else {
        raw.to_string()
    }
}

pub fn instance(rng: &mut ChaCha8Rng) -> (Snapshot, Vec<NormalizedFinding>) {
    let t = Utc.with_ymd_and_hms(2026, 3, 28, 0, 0, 0).unwrap();
    let coords = coordinates();
    let n_gt = rng.random_range(0..=30);
    let mut entries = Vec::new();
    for _ in 0..n_gt {
        let (eco, name) = coords[rng.random_range(0..coords.len())];
        let (vuln, aliases) = ids(rng);
        let v = version_for(eco, VERSIONS[rng.random_range(0..VERSIONS.len())]);
        entries.push(GroundTruthEntry::new(
            canonicalize_component(eco, name).unwrap(),
            VersionRef::new(v),
            vuln,
            aliases,
            t,
        ));
    }
    let n_f = rng.random_range(0..=40);
    let mut findings = Vec::new();
    for _ in 0..n_f {
        let (eco, name) = coords[rng.random_range(0..coords.len())];
        let (vuln, aliases) = ids(rng);
        let range = rng.random_bool(0.4);
        findings.push(NormalizedFinding {
            tool: ToolId::Github,
            ecosystem: eco,
            component: canonicalize_component(eco, name).unwrap(),
            version: version_for(eco, VERSIONS[rng.random_range(0..VERSIONS.len())]),
            vuln,
            aliases,
            basis: if range {
                MatchBasis::Range
            } else {
                MatchBasis::Exact
            },
            affected: range.then(|| version_for(eco, RANGES[rng.random_range(0..RANGES.len())])),
            out_of_input: false,
        });
    }
    (
        Snapshot::from_entries(entries, BuildConfig::default(), t),
        findings,
    )
}

/// Direct transcription of the matching rule over every (entry, finding) pair.
pub fn brute_force(
    gt: &Snapshot,
    findings: &[NormalizedFinding],
) -> (BTreeSet<EntryKey>, BTreeSet<EntryKey>, BTreeSet<FindingKey>) {
    let mut tp = BTreeSet::new();
    let mut fn_ = BTreeSet::new();
    let mut matched = vec![false; findings.len()];
    for g in &gt.entries {
        let mut hit = false;
        for (i, f) in findings.iter().enumerate() {
            let same_component =
                g.ecosystem == f.ecosystem && g.component.key() == f.component.key();
            if !same_component {
                continue;
            }
            let mut g_ids: Vec<&VulnId> = g.aliases.iter().collect();
            g_ids.push(&g.vuln);
            let mut f_ids: Vec<&VulnId> = f.aliases.iter().collect();
            f_ids.push(&f.vuln);
            let shared = g_ids.iter().any(|a| f_ids.contains(a));
            let gv = parse_version(g.ecosystem, &g.version.raw).unwrap();
            let exact = g.version.raw == f.version
                || compare(
                    g.ecosystem,
                    &gv,
                    &parse_version(f.ecosystem, &f.version).unwrap(),
                )
                .unwrap()
                    == Ordering::Equal;
            let in_range = f.basis == MatchBasis::Range
                && satisfies(
                    g.ecosystem,
                    &gv,
                    &parse_range(f.ecosystem, f.affected.as_deref().unwrap()).unwrap(),
                )
                .unwrap();
            if shared && (exact || in_range) {
                hit = true;
                matched[i] = true;
            }
        }
        if hit {
            tp.insert(g.key());
        } else {
            fn_.insert(g.key());
        }
    }
    let fp = findings
        .iter()
        .zip(&matched)
        .filter(|(_, m)| !**m)
        .map(|(f, _)| f.key())
        .collect();
    (tp, fn_, fp)
}
