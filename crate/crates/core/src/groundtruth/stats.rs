//! Per-ecosystem dataset statistics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{EcosystemId, GroundTruthEntry, VulnId};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencyStats {
    pub max: usize,
    pub avg: f64,
    pub min: usize,
    pub median: f64,
}

impl FrequencyStats {
    fn of(mut counts: Vec<usize>) -> Self {
        if counts.is_empty() {
            return Self::default();
        }
        counts.sort_unstable();
        let n = counts.len();
        let median = if n % 2 == 1 {
            counts[n / 2] as f64
        } else {
            (counts[n / 2 - 1] + counts[n / 2]) as f64 / 2.0
        };
        FrequencyStats {
            max: counts[n - 1],
            avg: counts.iter().sum::<usize>() as f64 / n as f64,
            min: counts[0],
            median,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EcosystemStats {
    pub unique_components: usize,
    pub osv_entries: usize,
    pub cve_backed_findings: usize,
    pub distinct_cves: usize,
    pub comp_per_osv: f64,
    pub cvef_per_osv: f64,
    /// Percent of all entries.
    pub v_share: f64,
    /// Percent of all unique components.
    pub c_share: f64,
    /// Entries per component.
    pub component_frequency: FrequencyStats,
    /// Entries per (component, version).
    pub component_version_frequency: FrequencyStats,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SnapshotStats {
    pub ecosystems: BTreeMap<EcosystemId, EcosystemStats>,
    /// Sums across ecosystems; `distinct_cves` is the per-ecosystem sum.
    pub total: EcosystemStats,
    /// CVE identifiers distinct across the whole snapshot.
    pub global_distinct_cves: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn block(entries: &[&GroundTruthEntry]) -> EcosystemStats {
    let mut per_component: BTreeMap<(EcosystemId, String), usize> = BTreeMap::new();
    let mut per_cv: BTreeMap<(EcosystemId, String, String), usize> = BTreeMap::new();
    let mut cves: BTreeSet<&VulnId> = BTreeSet::new();
    let mut cve_backed = 0;
    for e in entries {
        *per_component
            .entry((e.ecosystem, e.component.key()))
            .or_default() += 1;
        *per_cv
            .entry((e.ecosystem, e.component.key(), e.version.raw.clone()))
            .or_default() += 1;
        if e.is_cve_backed() {
            cve_backed += 1;
        }
        cves.extend(e.cves.iter());
    }
    EcosystemStats {
        unique_components: per_component.len(),
        osv_entries: entries.len(),
        cve_backed_findings: cve_backed,
        distinct_cves: cves.len(),
        comp_per_osv: ratio(per_component.len(), entries.len()),
        cvef_per_osv: ratio(cve_backed, entries.len()),
        v_share: 0.0,
        c_share: 0.0,
        component_frequency: FrequencyStats::of(per_component.into_values().collect()),
        component_version_frequency: FrequencyStats::of(per_cv.into_values().collect()),
    }
}

pub fn compute_stats(entries: &[GroundTruthEntry]) -> SnapshotStats {
    let all: Vec<&GroundTruthEntry> = entries.iter().collect();
    let mut total = block(&all);
    let mut ecosystems = BTreeMap::new();
    for eco in EcosystemId::ALL {
        let subset: Vec<&GroundTruthEntry> =
            entries.iter().filter(|e| e.ecosystem == eco).collect();
        if subset.is_empty() {
            continue;
        }
        let mut s = block(&subset);
        s.v_share = 100.0 * ratio(s.osv_entries, total.osv_entries);
        s.c_share = 100.0 * ratio(s.unique_components, total.unique_components);
        ecosystems.insert(eco, s);
    }
    let global_distinct_cves = total.distinct_cves;
    total.distinct_cves = ecosystems.values().map(|s| s.distinct_cves).sum();
    if total.osv_entries > 0 {
        total.v_share = 100.0;
        total.c_share = 100.0;
    }
    SnapshotStats {
        ecosystems,
        total,
        global_distinct_cves,
    }
}
