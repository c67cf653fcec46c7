//! Ground-truth construction against the simulated upstream, checked
//! against a direct reading of the dataset.

use std::collections::BTreeMap;
use std::sync::Arc;

use scabench_core::groundtruth::{read_snapshot, write_snapshot, BuildConfig, GroundTruthBuilder};
use scabench_core::model::{canonicalize_component, EcosystemId, EntryKey, VulnId};
use scabench_core::sim::{FakeUpstream, SimDataset};
use scabench_core::transport::Transport;

fn dataset() -> SimDataset {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/upstream.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn config(d: &SimDataset) -> BuildConfig {
    let mut cfg = BuildConfig::default();
    cfg.components.clear();
    for p in &d.packages {
        cfg.components
            .entry(p.ecosystem)
            .or_default()
            .push(p.name.clone());
    }
    cfg.target_entries = [
        (EcosystemId::Maven, 60),
        (EcosystemId::Npm, 25),
        (EcosystemId::NuGet, 8),
        (EcosystemId::PyPI, 100),
    ]
    .into();
    cfg
}

/// Expected keys, read straight off the dataset. Releases there are listed
/// in ascending order and every pre-release carries a `-` or a `b`.
fn oracle(d: &SimDataset, cfg: &BuildConfig) -> Vec<EntryKey> {
    let mut per_eco: BTreeMap<EcosystemId, Vec<EntryKey>> = BTreeMap::new();
    for p in &d.packages {
        let c = canonicalize_component(p.ecosystem, &p.name).unwrap();
        let kept: Vec<&str> = p
            .releases
            .iter()
            .filter(|r| !r.yanked && !r.version.contains('-') && !r.version.contains('b'))
            .map(|r| r.version.as_str())
            .collect();
        let cap = cfg.version_cap;
        let chosen: Vec<&str> = if kept.len() <= cap {
            kept
        } else if p.ecosystem == EcosystemId::NuGet {
            (0..cap).map(|i| kept[i * kept.len() / cap]).collect()
        } else {
            kept[kept.len() - cap..].to_vec()
        };
        for v in chosen {
            for a in d.affecting(&c, v) {
                per_eco.entry(p.ecosystem).or_default().push((
                    p.ecosystem,
                    c.key(),
                    v.to_string(),
                    VulnId::new(a.id.clone()),
                ));
            }
        }
    }
    let mut out = Vec::new();
    for (eco, mut keys) in per_eco {
        keys.sort();
        keys.truncate(cfg.target_for(eco));
        out.extend(keys);
    }
    out.sort();
    out
}

fn build(t: Transport, cfg: &BuildConfig) -> scabench_core::groundtruth::Snapshot {
    GroundTruthBuilder::new(t).build(cfg).unwrap()
}

#[test]
fn build_matches_dataset_oracle() {
    let d = dataset();
    let cfg = config(&d);
    let s = build(
        Transport::with_backend(Arc::new(FakeUpstream::new(d.clone()))),
        &cfg,
    );
    let keys: Vec<EntryKey> = s.entries.iter().map(|e| e.key()).collect();
    assert_eq!(keys, oracle(&d, &cfg));

    let counts = |e| {
        s.stats
            .ecosystems
            .get(&e)
            .map(|x| x.osv_entries)
            .unwrap_or(0)
    };
    assert_eq!(counts(EcosystemId::Npm), 25);
    assert_eq!(counts(EcosystemId::NuGet), 8);
    // Maven holds fewer entries than its target; nothing is padded.
    assert!(counts(EcosystemId::Maven) < 60);

    // Aliases and CVE sets come from the per-id records.
    let req = s
        .entries
        .iter()
        .find(|e| e.vuln.as_str() == "GHSA-j8r2-6x86-q33q")
        .unwrap();
    assert!(req.aliases.contains(&VulnId::new("PYSEC-2023-74")));
    assert_eq!(
        req.cves.iter().map(|c| c.as_str()).collect::<Vec<_>>(),
        ["CVE-2023-32681"]
    );
    assert!(s
        .entries
        .iter()
        .all(|e| e.version.raw != "6.4.1" && e.version.raw != "5.0.1"));
}

#[test]
fn repeated_builds_are_identical() {
    let d = dataset();
    let cfg = config(&d);
    let a = build(
        Transport::with_backend(Arc::new(FakeUpstream::new(d.clone()))),
        &cfg,
    );
    let b = build(
        Transport::with_backend(Arc::new(FakeUpstream::new(d.clone()).with_page_size(1))),
        &cfg,
    );
    assert_eq!(a.digest, b.digest);
    assert_eq!(a.stats, b.stats);
}

#[test]
fn recorded_build_replays_byte_identically() {
    let d = dataset();
    let cfg = config(&d);
    let fixtures = tempfile::tempdir().unwrap();
    let live = build(
        Transport::recording_backend(Arc::new(FakeUpstream::new(d)), fixtures.path()),
        &cfg,
    );
    let replay = Transport::replay(fixtures.path());
    let again = build(replay.clone(), &cfg);
    assert_eq!(replay.backend_calls(), 0);
    assert_eq!(live.digest, again.digest);
    // retrieved_at comes from the recorded clock, so entries match exactly.
    assert_eq!(live.entries, again.entries);

    let out = tempfile::tempdir().unwrap();
    write_snapshot(out.path(), &again).unwrap();
    let loaded = read_snapshot(out.path()).unwrap();
    assert_eq!(loaded.entries, again.entries);
    assert_eq!(loaded.digest, again.digest);
}

#[test]
fn upstream_change_changes_digest() {
    let d = dataset();
    let cfg = config(&d);
    let before = build(
        Transport::with_backend(Arc::new(FakeUpstream::new(d.clone()))),
        &cfg,
    );
    let mut drifted = d.clone();
    let adv = drifted
        .advisories
        .iter_mut()
        .find(|a| a.id == "GHSA-9wx4-h78v-vm56")
        .unwrap();
    adv.affected[0].versions.pop();
    let after = build(
        Transport::with_backend(Arc::new(FakeUpstream::new(drifted))),
        &cfg,
    );
    assert_ne!(before.digest, after.digest);
    assert_eq!(before.entries.len(), after.entries.len() + 1);
}
