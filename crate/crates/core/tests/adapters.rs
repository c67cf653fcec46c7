//! Tool adapters against the simulated scanners, recorded and replayed.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::AtomicUsize;
use std::sync::Arc;

use chrono::Utc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use common::{dataset, sim_snapshot};
use scabench_core::adapters::{
    findings_jsonl, run_adapter, AdapterConfig, AdapterInput, SkipReason,
};
use scabench_core::groundtruth::{BuildConfig, Snapshot};
use scabench_core::model::{
    canonicalize_component, EcosystemId, GroundTruthEntry, MatchBasis, NormalizedFinding, ToolId,
    VersionRef, VulnId,
};
use scabench_core::sbom::emit_sbom;
use scabench_core::sim::{
    daily_releases, SimAdvisory, SimAffected, SimBackend, SimDataset, SimPackage,
};
use scabench_core::transport::{Request, Response, ScriptedBackend, Transport};

use common::tool_config as cfg;

#[test]
fn all_adapters_reconcile_and_replay_identically() {
    let d = dataset();
    let snap = sim_snapshot(&d);
    let sbom = emit_sbom(&snap).unwrap();
    let input = AdapterInput {
        snapshot: &snap,
        sbom: &sbom,
    };

    for tool in ToolId::EVALUATED {
        let dir = tempfile::tempdir().unwrap();
        let backend = Arc::new(SimBackend::new(d.clone()));
        let rec = Transport::recording_backend(backend.clone(), dir.path());
        let live = run_adapter(tool, input, &cfg(tool), &rec).unwrap();
        let a = &live.accounting;
        assert!(a.reconciles(), "{tool}: {a:?}");
        assert!(a.raw > 0 && a.normalized > 0, "{tool}: {a:?}");
        assert_eq!(live.skips.len(), a.skipped_total());
        assert!(!live.raw_artifacts.is_empty());
        assert!(live.findings.iter().all(|f| f.tool == tool));

        let replay = Transport::replay(dir.path());
        let again = run_adapter(tool, input, &cfg(tool), &replay).unwrap();
        assert_eq!(replay.backend_calls(), 0, "{tool}");
        assert_eq!(again.result_hash, live.result_hash, "{tool}");
        assert_eq!(again.findings, live.findings, "{tool}");
        assert_eq!(again.raw_artifacts, live.raw_artifacts, "{tool}");
        assert_eq!(again.accounting, live.accounting, "{tool}");

        let skipped = |r: SkipReason| a.skipped.get(&r).copied().unwrap_or(0);
        match tool {
            ToolId::Dtrack => {
                assert_eq!(skipped(SkipReason::UnsupportedEcosystem), 1);
                assert_eq!(backend.scanners.count("/api/v1/bom/token/"), 2);
            }
            ToolId::Trivy => {
                assert_eq!(skipped(SkipReason::UnsupportedEcosystem), 1);
                assert!(live.findings.iter().any(|f| f.basis == MatchBasis::Range));
            }
            ToolId::Snyk => {
                let npm_rows = live
                    .findings
                    .iter()
                    .filter(|f| f.ecosystem == EcosystemId::Npm)
                    .count();
                assert_eq!(skipped(SkipReason::Duplicate), npm_rows);
            }
            ToolId::Github => assert!(skipped(SkipReason::NotAffected) > 0),
            ToolId::OssIndex => {
                assert!(live.findings.iter().all(|f| f.vuln.is_cve()));
                assert_eq!(backend.scanners.count("component-report"), 1);
            }
            _ => unreachable!(),
        }
        // Every finding names an input tuple.
        assert_eq!(live.out_of_input(), 0, "{tool}");
    }
}

/// 430 distinct npm coordinates, a CVE on every seventh.
fn wide_fixture() -> (SimDataset, Snapshot) {
    let start = Utc::now();
    let mut d = SimDataset::default();
    let mut entries = Vec::new();
    for i in 0..430 {
        let name = format!("pkg-{i:03}");
        let version = format!("1.0.{}", i % 5);
        d.packages.push(SimPackage {
            ecosystem: EcosystemId::Npm,
            name: name.clone(),
            releases: daily_releases(&[version.as_str()], start),
        });
        let id = format!("GHSA-{i:04}-aaaa-bbbb");
        let cve = format!("CVE-2024-{:05}", 10000 + i);
        if i % 7 == 0 {
            d.advisories.push(SimAdvisory {
                id: id.clone(),
                aliases: vec![cve.clone()],
                modified: None,
                affected: vec![SimAffected {
                    ecosystem: EcosystemId::Npm,
                    name: name.clone(),
                    versions: vec![version.clone()],
                }],
            });
        }
        let c = canonicalize_component(EcosystemId::Npm, &name).unwrap();
        entries.push(GroundTruthEntry::new(
            c,
            VersionRef::new(version),
            VulnId::new(id),
            [VulnId::new(cve)].into(),
            start,
        ));
    }
    (
        d,
        Snapshot::from_entries(entries, BuildConfig::default(), start),
    )
}

#[test]
fn oss_index_batches_match_per_item_oracle() {
    let (d, snap) = wide_fixture();
    assert_eq!(snap.component_versions().len(), 430);
    let sbom = emit_sbom(&snap).unwrap();
    let input = AdapterInput {
        snapshot: &snap,
        sbom: &sbom,
    };

    let backend = Arc::new(SimBackend::new(d.clone()));
    let t = Transport::with_backend(backend.clone());
    let batched = run_adapter(ToolId::OssIndex, input, &cfg(ToolId::OssIndex), &t).unwrap();
    assert_eq!(backend.scanners.count("component-report"), 4);

    let single = Arc::new(SimBackend::new(d.clone()));
    let mut one = cfg(ToolId::OssIndex);
    one.batch_size = Some(1);
    let per_item = run_adapter(
        ToolId::OssIndex,
        input,
        &one,
        &Transport::with_backend(single.clone()),
    )
    .unwrap();
    assert_eq!(single.scanners.count("component-report"), 430);
    assert_eq!(batched.findings, per_item.findings);
    assert_eq!(batched.result_hash, per_item.result_hash);

    // And the union is exactly the CVE-backed dataset rows.
    let want: BTreeSet<(String, String, String)> = d
        .advisories
        .iter()
        .map(|a| {
            (
                a.affected[0].name.clone(),
                a.affected[0].versions[0].clone(),
                a.aliases[0].clone(),
            )
        })
        .collect();
    let got: BTreeSet<(String, String, String)> = batched
        .findings
        .iter()
        .map(|f| {
            (
                f.component.name.clone(),
                f.version.clone(),
                f.vuln.to_string(),
            )
        })
        .collect();
    assert_eq!(got.len(), 62);
    assert_eq!(got, want);

    // Over the service limit the fake rejects the batch, and retries do not help.
    let mut big = cfg(ToolId::OssIndex);
    big.batch_size = Some(200);
    big.retry = 2;
    let err = run_adapter(
        ToolId::OssIndex,
        input,
        &big,
        &Transport::with_backend(Arc::new(SimBackend::new(d))),
    )
    .unwrap_err();
    assert_eq!(err.kind(), "execution");
}

#[test]
fn trivy_fixed_version_becomes_range_finding() {
    let start = Utc::now();
    let d = SimDataset {
        packages: vec![SimPackage {
            ecosystem: EcosystemId::Npm,
            name: "x".into(),
            releases: daily_releases(&["1.4.0", "1.4.1", "1.4.2"], start),
        }],
        advisories: vec![SimAdvisory {
            id: "GHSA-xxxx-yyyy-zzzz".into(),
            aliases: vec!["CVE-2024-0001".into()],
            modified: None,
            affected: vec![SimAffected {
                ecosystem: EcosystemId::Npm,
                name: "x".into(),
                versions: vec!["1.4.0".into(), "1.4.1".into()],
            }],
        }],
    };
    let c = canonicalize_component(EcosystemId::Npm, "x").unwrap();
    let snap = Snapshot::from_entries(
        vec![GroundTruthEntry::new(
            c,
            VersionRef::new("1.4.0"),
            VulnId::new("GHSA-xxxx-yyyy-zzzz"),
            [VulnId::new("CVE-2024-0001")].into(),
            start,
        )],
        BuildConfig::default(),
        start,
    );
    let sbom = emit_sbom(&snap).unwrap();
    let r = run_adapter(
        ToolId::Trivy,
        AdapterInput {
            snapshot: &snap,
            sbom: &sbom,
        },
        &cfg(ToolId::Trivy),
        &Transport::with_backend(Arc::new(SimBackend::new(d))),
    )
    .unwrap();
    assert_eq!(r.findings.len(), 1);
    let f = &r.findings[0];
    assert_eq!(f.basis, MatchBasis::Range);
    assert_eq!(f.affected.as_deref(), Some("<1.4.2"));
    assert_eq!(f.version, "1.4.0");
    assert_eq!(
        f.identifiers(),
        [
            VulnId::new("CVE-2024-0001"),
            VulnId::new("GHSA-xxxx-yyyy-zzzz")
        ]
        .into()
    );
}

/// Integer-tuple comparison for plain `X.Y.Z` versions.
fn tuple(v: &str) -> (u32, u32, u32) {
    let p: Vec<u32> = v.split('.').map(|x| x.parse().unwrap()).collect();
    (p[0], p[1], p[2])
}

fn oracle_satisfies(v: &str, range: &str) -> bool {
    range.split(',').all(|clause| {
        let clause = clause.trim();
        let (op, rest) = ["<=", ">=", "<", ">", "="]
            .iter()
            .find_map(|op| clause.strip_prefix(op).map(|r| (*op, r.trim())))
            .unwrap();
        let (a, b) = (tuple(v), tuple(rest));
        match op {
            "<=" => a <= b,
            ">=" => a >= b,
            "<" => a < b,
            ">" => a > b,
            _ => a == b,
        }
    })
}

#[test]
fn github_reports_iff_version_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x61_7468);
    let start = Utc::now();
    for round in 0..40 {
        let ver = |rng: &mut ChaCha8Rng| {
            format!(
                "{}.{}.{}",
                rng.random_range(0..3),
                rng.random_range(0..4),
                rng.random_range(0..4)
            )
        };
        let mut entries = Vec::new();
        let mut advisories: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
        for p in 0..3 {
            let name = format!("p{p}");
            let c = canonicalize_component(EcosystemId::Npm, &name).unwrap();
            for _ in 0..rng.random_range(1..5) {
                entries.push(GroundTruthEntry::new(
                    c.clone(),
                    VersionRef::new(ver(&mut rng)),
                    VulnId::new("GHSA-0000-0000-0000"),
                    BTreeSet::new(),
                    start,
                ));
            }
            let ranges = (0..rng.random_range(0..6))
                .map(|k| {
                    let ops = ["<", "<=", ">", ">=", "="];
                    let n = rng.random_range(1..3);
                    let clauses: Vec<String> = (0..n)
                        .map(|_| format!("{} {}", ops[rng.random_range(0..5)], ver(&mut rng)))
                        .collect();
                    (format!("GHSA-{round:04}-{p:04}-{k:04}"), clauses.join(", "))
                })
                .collect();
            advisories.insert(name, ranges);
        }
        let snap = Snapshot::from_entries(entries, BuildConfig::default(), start);

        let table = advisories.clone();
        let backend = ScriptedBackend::new(move |_, req: &Request| {
            let body: Value = serde_json::from_slice(req.body.as_deref().unwrap()).unwrap();
            let pkg = body["variables"]["package"].as_str().unwrap();
            let nodes: Vec<Value> = table[pkg]
                .iter()
                .map(|(id, range)| json!({
                    "advisory": { "ghsaId": id, "withdrawnAt": null, "identifiers": [{ "type": "GHSA", "value": id }] },
                    "vulnerableVersionRange": range,
                }))
                .collect();
            Ok(Response::json(
                200,
                &json!({ "data": { "securityVulnerabilities": {
                "nodes": nodes, "pageInfo": { "hasNextPage": false, "endCursor": null } } } }),
            ))
        });
        let sbom = emit_sbom(&snap).unwrap();
        let r = run_adapter(
            ToolId::Github,
            AdapterInput {
                snapshot: &snap,
                sbom: &sbom,
            },
            &cfg(ToolId::Github),
            &Transport::with_backend(Arc::new(backend)),
        )
        .unwrap();
        assert!(r.accounting.reconciles());

        let mut want = BTreeSet::new();
        for (c, v) in snap.component_versions() {
            for (id, range) in &advisories[&c.name] {
                if oracle_satisfies(&v.raw, range) {
                    want.insert((c.name.clone(), v.raw.clone(), id.clone()));
                }
            }
        }
        let got: BTreeSet<_> = r
            .findings
            .iter()
            .map(|f| {
                (
                    f.component.name.clone(),
                    f.version.clone(),
                    f.vuln.to_string(),
                )
            })
            .collect();
        assert_eq!(got, want, "round {round}");
        assert!(r.findings.iter().all(|f| f.basis == MatchBasis::Exact));
    }
}

fn finding(tool: ToolId, name: &str, v: &str, id: &str) -> NormalizedFinding {
    NormalizedFinding {
        tool,
        ecosystem: EcosystemId::Npm,
        component: canonicalize_component(EcosystemId::Npm, name).unwrap(),
        version: v.into(),
        vuln: VulnId::new(id),
        aliases: BTreeSet::new(),
        basis: MatchBasis::Exact,
        affected: None,
        out_of_input: false,
    }
}

#[test]
fn replay_adapter_returns_file_findings() {
    let d = dataset();
    let snap = sim_snapshot(&d);
    let vite = snap
        .entries
        .iter()
        .find(|e| e.component.name == "vite")
        .unwrap();
    let rows = vec![
        finding(
            ToolId::Replay,
            "vite",
            &vite.version.raw,
            vite.vuln.as_str(),
        ),
        finding(ToolId::Replay, "left-pad", "1.3.0", "GHSA-aaaa-bbbb-cccc"),
    ];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("findings.jsonl");
    let text = findings_jsonl(&rows).unwrap() + "not json\n";
    std::fs::write(&path, text).unwrap();

    let mut c = AdapterConfig::new(ToolId::Snyk);
    c.replay_findings = Some(path.clone());
    let t = Transport::replay(dir.path().join("no-fixtures"));
    let input = AdapterInput {
        snapshot: &snap,
        sbom: b"",
    };
    // The clock is the only transport use; give it a recorded reading.
    let clock_dir = tempfile::tempdir().unwrap();
    Transport::record(clock_dir.path(), std::time::Duration::from_secs(1))
        .now()
        .unwrap();
    assert_eq!(
        run_adapter(ToolId::Snyk, input, &c, &t).unwrap_err().kind(),
        "fixture_miss"
    );
    let t = Transport::replay(clock_dir.path());

    let a = run_adapter(ToolId::Snyk, input, &c, &t).unwrap();
    let b = run_adapter(ToolId::Snyk, input, &c, &t).unwrap();
    assert_eq!(a.result_hash, b.result_hash);
    assert_eq!(a.findings.len(), 2);
    assert!(a.findings.iter().all(|f| f.tool == ToolId::Snyk));
    assert_eq!(a.accounting.raw, 3);
    assert_eq!(a.accounting.skipped.get(&SkipReason::Malformed), Some(&1));
    let flagged: Vec<&str> = a
        .findings
        .iter()
        .filter(|f| f.out_of_input)
        .map(|f| f.component.name.as_str())
        .collect();
    assert_eq!(flagged, ["left-pad"]);
}

#[test]
fn sbom_must_belong_to_snapshot() {
    let d = dataset();
    let snap = sim_snapshot(&d);
    let (_, other) = wide_fixture();
    let sbom = emit_sbom(&other).unwrap();
    let err = run_adapter(
        ToolId::Trivy,
        AdapterInput {
            snapshot: &snap,
            sbom: &sbom,
        },
        &cfg(ToolId::Trivy),
        &common::sim_transport(&d),
    )
    .unwrap_err();
    assert_eq!(err.kind(), "usage");
}

#[test]
fn execution_failures_are_retried_up_to_the_limit() {
    let d = dataset();
    let snap = sim_snapshot(&d);
    let sbom = emit_sbom(&snap).unwrap();
    let input = AdapterInput {
        snapshot: &snap,
        sbom: &sbom,
    };
    let flaky = |n| {
        Transport::with_backend(Arc::new(common::Flaky {
            inner: SimBackend::new(d.clone()),
            failures: AtomicUsize::new(n),
        }))
    };
    let ok = run_adapter(ToolId::Snyk, input, &cfg(ToolId::Snyk), &flaky(2)).unwrap();
    assert_eq!(ok.attempts, 3);
    let err = run_adapter(ToolId::Snyk, input, &cfg(ToolId::Snyk), &flaky(3)).unwrap_err();
    assert_eq!(err.kind(), "execution");
    assert!(err.to_string().contains("authentication failed"));
}

#[test]
fn config_rejects_bad_values() {
    let mut c = AdapterConfig::new(ToolId::Github);
    c.validate().unwrap();
    c.timeout_secs = 0;
    assert_eq!(c.validate().unwrap_err().kind(), "config");
    let mut c = AdapterConfig::new(ToolId::Github);
    c.retry = 0;
    assert_eq!(c.validate().unwrap_err().kind(), "config");
    let mut c = AdapterConfig::new(ToolId::Github);
    c.credentials
        .insert("token".into(), "ghp_abc123secret".into());
    assert_eq!(c.validate().unwrap_err().kind(), "config");
    assert_eq!(AdapterConfig::new(ToolId::OssIndex).batch_size, Some(128));
    assert_eq!(AdapterConfig::new(ToolId::Trivy).retry, 3);
    assert_eq!(AdapterConfig::new(ToolId::Trivy).timeout_secs, 180);

    let d = dataset();
    let snap = sim_snapshot(&d);
    let sbom = emit_sbom(&snap).unwrap();
    let err = run_adapter(
        ToolId::Trivy,
        AdapterInput {
            snapshot: &snap,
            sbom: &sbom,
        },
        &AdapterConfig::new(ToolId::Snyk),
        &common::sim_transport(&d),
    )
    .unwrap_err();
    assert_eq!(err.kind(), "usage");

    let mut unset = AdapterConfig::new(ToolId::Github);
    unset
        .credentials
        .insert("token".into(), "SCABENCH_TEST_UNSET_TOKEN".into());
    let err = run_adapter(
        ToolId::Github,
        AdapterInput {
            snapshot: &snap,
            sbom: &sbom,
        },
        &unset,
        &common::sim_transport(&d),
    )
    .unwrap_err();
    assert_eq!(err.kind(), "config");
    assert!(err.to_string().contains("SCABENCH_TEST_UNSET_TOKEN"));
}
