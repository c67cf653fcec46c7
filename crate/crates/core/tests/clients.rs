use std::collections::BTreeSet;
use std::sync::Arc;

use scabench_core::clients::{OsvClient, RegistryClient};
use scabench_core::model::{canonicalize_component, ComponentRef, EcosystemId, VersionRef};
use scabench_core::sim::{FakeUpstream, SimAdvisory, SimAffected, SimDataset, SimPackage};
use scabench_core::transport::Transport;

fn dataset() -> SimDataset {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/upstream.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn comp(e: EcosystemId, n: &str) -> ComponentRef {
    canonicalize_component(e, n).unwrap()
}

fn upstream(page_size: usize) -> (Arc<FakeUpstream>, Transport) {
    let fake = Arc::new(FakeUpstream::new(dataset()).with_page_size(page_size));
    let t = Transport::with_backend(fake.clone());
    (fake, t)
}

/// Every (component, version) the dataset lists.
fn all_items(d: &SimDataset) -> Vec<(ComponentRef, VersionRef)> {
    d.packages
        .iter()
        .flat_map(|p| {
            p.releases.iter().map(move |r| {
                (
                    comp(p.ecosystem, &p.name),
                    VersionRef::new(r.version.clone()),
                )
            })
        })
        .collect()
}

#[test]
fn pagination_is_followed() {
    let (fake, t) = upstream(2);
    let osv = OsvClient::new(t);
    let vite = comp(EcosystemId::Npm, "vite");
    let got = osv
        .query_batch(&[(vite.clone(), VersionRef::new("0.1.12"))])
        .unwrap();
    let ids: Vec<&str> = got[0].vulns.iter().map(|v| v.id.as_str()).collect();
    assert_eq!(ids.len(), 6);
    // Six vulns at two per page: one initial query and two follow-ups.
    assert_eq!(fake.count("/v1/querybatch"), 3);
    let one = osv.query_one(&vite, &VersionRef::new("0.1.12")).unwrap();
    assert_eq!(one.iter().map(|v| v.id.as_str()).collect::<Vec<_>>(), ids);
    assert_eq!(fake.count("/v1/query"), 3 + 3);
}

#[test]
fn large_batches_split_into_sub_batches() {
    let (fake, t) = upstream(1000);
    let osv = OsvClient::new(t);
    let d = dataset();
    let base = all_items(&d);
    let items: Vec<_> = base.iter().cycle().take(300).cloned().collect();
    let got = osv.query_batch(&items).unwrap();
    assert_eq!(got.len(), 300);
    assert_eq!(fake.count("/v1/querybatch"), 3);
    for (r, (c, v)) in got.iter().zip(&items) {
        assert_eq!((&r.component, &r.version.raw), (c, &v.raw));
    }
    // Each distinct id is fetched once for its aliases.
    let distinct: BTreeSet<String> = got
        .iter()
        .flat_map(|r| r.vulns.iter().map(|v| v.id.to_string()))
        .collect();
    assert_eq!(fake.count("/v1/vulns/"), distinct.len());
}

#[test]
fn batch_equals_per_item_queries() {
    let (_, t) = upstream(3);
    let osv = OsvClient::new(t);
    let items: Vec<_> = all_items(&dataset())
        .into_iter()
        .step_by(6)
        .take(20)
        .collect();
    assert_eq!(items.len(), 20);
    let batch = osv.query_batch(&items).unwrap();
    let mut nonempty = 0;
    for (r, (c, v)) in batch.iter().zip(&items) {
        let single = osv.query_one(c, v).unwrap();
        assert_eq!(r.vulns, single, "{c}@{}", v.raw);
        nonempty += usize::from(!single.is_empty());
    }
    assert!(nonempty >= 5);
}

#[test]
fn aliases_come_from_vuln_records() {
    let (_, t) = upstream(100);
    let osv = OsvClient::new(t);
    let rec = osv.get_vuln("GHSA-j8r2-6x86-q33q").unwrap();
    let aliases: Vec<&str> = rec.aliases.iter().map(|a| a.as_str()).collect();
    assert_eq!(aliases, ["CVE-2023-32681", "PYSEC-2023-74"]);
    assert_eq!(
        osv.get_vuln("GHSA-0000-0000-0000").unwrap_err().kind(),
        "not_found"
    );
}

#[test]
fn empty_batch_is_usage_error() {
    let (_, t) = upstream(100);
    assert_eq!(
        OsvClient::new(t).query_batch(&[]).unwrap_err().kind(),
        "usage"
    );
}

#[test]
fn registry_listings_per_ecosystem() {
    let (fake, t) = upstream(100);
    let reg = RegistryClient::new(t);

    let vite = reg.list_versions(&comp(EcosystemId::Npm, "vite")).unwrap();
    assert_eq!(vite.len(), 14);
    assert_eq!(vite.last().unwrap().version.raw, "1.0.0-beta.1");
    assert!(vite.last().unwrap().version.prerelease);
    assert_eq!(vite[2].version.raw, "0.1.2");
    assert!(vite.iter().all(|r| r.version.released_at.is_some()));

    let babel = reg
        .list_versions(&comp(EcosystemId::Npm, "@babel/traverse"))
        .unwrap();
    assert_eq!(babel.len(), 5);

    let tornado = reg
        .list_versions(&comp(EcosystemId::PyPI, "Tornado"))
        .unwrap();
    let raws: Vec<&str> = tornado.iter().map(|r| r.version.raw.as_str()).collect();
    assert_eq!(raws, ["6.3", "6.3.1", "6.3.2", "6.4", "6.4.1", "6.5b1"]);
    assert!(tornado[4].yanked);
    assert!(tornado[5].version.prerelease);

    let spring = reg
        .list_versions(&comp(
            EcosystemId::Maven,
            "org.springframework:spring-expression",
        ))
        .unwrap();
    assert_eq!(spring.len(), 11);
    assert!(spring.iter().all(|r| r.version.released_at.is_some()));
    assert_eq!(spring.last().unwrap().version.raw, "5.3.20");

    let nj = reg
        .list_versions(&comp(EcosystemId::NuGet, "newtonsoft.json"))
        .unwrap();
    assert_eq!(nj.len(), 70);
    assert_eq!(nj.last().unwrap().version.raw, "9.0.70");
    assert!(fake.count("/page/") >= 2);

    let enc = reg
        .list_versions(&comp(EcosystemId::NuGet, "System.Text.Encodings.Web"))
        .unwrap();
    let unlisted: Vec<_> = enc.iter().filter(|r| r.yanked).collect();
    assert_eq!(unlisted.len(), 1);
    assert_eq!(unlisted[0].version.raw, "5.0.1");
    assert_eq!(unlisted[0].version.released_at, None);

    let missing = reg
        .list_versions(&comp(EcosystemId::PyPI, "no-such-package"))
        .unwrap_err();
    assert_eq!(missing.kind(), "not_found");
}

#[test]
fn record_then_replay_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let fake = Arc::new(FakeUpstream::new(dataset()).with_page_size(2));
    let rec = Transport::recording_backend(fake, dir.path());
    let items: Vec<_> = all_items(&dataset()).into_iter().step_by(4).collect();
    let live = OsvClient::new(rec.clone()).query_batch(&items).unwrap();
    let live_versions = RegistryClient::new(rec)
        .list_versions(&comp(EcosystemId::NuGet, "Newtonsoft.Json"))
        .unwrap();

    let replay = Transport::replay(dir.path());
    let again = OsvClient::new(replay.clone()).query_batch(&items).unwrap();
    let again_versions = RegistryClient::new(replay.clone())
        .list_versions(&comp(EcosystemId::NuGet, "Newtonsoft.Json"))
        .unwrap();
    assert_eq!(live, again);
    assert_eq!(live_versions, again_versions);
    assert_eq!(replay.backend_calls(), 0);

    // Anything not recorded is a miss, never a network call.
    let miss = OsvClient::new(replay)
        .query_one(
            &comp(EcosystemId::Npm, "left-pad"),
            &VersionRef::new("1.0.0"),
        )
        .unwrap_err();
    assert_eq!(miss.kind(), "fixture_miss");
}

#[test]
fn dataset_roundtrips_through_json() {
    let d = SimDataset {
        packages: vec![SimPackage {
            ecosystem: EcosystemId::PyPI,
            name: "x".into(),
            releases: vec![],
        }],
        advisories: vec![SimAdvisory {
            id: "PYSEC-1".into(),
            aliases: vec![],
            modified: None,
            affected: vec![SimAffected {
                ecosystem: EcosystemId::PyPI,
                name: "x".into(),
                versions: vec!["1.0".into()],
            }],
        }],
    };
    let back: SimDataset = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
    assert_eq!(back, d);
}
