//! Regenerates the fixture corpus under `fixtures/`.
//!
//! * `reference/gt-2026-03-28`, `reference/gt-2026-04-10`: synthetic snapshots whose
//!   per-ecosystem statistics and differences have the published shape.
//! * `reference/findings-<date>/<tool>.jsonl`: per-tool findings producing the
//!   published TP/FP/FN counts against those snapshots.
//! * `replay/`: transport fixtures recorded against the simulated upstream
//!   and scanners (`upstream.json`), for `--replay` runs.
//!
//! Run with `cargo run -p scabench-core --example seed_fixtures`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, TimeZone, Utc};
use scabench_core::adapters::{findings_jsonl, run_adapter, AdapterConfig, AdapterInput};
use scabench_core::groundtruth::{build_snapshot, write_snapshot, BuildConfig, Snapshot};
use scabench_core::model::{
    canonicalize_component, EcosystemId, GroundTruthEntry, MatchBasis, NormalizedFinding, ToolId,
    VersionRef, VulnId,
};
use scabench_core::sbom::emit_sbom;
use scabench_core::sim::{SimBackend, SimDataset};
use scabench_core::transport::Transport;

use EcosystemId::{Maven, Npm, NuGet, PyPI};

/// (components, entries, CVE-backed, distinct CVEs) per ecosystem.
const SHAPE: [(EcosystemId, usize, usize, usize, usize); 4] = [
    (Maven, 99, 250, 240, 42),
    (Npm, 66, 250, 231, 19),
    (NuGet, 189, 250, 250, 36),
    (PyPI, 76, 250, 203, 92),
];

/// (tool, ecosystem, TP, FP, FN) at the first and second time point.
type Row = (ToolId, EcosystemId, [usize; 3], [usize; 3]);
const COUNTS: [Row; 20] = [
    (ToolId::Dtrack, Maven, [250, 193, 0], [250, 193, 0]),
    (ToolId::Dtrack, Npm, [250, 40, 0], [250, 60, 0]),
    (ToolId::Dtrack, NuGet, [235, 0, 15], [235, 0, 15]),
    (ToolId::Dtrack, PyPI, [172, 89, 78], [173, 97, 77]),
    (ToolId::Github, Maven, [233, 375, 17], [233, 375, 17]),
    (ToolId::Github, Npm, [250, 133, 0], [250, 193, 0]),
    (ToolId::Github, NuGet, [250, 103, 0], [250, 103, 0]),
    (ToolId::Github, PyPI, [215, 320, 35], [216, 304, 34]),
    (ToolId::OssIndex, Maven, [136, 52, 114], [136, 52, 114]),
    (ToolId::OssIndex, Npm, [79, 1, 171], [99, 1, 151]),
    (ToolId::OssIndex, NuGet, [204, 12, 46], [204, 7, 46]),
    (ToolId::OssIndex, PyPI, [195, 172, 55], [197, 180, 53]),
    (ToolId::Snyk, Maven, [204, 314, 46], [204, 314, 46]),
    (ToolId::Snyk, Npm, [211, 60, 39], [211, 80, 39]),
    (ToolId::Snyk, NuGet, [250, 3, 0], [250, 3, 0]),
    (ToolId::Snyk, PyPI, [237, 119, 13], [240, 142, 10]),
    (ToolId::Trivy, Maven, [240, 193, 10], [250, 193, 0]),
    (ToolId::Trivy, Npm, [250, 40, 0], [250, 60, 0]),
    (ToolId::Trivy, NuGet, [237, 3, 13], [237, 3, 13]),
    (ToolId::Trivy, PyPI, [234, 90, 16], [241, 100, 9]),
];

const ALPHABET: &[u8] = b"23456789cfghjmpqrvwx";

fn ghsa(n: usize) -> String {
    let mut s = String::new();
    let mut x = n * 7919 + 104729;
    for i in 0..12 {
        if i > 0 && i % 4 == 0 {
            s.push('-');
        }
        s.push(ALPHABET[x % ALPHABET.len()] as char);
        x /= ALPHABET.len();
        x += i * 31 + n;
    }
    format!("GHSA-{s}")
}

fn component_name(e: EcosystemId, i: usize) -> String {
    match e {
        Maven => format!("org.example.m{:02}:lib-{i:03}", i % 17),
        Npm => format!("pkg-{i:03}"),
        NuGet => format!("Example.Package{i:03}"),
        PyPI => format!("py-pkg-{i:03}"),
        _ => unreachable!(),
    }
}

fn cve(e: EcosystemId, k: usize) -> String {
    let base = match e {
        Maven => 10000,
        Npm => 20000,
        NuGet => 30000,
        PyPI => 40000,
        _ => unreachable!(),
    };
    format!("CVE-2025-{}", base + k)
}

/// Present in both npm and PyPI on the first date.
const SHARED_CVE: &str = "CVE-2025-99999";

struct Ids(usize);

impl Ids {
    fn next(&mut self) -> String {
        self.0 += 1;
        ghsa(self.0)
    }
}

fn entry(
    e: EcosystemId,
    comp: usize,
    vuln: String,
    cve: Option<&str>,
    at: DateTime<Utc>,
) -> GroundTruthEntry {
    let c = canonicalize_component(e, &component_name(e, comp)).unwrap();
    let aliases: BTreeSet<VulnId> = cve.map(VulnId::new).into_iter().collect();
    GroundTruthEntry::new(c, VersionRef::new("1.0.0"), VulnId::new(vuln), aliases, at)
}

fn first_snapshot(ids: &mut Ids, at: DateTime<Utc>) -> Vec<GroundTruthEntry> {
    let mut out = Vec::new();
    for (e, comps, n, cvef, cves) in SHAPE {
        for j in 0..n {
            let cve_id = match e {
                // One npm CVE slot is the shared identifier.
                Npm if j < cvef && j % cves == cves - 1 => Some(SHARED_CVE.to_string()),
                // The last CVE-backed PyPI entry alone carries the shared CVE.
                PyPI if j == cvef - 1 => Some(SHARED_CVE.to_string()),
                PyPI if j < cvef => Some(cve(e, j % (cves - 1))),
                _ if j < cvef => Some(cve(e, j % cves)),
                _ => None,
            };
            let vuln = if e == PyPI && cve_id.is_none() {
                format!("PYSEC-2025-{}", 100 + j)
            } else {
                ids.next()
            };
            out.push(entry(e, j % comps, vuln, cve_id.as_deref(), at));
        }
    }
    out
}

/// npm: 20 advisory substitutions on the same component versions.
/// PyPI: 12 out, 12 in; two more CVE-backed findings, the shared CVE leaves
/// PyPI and two new CVEs arrive.
fn second_snapshot(
    first: &[GroundTruthEntry],
    ids: &mut Ids,
    at: DateTime<Utc>,
) -> Vec<GroundTruthEntry> {
    let npm: Vec<&GroundTruthEntry> = first.iter().filter(|g| g.ecosystem == Npm).collect();
    let pypi: Vec<&GroundTruthEntry> = first.iter().filter(|g| g.ecosystem == PyPI).collect();
    let shared = VulnId::new(SHARED_CVE);

    let mut drop: BTreeSet<_> = BTreeSet::new();
    let mut add = Vec::new();
    for g in npm
        .iter()
        .filter(|g| !g.cves.contains(&shared))
        .step_by(7)
        .take(20)
    {
        drop.insert(g.key());
        let mut n = (*g).clone();
        n.vuln = VulnId::new(ids.next());
        n.retrieved_at = at;
        add.push(n);
    }
    // CVE-backed PyPI entries whose CVE is carried by another entry too.
    let mut seen = std::collections::BTreeMap::new();
    for g in &pypi {
        for c in &g.cves {
            *seen.entry(c.clone()).or_insert(0) += 1;
        }
    }
    let removable: Vec<&&GroundTruthEntry> = pypi
        .iter()
        .filter(|g| g.cves.iter().next().is_some_and(|c| seen[c] > 1))
        .step_by(11)
        .take(9)
        .collect();
    for g in removable {
        drop.insert(g.key());
    }
    drop.insert(
        pypi.iter()
            .find(|g| g.cves.contains(&shared))
            .unwrap()
            .key(),
    );
    for g in pypi.iter().filter(|g| g.cves.is_empty()).take(2) {
        drop.insert(g.key());
    }
    for k in 0..12 {
        let c = match k {
            0 => cve(PyPI, 500),
            1 => cve(PyPI, 501),
            _ => cve(PyPI, 20 + k),
        };
        add.push(entry(PyPI, (k * 5) % 76, ids.next(), Some(&c), at));
    }
    first
        .iter()
        .filter(|g| !drop.contains(&g.key()))
        .map(|g| GroundTruthEntry {
            retrieved_at: at,
            ..g.clone()
        })
        .chain(add)
        .collect()
}

fn reference_config() -> BuildConfig {
    let mut cfg = BuildConfig::default();
    cfg.components.clear();
    for (e, comps, ..) in SHAPE {
        cfg.components
            .insert(e, (0..comps).map(|i| component_name(e, i)).collect());
    }
    cfg
}

/// Findings giving exactly `[tp, fp, fn]` for one tool and ecosystem.
fn findings(
    tool: ToolId,
    e: EcosystemId,
    gt: &Snapshot,
    counts: [usize; 3],
    tag: &str,
) -> Vec<NormalizedFinding> {
    let [tp, fp, fn_] = counts;
    let rows: Vec<&GroundTruthEntry> = gt.entries.iter().filter(|g| g.ecosystem == e).collect();
    assert_eq!(tp + fn_, rows.len(), "{tool} {e}");
    // Each tool misses a different slice of the entries.
    let shift = (tool as usize * 37) % rows.len();
    let mut out = Vec::new();
    for i in 0..tp {
        let g = rows[(i + shift) % rows.len()];
        // Some tools report the CVE and keep the advisory id as an alias.
        let (vuln, aliases) = match (tool, g.cves.iter().next()) {
            (ToolId::OssIndex | ToolId::Trivy, Some(c)) => (c.clone(), [g.vuln.clone()].into()),
            _ => (g.vuln.clone(), g.aliases.clone()),
        };
        out.push(NormalizedFinding {
            tool,
            ecosystem: e,
            component: g.component.clone(),
            version: g.version.raw.clone(),
            vuln,
            aliases,
            basis: MatchBasis::Exact,
            affected: None,
            out_of_input: false,
        });
    }
    for i in 0..fp {
        let g = rows[(i * 13) % rows.len()];
        out.push(NormalizedFinding {
            tool,
            ecosystem: e,
            component: g.component.clone(),
            version: g.version.raw.clone(),
            vuln: VulnId::new(format!(
                "{}-FP-{tag}-{e}-{i:03}",
                tool.as_str().to_uppercase()
            )),
            aliases: BTreeSet::new(),
            basis: MatchBasis::Exact,
            affected: None,
            out_of_input: false,
        });
    }
    out
}

fn write(path: &Path, text: &str) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
}

fn reference_fixtures(root: &Path) {
    let t0 = Utc.with_ymd_and_hms(2026, 3, 28, 16, 27, 9).unwrap();
    let t1 = Utc.with_ymd_and_hms(2026, 4, 10, 9, 12, 41).unwrap();
    let mut ids = Ids(0);
    let e0 = first_snapshot(&mut ids, t0);
    let e1 = second_snapshot(&e0, &mut ids, t1);
    let s0 = Snapshot::from_entries(e0, reference_config(), t0);
    let s1 = Snapshot::from_entries(e1, reference_config(), t1);
    for (tag, s, at) in [("2026-03-28", &s0, 0), ("2026-04-10", &s1, 1)] {
        let dir = root.join(format!("gt-{tag}"));
        let _ = std::fs::remove_dir_all(&dir);
        write_snapshot(&dir, s).unwrap();
        for tool in ToolId::EVALUATED {
            let mut rows = Vec::new();
            for (t, e, c0, c1) in COUNTS {
                if t == tool {
                    rows.extend(findings(tool, e, s, if at == 0 { c0 } else { c1 }, tag));
                }
            }
            write(
                &root.join(format!("findings-{tag}/{tool}.jsonl")),
                &findings_jsonl(&rows).unwrap(),
            );
        }
        println!(
            "reference snapshot {tag}: {} entries, digest {}",
            s.entries.len(),
            s.digest
        );
    }
}

fn sim_config(d: &SimDataset) -> BuildConfig {
    let mut cfg = BuildConfig::default();
    cfg.components.clear();
    for p in &d.packages {
        cfg.components
            .entry(p.ecosystem)
            .or_default()
            .push(p.name.clone());
    }
    cfg.target_entries = [(Maven, 60), (Npm, 25), (NuGet, 8), (PyPI, 100)].into();
    cfg
}

/// Records a ground-truth build plus one run of each adapter.
fn replay_fixtures(fixtures: &Path) {
    let d: SimDataset =
        serde_json::from_str(&std::fs::read_to_string(fixtures.join("upstream.json")).unwrap())
            .unwrap();
    let dir = fixtures.join("replay");
    let _ = std::fs::remove_dir_all(&dir);
    let t = Transport::recording_backend(Arc::new(SimBackend::new(d.clone())), &dir);
    let snap = build_snapshot(&sim_config(&d), &t).unwrap();
    let sbom = emit_sbom(&snap).unwrap();
    let input = AdapterInput {
        snapshot: &snap,
        sbom: &sbom,
    };
    // The simulated services accept any credential; headers never reach the fixtures.
    std::env::set_var("SCABENCH_FIXTURE_CREDENTIAL", "placeholder");
    for tool in ToolId::EVALUATED {
        let mut cfg = AdapterConfig::new(tool);
        for var in cfg.credentials.values_mut() {
            *var = "SCABENCH_FIXTURE_CREDENTIAL".into();
        }
        cfg.credentials.remove("url");
        if tool == ToolId::Dtrack {
            cfg.endpoint = Some("http://dtrack.test:8081".into());
            cfg.poll_interval_ms = 1;
        }
        let r = run_adapter(tool, input, &cfg, &t).unwrap_or_else(|e| panic!("{tool}: {e}"));
        println!(
            "{tool}: {} findings, hash {}",
            r.findings.len(),
            r.result_hash
        );
    }
    println!("replay snapshot digest {}", snap.digest);
}

fn main() {
    let fixtures: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures"]
        .iter()
        .collect();
    reference_fixtures(&fixtures.join("reference"));
    replay_fixtures(&fixtures);
}
