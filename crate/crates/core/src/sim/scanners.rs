//! Simulated SCA tools answering from a [`SimDataset`].
//!
//! Each tool sees the same advisories through its own lens, roughly as the
//! real services do: Dependency-Track prefers CVE ids and has no PYSEC
//! source, OSS Index only knows CVE-backed advisories, GitHub returns
//! version ranges per package, Trivy reports fixed versions and Snyk uses
//! its own ids and lists npm paths twice.

use std::collections::BTreeMap;
use std::sync::Mutex;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde_json::{json, Value};

use super::{FakeUpstream, SimAdvisory, SimDataset, SimPackage};
use crate::adapters::{GITHUB_GRAPHQL, OSSINDEX_API};
use crate::canonical::sha256_hex;
use crate::error::{Error, Result};
use crate::model::{canonicalize_component, ComponentRef, EcosystemId};
use crate::sbom::{from_purl, parse_sbom_purls};
use crate::transport::{Backend, Request, Response, EXEC_METHOD};

#[derive(Debug, Clone)]
pub struct ScannerUrls {
    pub dtrack: String,
    pub ossindex: String,
    pub github: String,
    pub snyk: String,
    pub trivy: String,
}

impl Default for ScannerUrls {
    fn default() -> Self {
        ScannerUrls {
            dtrack: "http://dtrack.test:8081".into(),
            ossindex: OSSINDEX_API.into(),
            github: GITHUB_GRAPHQL.into(),
            snyk: "snyk".into(),
            trivy: "trivy".into(),
        }
    }
}

const OSSINDEX_LIMIT: usize = 128;

#[derive(Default)]
struct DtrackState {
    /// token -> (project name, polls seen)
    uploads: BTreeMap<String, (String, usize)>,
    /// project uuid -> SBOM bytes
    projects: BTreeMap<String, Vec<u8>>,
}

pub struct FakeScanners {
    pub data: SimDataset,
    pub urls: ScannerUrls,
    /// GitHub nodes per GraphQL page.
    pub github_page: usize,
    dtrack: Mutex<DtrackState>,
    log: Mutex<Vec<String>>,
}

type Input = (ComponentRef, String, String);

fn sbom_inputs(bytes: &[u8]) -> Result<Vec<Input>> {
    parse_sbom_purls(bytes)?
        .into_iter()
        .map(|p| {
            let (c, v) = from_purl(&p)?;
            Ok((c, v, p.to_string()))
        })
        .collect()
}

fn cves(a: &SimAdvisory) -> Vec<&str> {
    a.aliases
        .iter()
        .map(String::as_str)
        .filter(|s| s.starts_with("CVE-"))
        .collect()
}

fn project_uuid(name: &str) -> String {
    let h = sha256_hex(name.as_bytes());
    format!(
        "{}-{}-{}-{}-{}",
        &h[..8],
        &h[8..12],
        &h[12..16],
        &h[16..20],
        &h[20..32]
    )
}

/// Position of each affected version of `pkg` in its release list.
fn affected_positions(pkg: &SimPackage, adv: &SimAdvisory) -> Vec<usize> {
    let c = canonicalize_component(pkg.ecosystem, &pkg.name).ok();
    let listed: Vec<&String> = adv
        .affected
        .iter()
        .filter(|x| {
            x.ecosystem == pkg.ecosystem && canonicalize_component(x.ecosystem, &x.name).ok() == c
        })
        .flat_map(|x| &x.versions)
        .collect();
    pkg.releases
        .iter()
        .enumerate()
        .filter(|(_, r)| listed.contains(&&r.version))
        .map(|(i, _)| i)
        .collect()
}

/// Release following the last affected one.
fn first_fixed(pkg: &SimPackage, adv: &SimAdvisory) -> Option<String> {
    let last = *affected_positions(pkg, adv).last()?;
    pkg.releases.get(last + 1).map(|r| r.version.clone())
}

/// GitHub-style range covering the affected releases.
fn github_range(pkg: &SimPackage, adv: &SimAdvisory) -> Option<String> {
    let pos = affected_positions(pkg, adv);
    let (first, last) = (*pos.first()?, *pos.last()?);
    let lower = (first > 0).then(|| format!(">= {}", pkg.releases[first].version));
    let upper = match pkg.releases.get(last + 1) {
        Some(next) => format!("< {}", next.version),
        None => format!("<= {}", pkg.releases[last].version),
    };
    Some(match lower {
        Some(l) => format!("{l}, {upper}"),
        None => upper,
    })
}

fn snyk_manager(e: EcosystemId) -> &'static str {
    match e {
        EcosystemId::Maven => "maven",
        EcosystemId::Npm => "npm",
        EcosystemId::NuGet => "nuget",
        EcosystemId::PyPI => "pip",
    }
}

fn trivy_type(e: EcosystemId) -> &'static str {
    match e {
        EcosystemId::Maven => "jar",
        EcosystemId::Npm => "node-pkg",
        EcosystemId::NuGet => "nuget",
        EcosystemId::PyPI => "python-pkg",
    }
}

fn package_name(c: &ComponentRef) -> String {
    match &c.group {
        Some(g) => format!("{g}:{}", c.name),
        None => c.name.clone(),
    }
}

impl FakeScanners {
    pub fn new(data: SimDataset) -> Self {
        FakeScanners {
            data,
            urls: ScannerUrls::default(),
            github_page: 2,
            dtrack: Mutex::new(DtrackState::default()),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<String> {
        self.log.lock().expect("log lock").clone()
    }

    pub fn count(&self, needle: &str) -> usize {
        self.requests()
            .iter()
            .filter(|r| r.contains(needle))
            .count()
    }

    fn dtrack(&self, req: &Request, path: &str) -> Result<Response> {
        let mut st = self.dtrack.lock().expect("dtrack state");
        if req.method == "PUT" && path == "/api/v1/bom" {
            let body: Value = serde_json::from_slice(req.body.as_deref().unwrap_or_default())?;
            let name = body["projectName"].as_str().unwrap_or_default().to_string();
            let bom = B64
                .decode(body["bom"].as_str().unwrap_or_default())
                .map_err(|e| Error::Usage(format!("bom is not base64: {e}")))?;
            let token = format!("tok-{}", &sha256_hex(&bom)[..16]);
            st.projects.insert(project_uuid(&name), bom);
            st.uploads.insert(token.clone(), (name, 0));
            return Ok(Response::json(200, &json!({ "token": token })));
        }
        if let Some(token) = path.strip_prefix("/api/v1/bom/token/") {
            return Ok(match st.uploads.get_mut(token) {
                // The first poll still sees the analysis running.
                Some((_, polls)) => {
                    *polls += 1;
                    Response::json(200, &json!({ "processing": *polls == 1 }))
                }
                None => Response::new(404, ""),
            });
        }
        if let Some(q) = path.strip_prefix("/api/v1/project/lookup?") {
            let name = q
                .split('&')
                .find_map(|kv| kv.strip_prefix("name="))
                .unwrap_or_default();
            let uuid = project_uuid(name);
            return Ok(if st.projects.contains_key(&uuid) {
                Response::json(200, &json!({ "uuid": uuid, "name": name, "version": "1" }))
            } else {
                Response::new(404, "")
            });
        }
        if let Some(uuid) = path.strip_prefix("/api/v1/finding/project/") {
            let Some(bom) = st.projects.get(uuid) else {
                return Ok(Response::new(404, ""));
            };
            let mut findings = Vec::new();
            for (c, v, purl) in sbom_inputs(bom)? {
                for a in self.data.affecting(&c, &v) {
                    if a.id.starts_with("PYSEC-") {
                        continue;
                    }
                    let cve = cves(a).first().map(|s| s.to_string());
                    let (vuln_id, source) = match &cve {
                        Some(c) => (c.clone(), "NVD"),
                        None => (a.id.clone(), "GITHUB"),
                    };
                    let mut alias = serde_json::Map::new();
                    if let Some(c) = &cve {
                        alias.insert("cveId".into(), json!(c));
                    }
                    if a.id.starts_with("GHSA-") {
                        alias.insert("ghsaId".into(), json!(a.id));
                    }
                    findings.push(json!({
                        "component": { "uuid": project_uuid(&purl), "name": c.name, "version": v, "group": c.group, "purl": purl },
                        "vulnerability": { "uuid": project_uuid(&a.id), "vulnId": vuln_id, "source": source, "severity": "HIGH", "aliases": [alias] },
                        "analysis": { "isSuppressed": false },
                    }));
                }
            }
            // A component outside the four ecosystems, as pulled in by the analyzer.
            findings.push(json!({
                "component": { "uuid": project_uuid("zlib"), "name": "zlib", "version": "1.2.11", "purl": "pkg:generic/zlib@1.2.11" },
                "vulnerability": { "uuid": project_uuid("CVE-2022-37434"), "vulnId": "CVE-2022-37434", "source": "NVD", "severity": "CRITICAL", "aliases": [] },
            }));
            return Ok(Response::json(200, &Value::Array(findings)));
        }
        Ok(Response::new(404, ""))
    }

    fn ossindex(&self, req: &Request) -> Result<Response> {
        let body: Value = serde_json::from_slice(req.body.as_deref().unwrap_or_default())?;
        let coords: Vec<&str> = body["coordinates"]
            .as_array()
            .map(|a| a.iter().filter_map(Value::as_str).collect())
            .unwrap_or_default();
        if coords.len() > OSSINDEX_LIMIT {
            return Ok(Response::json(
                400,
                &json!({ "code": 400, "message": "too many coordinates" }),
            ));
        }
        let mut reports = Vec::new();
        for coord in coords {
            let mut vulns = Vec::new();
            if let Ok((c, v)) = coord.parse().and_then(|p| from_purl(&p)) {
                for a in self.data.affecting(&c, &v) {
                    if let Some(cve) = cves(a).first() {
                        vulns.push(json!({ "id": cve, "cve": cve, "title": format!("[{cve}] {}", a.id), "cvssScore": 7.5 }));
                    }
                }
            }
            reports.push(json!({ "coordinates": coord, "reference": format!("https://ossindex.sonatype.org/component/{coord}"), "vulnerabilities": vulns }));
        }
        Ok(Response::json(200, &Value::Array(reports)))
    }

    fn github(&self, req: &Request) -> Result<Response> {
        let body: Value = serde_json::from_slice(req.body.as_deref().unwrap_or_default())?;
        let vars = &body["variables"];
        let eco = match vars["ecosystem"].as_str() {
            Some("MAVEN") => EcosystemId::Maven,
            Some("NPM") => EcosystemId::Npm,
            Some("NUGET") => EcosystemId::NuGet,
            Some("PIP") => EcosystemId::PyPI,
            other => {
                return Ok(Response::json(
                    200,
                    &json!({ "errors": [{ "message": format!("bad ecosystem {other:?}") }] }),
                ))
            }
        };
        let name = vars["package"].as_str().unwrap_or_default();
        let start: usize = vars["after"]
            .as_str()
            .and_then(|s| s.strip_prefix("cursor:"))
            .and_then(|s| s.parse().ok())
            .unwrap_or(0);
        let mut nodes = Vec::new();
        if let Some(pkg) = self.data.package(eco, name) {
            for a in &self.data.advisories {
                if !a.id.starts_with("GHSA-") {
                    continue;
                }
                let Some(range) = github_range(pkg, a) else {
                    continue;
                };
                let mut ids = vec![json!({ "type": "GHSA", "value": a.id })];
                ids.extend(
                    cves(a)
                        .into_iter()
                        .map(|c| json!({ "type": "CVE", "value": c })),
                );
                nodes.push(json!({
                    "advisory": { "ghsaId": a.id, "withdrawnAt": null, "identifiers": ids },
                    "package": { "ecosystem": vars["ecosystem"], "name": name },
                    "vulnerableVersionRange": range,
                    "firstPatchedVersion": first_fixed(pkg, a).map(|f| json!({ "identifier": f })),
                }));
            }
        }
        let end = (start + self.github_page).min(nodes.len());
        let page: Vec<Value> = nodes.get(start..end).unwrap_or(&[]).to_vec();
        Ok(Response::json(
            200,
            &json!({ "data": { "securityVulnerabilities": {
                "nodes": page,
                "pageInfo": { "hasNextPage": end < nodes.len(), "endCursor": format!("cursor:{end}") },
            } } }),
        ))
    }

    fn trivy(&self, sbom: &[u8]) -> Result<Response> {
        let mut results: BTreeMap<&str, Vec<Value>> = BTreeMap::new();
        for (c, v, purl) in sbom_inputs(sbom)? {
            let pkg = self.data.package(c.ecosystem, &package_name(&c));
            for a in self.data.affecting(&c, &v) {
                let cve = cves(a).first().map(|s| s.to_string());
                let mut row = json!({
                    "VulnerabilityID": cve.clone().unwrap_or_else(|| a.id.clone()),
                    "PkgName": package_name(&c),
                    "PkgIdentifier": { "PURL": purl },
                    "InstalledVersion": v,
                    "Severity": "HIGH",
                });
                if cve.is_some() && a.id.starts_with("GHSA-") {
                    row["VendorIDs"] = json!([a.id]);
                }
                if let Some(fixed) = pkg.and_then(|p| first_fixed(p, a)) {
                    row["FixedVersion"] = json!(fixed);
                }
                results
                    .entry(trivy_type(c.ecosystem))
                    .or_default()
                    .push(row);
            }
        }
        let mut out: Vec<Value> = results
            .into_iter()
            .map(|(ty, vulns)| json!({ "Target": "sbom", "Class": "lang-pkgs", "Type": ty, "Vulnerabilities": vulns }))
            .collect();
        // A binary the SBOM does not describe, without a purl.
        out.push(json!({ "Target": "usr/bin/tool", "Class": "lang-pkgs", "Type": "gobinary", "Vulnerabilities": [
            { "VulnerabilityID": "CVE-2023-39325", "PkgName": "golang.org/x/net", "InstalledVersion": "0.7.0", "FixedVersion": "0.17.0" }
        ] }));
        Ok(Response::json(
            0,
            &json!({ "SchemaVersion": 2, "ArtifactName": "sbom", "Results": out }),
        ))
    }

    fn snyk(&self, sbom: &[u8]) -> Result<Response> {
        let mut vulns = Vec::new();
        for (c, v, _) in sbom_inputs(sbom)? {
            for a in self.data.affecting(&c, &v) {
                let ghsa: Vec<&str> = std::iter::once(a.id.as_str())
                    .filter(|s| s.starts_with("GHSA-"))
                    .collect();
                let suffix = &sha256_hex(a.id.as_bytes())[..7];
                let row = json!({
                    "id": format!("SNYK-{}-{}-{}", snyk_manager(c.ecosystem).to_ascii_uppercase(), c.name.to_ascii_uppercase().replace(['/', '@', '.'], ""), u64::from_str_radix(suffix, 16).unwrap_or(0)),
                    "packageName": package_name(&c),
                    "version": v,
                    "packageManager": snyk_manager(c.ecosystem),
                    "identifiers": { "CVE": cves(a), "GHSA": ghsa, "CWE": [] },
                });
                // npm results list each vulnerable path; the SBOM yields two.
                if c.ecosystem == EcosystemId::Npm {
                    vulns.push(row.clone());
                }
                vulns.push(row);
            }
        }
        let status = if vulns.is_empty() { 0 } else { 1 };
        Ok(Response::json(
            status,
            &json!({ "ok": status == 0, "vulnerabilities": vulns }),
        ))
    }

    fn exec_sbom(req: &Request, flag: Option<&str>) -> Result<Vec<u8>> {
        let spec = req
            .exec
            .as_ref()
            .ok_or_else(|| Error::Usage("exec request without spec".into()))?;
        let path = spec
            .args
            .iter()
            .find_map(|a| match flag {
                Some(f) => a.strip_prefix(f),
                None => a.ends_with(".json").then_some(a.as_str()),
            })
            .ok_or_else(|| Error::Usage("no SBOM argument".into()))?;
        std::fs::read(path).map_err(|e| Error::io(path, e))
    }

    /// Answers requests addressed to one of the simulated tools.
    pub fn route(&self, req: &Request) -> Option<Result<Response>> {
        let url = req.url.as_str();
        let hit = if req.method == EXEC_METHOD {
            let program = url.strip_prefix("exec:")?;
            if program == self.urls.trivy {
                Some(Self::exec_sbom(req, None).and_then(|b| self.trivy(&b)))
            } else if program == self.urls.snyk {
                Some(Self::exec_sbom(req, Some("--file=")).and_then(|b| self.snyk(&b)))
            } else {
                None
            }
        } else if let Some(path) = url.strip_prefix(&self.urls.dtrack) {
            Some(self.dtrack(req, path))
        } else if url == format!("{}/api/v3/component-report", self.urls.ossindex) {
            Some(self.ossindex(req))
        } else if url == self.urls.github {
            Some(self.github(req))
        } else {
            None
        };
        if hit.is_some() {
            self.log
                .lock()
                .expect("log lock")
                .push(format!("{} {url}", req.method));
        }
        hit
    }
}

/// Upstream data sources and simulated tools behind one backend.
pub struct SimBackend {
    pub upstream: FakeUpstream,
    pub scanners: FakeScanners,
}

impl SimBackend {
    pub fn new(data: SimDataset) -> Self {
        SimBackend {
            upstream: FakeUpstream::new(data.clone()),
            scanners: FakeScanners::new(data),
        }
    }
}

impl Backend for SimBackend {
    fn send(&self, req: &Request) -> Result<Response> {
        match self.scanners.route(req) {
            Some(r) => r,
            None => self.upstream.send(req),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::daily_releases;
    use chrono::{TimeZone, Utc};

    fn pkg() -> (SimPackage, SimAdvisory) {
        let p = SimPackage {
            ecosystem: EcosystemId::Npm,
            name: "x".into(),
            releases: daily_releases(
                &["1.0.0", "1.1.0", "1.2.0", "2.0.0"],
                Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
            ),
        };
        let a = SimAdvisory {
            id: "GHSA-aaaa-bbbb-cccc".into(),
            aliases: vec!["CVE-2024-1".into()],
            modified: None,
            affected: vec![crate::sim::SimAffected {
                ecosystem: EcosystemId::Npm,
                name: "x".into(),
                versions: vec!["1.1.0".into(), "1.2.0".into()],
            }],
        };
        (p, a)
    }

    #[test]
    fn ranges_cover_affected_releases() {
        let (mut p, mut a) = pkg();
        assert_eq!(github_range(&p, &a).unwrap(), ">= 1.1.0, < 2.0.0");
        assert_eq!(first_fixed(&p, &a).as_deref(), Some("2.0.0"));
        a.affected[0].versions = vec!["1.0.0".into()];
        assert_eq!(github_range(&p, &a).unwrap(), "< 1.1.0");
        a.affected[0].versions = vec!["2.0.0".into()];
        assert_eq!(github_range(&p, &a).unwrap(), ">= 2.0.0, <= 2.0.0");
        assert_eq!(first_fixed(&p, &a), None);
        p.name = "y".into();
        assert_eq!(github_range(&p, &a), None);
    }
}
