//! In-memory stand-in for OSV and the four package registries.
//!
//! [`FakeUpstream`] answers the same requests the clients send to the public
//! endpoints, from a [`SimDataset`]. It backs the client tests and seeds the
//! replay fixture corpus.

use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::clients::osv::{osv_ecosystem, OSV_API};
use crate::clients::RegistryUrls;
use crate::error::{Error, Result};
use crate::model::{canonicalize_component, ComponentRef, EcosystemId};
use crate::transport::{Backend, Request, Response};

mod scanners;
pub use scanners::{FakeScanners, ScannerUrls, SimBackend};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRelease {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub released_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub yanked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPackage {
    pub ecosystem: EcosystemId,
    pub name: String,
    pub releases: Vec<SimRelease>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimAffected {
    pub ecosystem: EcosystemId,
    pub name: String,
    pub versions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimAdvisory {
    pub id: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modified: Option<String>,
    pub affected: Vec<SimAffected>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimDataset {
    pub packages: Vec<SimPackage>,
    pub advisories: Vec<SimAdvisory>,
}

impl SimDataset {
    pub fn package(&self, eco: EcosystemId, name: &str) -> Option<&SimPackage> {
        let want = canonicalize_component(eco, name).ok()?;
        self.packages.iter().find(|p| {
            p.ecosystem == eco && canonicalize_component(eco, &p.name).ok().as_ref() == Some(&want)
        })
    }

    /// Advisories affecting `(component, version)`, sorted by id.
    pub fn affecting(&self, c: &ComponentRef, version: &str) -> Vec<&SimAdvisory> {
        let mut out: Vec<&SimAdvisory> = self
            .advisories
            .iter()
            .filter(|a| {
                a.affected.iter().any(|x| {
                    x.ecosystem == c.ecosystem
                        && canonicalize_component(x.ecosystem, &x.name).ok().as_ref() == Some(c)
                        && x.versions.iter().any(|v| v == version)
                })
            })
            .collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    fn advisory(&self, id: &str) -> Option<&SimAdvisory> {
        self.advisories.iter().find(|a| a.id == id)
    }
}

const NUGET_PAGE: usize = 64;
const MAVEN_ROWS: usize = 200;

/// Serves OSV and registry requests from a dataset.
pub struct FakeUpstream {
    pub data: SimDataset,
    pub osv_base: String,
    pub urls: RegistryUrls,
    /// Vulnerabilities per OSV result page.
    pub page_size: usize,
    log: Mutex<Vec<String>>,
}

fn ts(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn record_json(a: &SimAdvisory) -> Value {
    let affected: Vec<Value> = a
        .affected
        .iter()
        .map(|x| json!({ "package": { "ecosystem": osv_ecosystem(x.ecosystem), "name": x.name }, "versions": x.versions }))
        .collect();
    json!({
        "id": a.id,
        "aliases": a.aliases,
        "modified": a.modified.clone().unwrap_or_else(|| "2026-01-01T00:00:00Z".into()),
        "affected": affected,
    })
}

fn query_param<'a>(url: &'a str, key: &str) -> Option<&'a str> {
    url.split_once('?')?
        .1
        .split('&')
        .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
}

impl FakeUpstream {
    pub fn new(data: SimDataset) -> Self {
        FakeUpstream {
            data,
            osv_base: OSV_API.into(),
            urls: RegistryUrls::default(),
            page_size: 1000,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn with_page_size(mut self, n: usize) -> Self {
        self.page_size = n.max(1);
        self
    }

    /// `"METHOD url"` of every request served so far.
    pub fn requests(&self) -> Vec<String> {
        self.log.lock().expect("log lock").clone()
    }

    pub fn count(&self, needle: &str) -> usize {
        self.requests()
            .iter()
            .filter(|r| r.contains(needle))
            .count()
    }

    fn page<'a>(
        &self,
        ids: Vec<&'a SimAdvisory>,
        token: Option<&str>,
    ) -> Result<(Vec<&'a SimAdvisory>, Option<String>)> {
        let start: usize = match token {
            Some(t) => t
                .parse()
                .map_err(|_| Error::Usage(format!("bad page token {t:?}")))?,
            None => 0,
        };
        let end = (start + self.page_size).min(ids.len());
        let next = (end < ids.len()).then(|| end.to_string());
        Ok((ids.get(start..end).unwrap_or(&[]).to_vec(), next))
    }

    fn resolve(&self, q: &Value) -> Result<(ComponentRef, String, Option<String>)> {
        let bad = || Error::Usage(format!("malformed OSV query {q}"));
        let eco: EcosystemId = q["package"]["ecosystem"]
            .as_str()
            .ok_or_else(bad)?
            .parse()?;
        let name = q["package"]["name"].as_str().ok_or_else(bad)?;
        let version = q["version"].as_str().ok_or_else(bad)?.to_string();
        let token = q
            .get("page_token")
            .and_then(Value::as_str)
            .map(str::to_string);
        Ok((canonicalize_component(eco, name)?, version, token))
    }

    fn querybatch(&self, body: &Value) -> Result<Response> {
        let mut results = Vec::new();
        for q in body["queries"].as_array().cloned().unwrap_or_default() {
            let (c, v, token) = self.resolve(&q)?;
            let (page, next) = self.page(self.data.affecting(&c, &v), token.as_deref())?;
            let mut r = json!({});
            if !page.is_empty() {
                r["vulns"] = page
                    .iter()
                    .map(|a| json!({ "id": a.id, "modified": a.modified.clone().unwrap_or_else(|| "2026-01-01T00:00:00Z".into()) }))
                    .collect();
            }
            if let Some(n) = next {
                r["next_page_token"] = json!(n);
            }
            results.push(r);
        }
        Ok(Response::json(200, &json!({ "results": results })))
    }

    fn query(&self, body: &Value) -> Result<Response> {
        let (c, v, token) = self.resolve(body)?;
        let (page, next) = self.page(self.data.affecting(&c, &v), token.as_deref())?;
        let mut r = json!({});
        if !page.is_empty() {
            r["vulns"] = page.iter().map(|a| record_json(a)).collect();
        }
        if let Some(n) = next {
            r["next_page_token"] = json!(n);
        }
        Ok(Response::json(200, &r))
    }

    fn npm(&self, name: &str) -> Response {
        let name = name.replace("%2f", "/").replace("%2F", "/");
        let Some(p) = self.data.package(EcosystemId::Npm, &name) else {
            return Response::json(404, &json!({ "error": "Not found" }));
        };
        let mut versions = serde_json::Map::new();
        let mut time = serde_json::Map::new();
        for r in &p.releases {
            versions.insert(
                r.version.clone(),
                json!({ "name": p.name, "version": r.version }),
            );
            if let Some(t) = &r.released_at {
                time.insert(r.version.clone(), json!(ts(t)));
            }
        }
        Response::json(
            200,
            &json!({ "name": p.name, "versions": versions, "time": time }),
        )
    }

    fn pypi(&self, name: &str) -> Response {
        let Some(p) = self.data.package(EcosystemId::PyPI, name) else {
            return Response::json(404, &json!({ "message": "Not Found" }));
        };
        let releases: serde_json::Map<String, Value> = p
            .releases
            .iter()
            .map(|r| {
                let files = match &r.released_at {
                    Some(t) => json!([{ "upload_time_iso_8601": ts(t), "yanked": r.yanked }]),
                    None => json!([]),
                };
                (r.version.clone(), files)
            })
            .collect();
        Response::json(
            200,
            &json!({ "info": { "name": p.name }, "releases": releases }),
        )
    }

    fn maven_metadata(&self, path: &str) -> Response {
        let trimmed = path.trim_end_matches("/maven-metadata.xml");
        let Some((group_path, artifact)) = trimmed.rsplit_once('/') else {
            return Response::new(404, "");
        };
        let coordinate = format!("{}:{artifact}", group_path.replace('/', "."));
        let Some(p) = self.data.package(EcosystemId::Maven, &coordinate) else {
            return Response::new(404, "");
        };
        let versions: String = p
            .releases
            .iter()
            .map(|r| format!("      <version>{}</version>\n", r.version))
            .collect();
        let (group, _) = coordinate.split_once(':').expect("maven coordinate");
        Response::new(
            200,
            format!(
                "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<metadata>\n  <groupId>{group}</groupId>\n  <artifactId>{artifact}</artifactId>\n  <versioning>\n    <versions>\n{versions}    </versions>\n  </versioning>\n</metadata>\n"
            ),
        )
    }

    fn maven_search(&self, url: &str) -> Response {
        let q = query_param(url, "q").unwrap_or("").replace("%22", "\"");
        let field = |prefix: &str| -> Option<String> {
            let start = q.find(prefix)? + prefix.len();
            let rest = &q[start..];
            Some(rest[..rest.find('"')?].to_string())
        };
        let start: usize = query_param(url, "start")
            .and_then(|s| s.parse().ok())
            .unwrap_or(0);
        let docs: Vec<Value> = match (field("g:\""), field("a:\"")) {
            (Some(g), Some(a)) => self
                .data
                .package(EcosystemId::Maven, &format!("{g}:{a}"))
                .map(|p| {
                    p.releases
                        .iter()
                        .filter_map(|r| {
                            r.released_at
                                .map(|t| json!({ "g": g, "a": a, "v": r.version, "timestamp": t.timestamp_millis() }))
                        })
                        .collect()
                })
                .unwrap_or_default(),
            _ => Vec::new(),
        };
        let page: Vec<Value> = docs.iter().skip(start).take(MAVEN_ROWS).cloned().collect();
        Response::json(
            200,
            &json!({ "response": { "numFound": docs.len(), "start": start, "docs": page } }),
        )
    }

    fn nuget_leaves(p: &SimPackage) -> Vec<Value> {
        p.releases
            .iter()
            .map(|r| {
                let published = if r.yanked {
                    "1900-01-01T00:00:00+00:00".to_string()
                } else {
                    r.released_at.as_ref().map(ts).unwrap_or_else(|| "1900-01-01T00:00:00+00:00".into())
                };
                json!({ "catalogEntry": { "id": p.name, "version": r.version, "listed": !r.yanked, "published": published } })
            })
            .collect()
    }

    fn nuget(&self, rest: &str) -> Response {
        let mut parts = rest.splitn(2, '/');
        let id = parts.next().unwrap_or("");
        let tail = parts.next().unwrap_or("");
        let Some(p) = self.data.package(EcosystemId::NuGet, id) else {
            return Response::new(404, "");
        };
        let leaves = Self::nuget_leaves(p);
        let base = format!("{}/{}", self.urls.nuget, id);
        if tail == "index.json" {
            // Small packages inline their single page; larger ones link pages by @id.
            let items: Vec<Value> = if leaves.len() <= NUGET_PAGE {
                vec![json!({ "count": leaves.len(), "items": leaves })]
            } else {
                (0..leaves.len().div_ceil(NUGET_PAGE))
                    .map(|i| json!({ "@id": format!("{base}/page/{i}.json"), "count": NUGET_PAGE }))
                    .collect()
            };
            return Response::json(200, &json!({ "count": items.len(), "items": items }));
        }
        if let Some(i) = tail
            .strip_prefix("page/")
            .and_then(|s| s.strip_suffix(".json"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            let page: Vec<Value> = leaves
                .iter()
                .skip(i * NUGET_PAGE)
                .take(NUGET_PAGE)
                .cloned()
                .collect();
            if !page.is_empty() {
                return Response::json(200, &json!({ "items": page }));
            }
        }
        Response::new(404, "")
    }

    fn route(&self, req: &Request) -> Result<Response> {
        let url = req.url.as_str();
        let body = || -> Result<Value> {
            serde_json::from_slice(req.body.as_deref().unwrap_or(b"{}"))
                .map_err(|e| Error::Usage(format!("request body: {e}")))
        };
        if let Some(path) = url.strip_prefix(&format!("{}/v1/", self.osv_base)) {
            return match (req.method.as_str(), path) {
                ("POST", "querybatch") => self.querybatch(&body()?),
                ("POST", "query") => self.query(&body()?),
                ("GET", p) if p.starts_with("vulns/") => {
                    Ok(match self.data.advisory(&p["vulns/".len()..]) {
                        Some(a) => Response::json(200, &record_json(a)),
                        None => {
                            Response::json(404, &json!({ "code": 5, "message": "Bug not found." }))
                        }
                    })
                }
                _ => Ok(Response::new(404, "")),
            };
        }
        if req.method != "GET" {
            return Ok(Response::new(405, ""));
        }
        if let Some(rest) = url.strip_prefix(&format!("{}/", self.urls.pypi)) {
            return Ok(match rest.strip_suffix("/json") {
                Some(name) => self.pypi(name),
                None => Response::new(404, ""),
            });
        }
        if url.starts_with(&format!("{}?", self.urls.maven_search)) {
            return Ok(self.maven_search(url));
        }
        if let Some(rest) = url.strip_prefix(&format!("{}/", self.urls.maven_repo)) {
            return Ok(self.maven_metadata(rest));
        }
        if let Some(rest) = url.strip_prefix(&format!("{}/", self.urls.nuget)) {
            return Ok(self.nuget(rest));
        }
        if let Some(name) = url.strip_prefix(&format!("{}/", self.urls.npm)) {
            return Ok(self.npm(name));
        }
        Ok(Response::new(404, ""))
    }
}

impl Backend for FakeUpstream {
    fn send(&self, req: &Request) -> Result<Response> {
        self.log
            .lock()
            .expect("log lock")
            .push(format!("{} {}", req.method, req.url));
        self.route(req)
    }
}

/// Release dates one day apart starting at `start`.
pub fn daily_releases(versions: &[&str], start: DateTime<Utc>) -> Vec<SimRelease> {
    versions
        .iter()
        .enumerate()
        .map(|(i, v)| SimRelease {
            version: v.to_string(),
            released_at: Some(start + chrono::Duration::days(i as i64)),
            yanked: false,
        })
        .collect()
}
