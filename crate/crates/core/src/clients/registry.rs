//! Release listings from npm, PyPI, Maven Central and NuGet.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::OnceLock;

use chrono::{DateTime, TimeZone, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{ComponentRef, EcosystemId, VersionRef};
use crate::transport::{Request, Transport};

/// (version, release date, yanked or unlisted) as a registry reports it.
type Listing = Vec<(String, Option<DateTime<Utc>>, bool)>;
use crate::version::{compare, is_prerelease, parse_version, ParsedVersion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryRelease {
    pub component: ComponentRef,
    pub version: VersionRef,
    pub yanked: bool,
}

#[derive(Debug, Clone)]
pub struct RegistryUrls {
    pub npm: String,
    pub pypi: String,
    pub maven_repo: String,
    pub maven_search: String,
    pub nuget: String,
}

impl Default for RegistryUrls {
    fn default() -> Self {
        RegistryUrls {
            npm: "https://registry.npmjs.org".into(),
            pypi: "https://pypi.org/pypi".into(),
            maven_repo: "https://repo1.maven.org/maven2".into(),
            maven_search: "https://search.maven.org/solrsearch/select".into(),
            nuget: "https://api.nuget.org/v3/registration5-gz-semver2".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegistryClient {
    transport: Transport,
    pub urls: RegistryUrls,
}

fn ts(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .ok()
        .map(|d| d.with_timezone(&Utc))
}

fn decode(what: &str, e: impl std::fmt::Display) -> Error {
    Error::Decode(format!("{what}: {e}"))
}

impl RegistryClient {
    pub fn new(transport: Transport) -> Self {
        RegistryClient {
            transport,
            urls: RegistryUrls::default(),
        }
    }

    /// Every release the registry lists, ascending in ecosystem order.
    /// Version strings the ecosystem grammar rejects are dropped.
    pub fn list_versions(&self, component: &ComponentRef) -> Result<Vec<RegistryRelease>> {
        let raw = match component.ecosystem {
            EcosystemId::Npm => self.npm(component)?,
            EcosystemId::PyPI => self.pypi(component)?,
            EcosystemId::Maven => self.maven(component)?,
            EcosystemId::NuGet => self.nuget(component)?,
        };
        let e = component.ecosystem;
        let mut parsed: Vec<(ParsedVersion, RegistryRelease)> = Vec::new();
        for (raw, released_at, yanked) in raw {
            let pv = match parse_version(e, &raw) {
                Ok(pv) => pv,
                Err(err) => {
                    tracing::debug!(%component, %err, "skipping unparseable release");
                    continue;
                }
            };
            let version = VersionRef {
                prerelease: is_prerelease(e, &pv),
                raw,
                released_at,
            };
            parsed.push((
                pv,
                RegistryRelease {
                    component: component.clone(),
                    version,
                    yanked,
                },
            ));
        }
        parsed.sort_by(|a, b| {
            compare(e, &a.0, &b.0)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.1.version.raw.cmp(&b.1.version.raw))
        });
        Ok(parsed.into_iter().map(|(_, r)| r).collect())
    }

    fn npm(&self, c: &ComponentRef) -> Result<Listing> {
        let url = format!("{}/{}", self.urls.npm, c.name.replace('/', "%2f"));
        let doc: Value = self.transport.send_ok(&Request::get(url))?.parse_json()?;
        let versions = doc
            .get("versions")
            .and_then(Value::as_object)
            .ok_or_else(|| decode("npm packument", "missing versions"))?;
        let times = doc.get("time").and_then(Value::as_object);
        Ok(versions
            .keys()
            .map(|v| {
                let t = times
                    .and_then(|t| t.get(v))
                    .and_then(Value::as_str)
                    .and_then(ts);
                (v.clone(), t, false)
            })
            .collect())
    }

    fn pypi(&self, c: &ComponentRef) -> Result<Listing> {
        let url = format!("{}/{}/json", self.urls.pypi, c.name);
        let doc: Value = self.transport.send_ok(&Request::get(url))?.parse_json()?;
        let releases = doc
            .get("releases")
            .and_then(Value::as_object)
            .ok_or_else(|| decode("PyPI metadata", "missing releases"))?;
        let mut out = Vec::new();
        for (v, files) in releases {
            let files = files.as_array().map(Vec::as_slice).unwrap_or(&[]);
            let released = files
                .iter()
                .filter_map(|f| f.get("upload_time_iso_8601").and_then(Value::as_str))
                .filter_map(ts)
                .min();
            let yanked = !files.is_empty()
                && files
                    .iter()
                    .all(|f| f.get("yanked").and_then(Value::as_bool).unwrap_or(false));
            out.push((v.clone(), released, yanked));
        }
        Ok(out)
    }

    fn maven(&self, c: &ComponentRef) -> Result<Listing> {
        static VERSION: OnceLock<Regex> = OnceLock::new();
        let group = c
            .group
            .as_deref()
            .ok_or_else(|| Error::Coordinate(format!("Maven component {c} has no group")))?;
        let url = format!(
            "{}/{}/{}/maven-metadata.xml",
            self.urls.maven_repo,
            group.replace('.', "/"),
            c.name
        );
        let resp = self.transport.send_ok(&Request::get(url))?;
        let xml = resp.text()?;
        let re = VERSION
            .get_or_init(|| Regex::new(r"<version>\s*([^<\s]+)\s*</version>").expect("regex"));
        let section = match (xml.find("<versions>"), xml.find("</versions>")) {
            (Some(a), Some(b)) if a < b => &xml[a..b],
            _ => return Err(decode("maven-metadata.xml", "no <versions> element")),
        };
        let versions: Vec<String> = re
            .captures_iter(section)
            .map(|cap| cap[1].to_string())
            .collect();
        let times = self.maven_timestamps(group, &c.name).unwrap_or_else(|err| {
            tracing::warn!(%c, %err, "Maven release timestamps unavailable");
            BTreeMap::new()
        });
        Ok(versions
            .into_iter()
            .map(|v| {
                let t = times.get(&v).copied();
                (v, t, false)
            })
            .collect())
    }

    /// Per-version timestamps from the Central search index (`core=gav`).
    fn maven_timestamps(
        &self,
        group: &str,
        artifact: &str,
    ) -> Result<BTreeMap<String, DateTime<Utc>>> {
        const ROWS: usize = 200;
        let mut out = BTreeMap::new();
        let mut start = 0usize;
        loop {
            let url = format!(
                "{}?q=g:%22{group}%22+AND+a:%22{artifact}%22&core=gav&rows={ROWS}&start={start}&wt=json",
                self.urls.maven_search
            );
            let doc: Value = self.transport.send_ok(&Request::get(url))?.parse_json()?;
            let response = doc
                .get("response")
                .ok_or_else(|| decode("Maven search", "missing response"))?;
            let found = response
                .get("numFound")
                .and_then(Value::as_u64)
                .unwrap_or(0) as usize;
            let docs = response
                .get("docs")
                .and_then(Value::as_array)
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            for d in docs {
                let v = d.get("v").and_then(Value::as_str);
                let t = d
                    .get("timestamp")
                    .and_then(Value::as_i64)
                    .and_then(|ms| Utc.timestamp_millis_opt(ms).single());
                if let (Some(v), Some(t)) = (v, t) {
                    out.insert(v.to_string(), t);
                }
            }
            start += docs.len();
            if docs.is_empty() || start >= found {
                break;
            }
        }
        Ok(out)
    }

    fn nuget(&self, c: &ComponentRef) -> Result<Listing> {
        let url = format!("{}/{}/index.json", self.urls.nuget, c.name.to_lowercase());
        let index: Value = self.transport.send_ok(&Request::get(url))?.parse_json()?;
        let pages = index
            .get("items")
            .and_then(Value::as_array)
            .ok_or_else(|| decode("NuGet registration", "missing items"))?;
        let mut out = Vec::new();
        for page in pages {
            let leaves = match page.get("items").and_then(Value::as_array) {
                Some(items) => items.clone(),
                None => {
                    let id = page
                        .get("@id")
                        .and_then(Value::as_str)
                        .ok_or_else(|| decode("NuGet registration page", "no items and no @id"))?;
                    let p: Value = self.transport.send_ok(&Request::get(id))?.parse_json()?;
                    p.get("items")
                        .and_then(Value::as_array)
                        .cloned()
                        .ok_or_else(|| decode("NuGet registration page", "missing items"))?
                }
            };
            for leaf in leaves {
                let entry = leaf
                    .get("catalogEntry")
                    .ok_or_else(|| decode("NuGet leaf", "missing catalogEntry"))?;
                let v = entry
                    .get("version")
                    .and_then(Value::as_str)
                    .ok_or_else(|| decode("NuGet catalog entry", "missing version"))?;
                let listed = entry.get("listed").and_then(Value::as_bool).unwrap_or(true);
                // Unlisted packages carry the 1900-01-01 sentinel as publish date.
                let published = entry
                    .get("published")
                    .and_then(Value::as_str)
                    .and_then(ts)
                    .filter(|t| t.timestamp() > 0);
                out.push((v.to_string(), published, !listed));
            }
        }
        Ok(out)
    }
}
