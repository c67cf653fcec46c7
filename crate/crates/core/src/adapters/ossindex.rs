//! Sonatype OSS Index component-report API.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::Deserialize;
use serde_json::json;

use super::{Adapter, Collected, Ctx, RawArtifact, Skip, SkipReason};
use crate::error::{Error, Result};
use crate::model::{ToolId, VulnId};
use crate::sbom::{from_purl, parse_sbom_purls, PackageUrl};
use crate::transport::{map_bounded, Request};

pub const OSSINDEX_API: &str = "https://ossindex.sonatype.org";
pub(super) const DEFAULT_BATCH: usize = 128;
const IN_FLIGHT: usize = 4;

#[derive(Debug, Deserialize)]
struct Report {
    coordinates: String,
    #[serde(default)]
    vulnerabilities: Vec<Vuln>,
}

#[derive(Debug, Deserialize)]
struct Vuln {
    #[serde(default)]
    id: String,
    #[serde(default)]
    cve: Option<String>,
}

pub struct OssIndex;

impl Adapter for OssIndex {
    fn tool(&self) -> ToolId {
        ToolId::OssIndex
    }

    fn consumes_sbom(&self) -> bool {
        true
    }

    fn invoke(&self, cx: &Ctx<'_>) -> Result<Collected> {
        let base = cx
            .cfg
            .endpoint
            .as_deref()
            .unwrap_or(OSSINDEX_API)
            .trim_end_matches('/');
        let url = format!("{base}/api/v3/component-report");
        let auth = match (cx.cfg.credential("user"), cx.cfg.credential("token")) {
            (Some(u), Some(t)) => Some(format!("Basic {}", B64.encode(format!("{u}:{t}")))),
            _ => None,
        };
        let coordinates: Vec<String> = parse_sbom_purls(cx.input.sbom)?
            .iter()
            .map(PackageUrl::to_string)
            .collect();
        let batches: Vec<&[String]> = coordinates
            .chunks(cx.cfg.batch_size.unwrap_or(DEFAULT_BATCH))
            .collect();
        let responses = map_bounded(&batches, IN_FLIGHT, |batch| -> Result<String> {
            let mut req = Request::post_json(&url, &json!({ "coordinates": batch }))?;
            if let Some(a) = &auth {
                req = req.header("Authorization", a.clone());
            }
            Ok(cx.transport.send_ok(&req)?.text()?.to_string())
        });

        let mut out = Collected::default();
        for (i, body) in responses.into_iter().enumerate() {
            let body = body?;
            let reports: Vec<Report> = serde_json::from_str(&body)
                .map_err(|e| Error::Decode(format!("OSS Index batch {i}: {e}")))?;
            for r in reports {
                let coord = r
                    .coordinates
                    .parse::<PackageUrl>()
                    .and_then(|p| from_purl(&p));
                for v in r.vulnerabilities {
                    out.records.push(normalize(cx, &r.coordinates, &coord, v));
                }
            }
            out.artifacts.push(RawArtifact {
                name: format!("component-report-{i:03}.json"),
                body,
            });
        }
        Ok(out)
    }
}

fn normalize(
    cx: &Ctx<'_>,
    raw: &str,
    coord: &Result<(crate::model::ComponentRef, String)>,
    v: Vuln,
) -> std::result::Result<crate::model::NormalizedFinding, Skip> {
    let (c, version) = match coord {
        Ok(x) => x.clone(),
        Err(e) => {
            return Err(Skip::new(
                SkipReason::InvalidCoordinate,
                format!("{raw}: {e}"),
            ))
        }
    };
    let id = match (v.id.trim(), v.cve.as_deref().map(str::trim)) {
        ("", Some(cve)) if !cve.is_empty() => cve.to_string(),
        ("", _) => {
            return Err(Skip::new(
                SkipReason::Malformed,
                format!("{raw}: vulnerability without id"),
            ))
        }
        (id, _) => id.to_string(),
    };
    let mut f = cx.finding(c.ecosystem, c, version, VulnId::normalized(&id));
    if let Some(cve) = v.cve.filter(|s| !s.trim().is_empty()) {
        f.aliases.insert(VulnId::normalized(&cve));
    }
    f.aliases.remove(&f.vuln);
    Ok(f)
}
