//! OWASP Dependency-Track REST API: upload the SBOM into a project, wait for
//! server-side analysis, then read the project's findings.
//!
//! Which analyzers run is server configuration; the adapter reports whatever
//! the server has.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::Deserialize;
use serde_json::json;

use super::{Adapter, Collected, Ctx, RawArtifact, Skip, SkipReason};
use crate::error::{Error, Result};
use crate::model::{NormalizedFinding, ToolId, VulnId};
use crate::sbom::{from_purl, PackageUrl};
use crate::transport::{Mode, Request};

#[derive(Debug, Deserialize)]
struct Token {
    token: String,
}

#[derive(Debug, Deserialize)]
struct Processing {
    processing: bool,
}

#[derive(Debug, Deserialize)]
struct Project {
    uuid: String,
}

#[derive(Debug, Deserialize)]
struct Finding {
    component: Component,
    vulnerability: Vulnerability,
}

#[derive(Debug, Deserialize)]
struct Component {
    #[serde(default)]
    purl: Option<String>,
    #[serde(default)]
    name: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Vulnerability {
    #[serde(default)]
    vuln_id: String,
    #[serde(default)]
    aliases: Vec<serde_json::Map<String, serde_json::Value>>,
}

fn normalize(cx: &Ctx<'_>, f: Finding) -> std::result::Result<NormalizedFinding, Skip> {
    let purl = f.component.purl.ok_or_else(|| {
        Skip::new(
            SkipReason::InvalidCoordinate,
            format!("{}: no purl", f.component.name),
        )
    })?;
    let (c, version) = purl
        .parse::<PackageUrl>()
        .and_then(|p| from_purl(&p))
        .map_err(|e| match e {
            Error::Coordinate(m) if m.contains("unsupported purl type") => {
                Skip::new(SkipReason::UnsupportedEcosystem, m)
            }
            e => Skip::new(SkipReason::InvalidCoordinate, format!("{purl}: {e}")),
        })?;
    if f.vulnerability.vuln_id.trim().is_empty() {
        return Err(Skip::new(
            SkipReason::Malformed,
            format!("{purl}: no vulnId"),
        ));
    }
    let mut out = cx.finding(
        c.ecosystem,
        c,
        version,
        VulnId::normalized(&f.vulnerability.vuln_id),
    );
    // Alias objects look like {"cveId": "...", "ghsaId": "..."}.
    for alias in &f.vulnerability.aliases {
        for v in alias.values().filter_map(|v| v.as_str()) {
            out.aliases.insert(VulnId::normalized(v));
        }
    }
    out.aliases.remove(&out.vuln);
    Ok(out)
}

pub struct Dtrack;

impl Adapter for Dtrack {
    fn tool(&self) -> ToolId {
        ToolId::Dtrack
    }

    fn consumes_sbom(&self) -> bool {
        true
    }

    fn invoke(&self, cx: &Ctx<'_>) -> Result<Collected> {
        let base = match (&cx.cfg.endpoint, cx.cfg.credential("url")) {
            (Some(e), _) => e.clone(),
            (None, Some(u)) => u,
            (None, None) => return Err(Error::Config("dtrack: set endpoint or DTRACK_URL".into())),
        };
        let base = base.trim_end_matches('/');
        let key = cx.cfg.required_credential("api_key", cx.transport)?;
        let auth = |r: Request| match &key {
            Some(k) => r.header("X-Api-Key", k.clone()),
            None => r,
        };
        let t = cx.transport;
        let name = format!("scabench-{}", cx.input.snapshot.digest_prefix());

        let upload = auth(Request::put_json(
            format!("{base}/api/v1/bom"),
            &json!({
                "projectName": name,
                "projectVersion": "1",
                "autoCreate": true,
                "bom": B64.encode(cx.input.sbom),
            }),
        )?);
        let token: Token = t.send_ok(&upload)?.parse_json()?;

        let mut polls = 0;
        loop {
            let status: Processing = t
                .send_ok(&auth(Request::get(format!(
                    "{base}/api/v1/bom/token/{}",
                    token.token
                ))))?
                .parse_json()?;
            if !status.processing {
                break;
            }
            polls += 1;
            if polls >= cx.cfg.max_polls {
                return Err(Error::Execution {
                    tool: "dtrack".into(),
                    message: format!("BOM still processing after {polls} polls"),
                });
            }
            if t.mode() != Mode::Replay {
                std::thread::sleep(Duration::from_millis(cx.cfg.poll_interval_ms));
            }
        }

        let project: Project = t
            .send_ok(&auth(Request::get(format!(
                "{base}/api/v1/project/lookup?name={name}&version=1"
            ))))?
            .parse_json()?;
        let resp = t.send_ok(&auth(Request::get(format!(
            "{base}/api/v1/finding/project/{}",
            project.uuid
        ))))?;
        let body = resp.text()?.to_string();
        let findings: Vec<Finding> = serde_json::from_str(&body)
            .map_err(|e| Error::Decode(format!("dtrack findings: {e}")))?;
        Ok(Collected {
            records: findings.into_iter().map(|f| normalize(cx, f)).collect(),
            artifacts: vec![RawArtifact {
                name: "findings.json".into(),
                body,
            }],
        })
    }
}
