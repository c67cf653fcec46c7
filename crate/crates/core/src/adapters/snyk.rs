//! Snyk CLI, SBOM test mode.
//!
//! Accepts the `snyk test --json` layout: an object (or an array of objects)
//! carrying `packageManager` and `vulnerabilities`, each vulnerability naming
//! `packageName`, `version` and `identifiers.{CVE,GHSA}`.

use serde::Deserialize;
use serde_json::Value;

use super::{Adapter, Collected, Ctx, RawArtifact, Skip, SkipReason};
use crate::error::{Error, Result};
use crate::model::{canonicalize_component, EcosystemId, NormalizedFinding, ToolId, VulnId};
use crate::transport::Request;

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Project {
    #[serde(default)]
    package_manager: Option<String>,
    #[serde(default)]
    vulnerabilities: Vec<Vuln>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Vuln {
    #[serde(default)]
    id: String,
    #[serde(default)]
    package_name: String,
    #[serde(default)]
    version: String,
    #[serde(default)]
    package_manager: Option<String>,
    #[serde(default)]
    identifiers: Identifiers,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
struct Identifiers {
    #[serde(default)]
    cve: Vec<String>,
    #[serde(default)]
    ghsa: Vec<String>,
}

fn manager_ecosystem(m: &str) -> Option<EcosystemId> {
    match m {
        "npm" | "yarn" | "pnpm" => Some(EcosystemId::Npm),
        "pip" | "pipenv" | "poetry" => Some(EcosystemId::PyPI),
        "maven" | "gradle" | "sbt" => Some(EcosystemId::Maven),
        "nuget" | "paket" => Some(EcosystemId::NuGet),
        _ => None,
    }
}

fn normalize(
    cx: &Ctx<'_>,
    manager: Option<&str>,
    v: Vuln,
) -> std::result::Result<NormalizedFinding, Skip> {
    let manager = v.package_manager.as_deref().or(manager).unwrap_or("");
    let eco = manager_ecosystem(manager).ok_or_else(|| {
        Skip::new(
            SkipReason::UnsupportedEcosystem,
            format!("package manager {manager:?}"),
        )
    })?;
    if v.version.is_empty() || v.package_name.is_empty() {
        return Err(Skip::new(
            SkipReason::Malformed,
            format!("{}: no package coordinate", v.id),
        ));
    }
    let c = canonicalize_component(eco, &v.package_name)
        .map_err(|e| Skip::new(SkipReason::InvalidCoordinate, e.to_string()))?;
    let mut ids: Vec<VulnId> = v
        .identifiers
        .ghsa
        .iter()
        .chain(&v.identifiers.cve)
        .map(|s| VulnId::normalized(s))
        .collect();
    if !v.id.trim().is_empty() {
        ids.push(VulnId::normalized(&v.id));
    }
    if ids.is_empty() {
        return Err(Skip::new(
            SkipReason::Malformed,
            format!("{c}@{}: no identifier", v.version),
        ));
    }
    let primary = ids.remove(0);
    let mut f = cx.finding(eco, c, v.version, primary);
    f.aliases = ids.into_iter().collect();
    f.aliases.remove(&f.vuln);
    Ok(f)
}

pub struct Snyk;

impl Adapter for Snyk {
    fn tool(&self) -> ToolId {
        ToolId::Snyk
    }

    fn consumes_sbom(&self) -> bool {
        true
    }

    fn invoke(&self, cx: &Ctx<'_>) -> Result<Collected> {
        let program = cx.cfg.endpoint.as_deref().unwrap_or("snyk");
        let file = cx.sbom_file()?;
        let args: Vec<String> = vec![
            "sbom".into(),
            "test".into(),
            "--experimental".into(),
            format!("--file={}", file.path().display()),
            "--json".into(),
        ];
        let mut req = Request::exec(program, &args, &[3])?;
        if let (Some(token), Some(spec)) = (cx.cfg.credential("token"), req.exec.as_mut()) {
            spec.env.push(("SNYK_TOKEN".into(), token));
        }
        let resp = cx.transport.send(&req)?;
        // 0: nothing found, 1: vulnerabilities found; anything else is a failure.
        if resp.status > 1 {
            return Err(cx.exec_failed(resp.status, resp.headers.get("stderr")));
        }
        let body = resp.text()?.to_string();
        let value: Value =
            serde_json::from_str(&body).map_err(|e| Error::Decode(format!("snyk output: {e}")))?;
        let projects: Vec<Project> = match value {
            Value::Array(items) => items
                .into_iter()
                .map(serde_json::from_value)
                .collect::<std::result::Result<_, _>>(),
            v => serde_json::from_value(v).map(|p| vec![p]),
        }
        .map_err(|e| Error::Decode(format!("snyk output: {e}")))?;
        let mut out = Collected::default();
        for p in projects {
            for v in p.vulnerabilities {
                out.records
                    .push(normalize(cx, p.package_manager.as_deref(), v));
            }
        }
        out.artifacts.push(RawArtifact {
            name: "snyk-output.json".into(),
            body,
        });
        Ok(out)
    }
}
