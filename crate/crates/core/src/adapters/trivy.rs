//! Trivy CLI in SBOM mode.

use serde::Deserialize;

use super::{Adapter, Collected, Ctx, RawArtifact, Skip, SkipReason};
use crate::error::{Error, Result};
use crate::model::{
    canonicalize_component, EcosystemId, MatchBasis, NormalizedFinding, ToolId, VulnId,
};
use crate::sbom::{from_purl, PackageUrl};
use crate::transport::Request;
use crate::version::{compare, parse_version};

#[derive(Debug, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct Report {
    #[serde(default)]
    results: Vec<TrivyResult>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct TrivyResult {
    #[serde(default, rename = "Type")]
    ty: String,
    #[serde(default)]
    vulnerabilities: Vec<Vuln>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct Vuln {
    #[serde(rename = "VulnerabilityID", default)]
    vulnerability_id: String,
    #[serde(default)]
    pkg_name: String,
    #[serde(default)]
    pkg_identifier: Option<PkgIdentifier>,
    #[serde(default)]
    installed_version: String,
    #[serde(default)]
    fixed_version: Option<String>,
    #[serde(rename = "VendorIDs", default)]
    vendor_ids: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct PkgIdentifier {
    #[serde(rename = "PURL")]
    purl: Option<String>,
}

fn result_ecosystem(ty: &str) -> Option<EcosystemId> {
    match ty {
        "npm" | "node-pkg" | "yarn" | "pnpm" => Some(EcosystemId::Npm),
        "pip" | "python-pkg" | "pipenv" | "poetry" => Some(EcosystemId::PyPI),
        "jar" | "pom" | "gradle" | "sbt" => Some(EcosystemId::Maven),
        "nuget" | "dotnet-core" | "packages-props" => Some(EcosystemId::NuGet),
        _ => None,
    }
}

/// Smallest fixed version strictly above `installed`, as the interval
/// `<F`. Trivy lists one fixed version per release line, comma separated.
pub(super) fn affected_from_fixed(
    eco: EcosystemId,
    installed: &str,
    fixed: &str,
) -> Option<String> {
    let inst = parse_version(eco, installed).ok()?;
    fixed
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .filter_map(|s| parse_version(eco, s).ok())
        .filter(|f| compare(eco, f, &inst).is_ok_and(|o| o.is_gt()))
        .min_by(|a, b| compare(eco, a, b).unwrap_or(std::cmp::Ordering::Equal))
        .map(|f| format!("<{}", f.raw))
}

fn normalize(cx: &Ctx<'_>, ty: &str, v: Vuln) -> std::result::Result<NormalizedFinding, Skip> {
    if v.vulnerability_id.trim().is_empty() {
        return Err(Skip::new(
            SkipReason::Malformed,
            format!("{}: no VulnerabilityID", v.pkg_name),
        ));
    }
    let purl = v.pkg_identifier.and_then(|p| p.purl);
    let (c, version) = match purl {
        Some(p) => p
            .parse::<PackageUrl>()
            .and_then(|u| from_purl(&u))
            .map_err(|e| match e {
                Error::Coordinate(m) if m.contains("unsupported purl type") => {
                    Skip::new(SkipReason::UnsupportedEcosystem, m)
                }
                e => Skip::new(SkipReason::InvalidCoordinate, format!("{p}: {e}")),
            })?,
        None => {
            let eco = result_ecosystem(ty).ok_or_else(|| {
                Skip::new(
                    SkipReason::UnsupportedEcosystem,
                    format!("result type {ty:?}"),
                )
            })?;
            let c = canonicalize_component(eco, &v.pkg_name)
                .map_err(|e| Skip::new(SkipReason::InvalidCoordinate, e.to_string()))?;
            (c, v.installed_version.clone())
        }
    };
    let eco = c.ecosystem;
    let installed = if v.installed_version.is_empty() {
        version
    } else {
        v.installed_version.clone()
    };
    let mut f = cx.finding(
        eco,
        c,
        installed.clone(),
        VulnId::normalized(&v.vulnerability_id),
    );
    f.aliases = v.vendor_ids.iter().map(|s| VulnId::normalized(s)).collect();
    f.aliases.remove(&f.vuln);
    if let Some(range) = v
        .fixed_version
        .as_deref()
        .and_then(|fx| affected_from_fixed(eco, &installed, fx))
    {
        f.basis = MatchBasis::Range;
        f.affected = Some(range);
    }
    Ok(f)
}

pub struct Trivy;

impl Adapter for Trivy {
    fn tool(&self) -> ToolId {
        ToolId::Trivy
    }

    fn consumes_sbom(&self) -> bool {
        true
    }

    fn invoke(&self, cx: &Ctx<'_>) -> Result<Collected> {
        let program = cx.cfg.endpoint.as_deref().unwrap_or("trivy");
        let file = cx.sbom_file()?;
        let args: Vec<String> = vec![
            "sbom".into(),
            "--format".into(),
            "json".into(),
            file.path().display().to_string(),
        ];
        let resp = cx.transport.send(&Request::exec(program, &args, &[3])?)?;
        if resp.status != 0 {
            return Err(cx.exec_failed(resp.status, resp.headers.get("stderr")));
        }
        let body = resp.text()?.to_string();
        let report: Report =
            serde_json::from_str(&body).map_err(|e| Error::Decode(format!("trivy report: {e}")))?;
        let mut out = Collected::default();
        for r in report.results {
            for v in r.vulnerabilities {
                out.records.push(normalize(cx, &r.ty, v));
            }
        }
        out.artifacts.push(RawArtifact {
            name: "trivy-report.json".into(),
            body,
        });
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_version_becomes_upper_bound() {
        let e = EcosystemId::Npm;
        assert_eq!(
            affected_from_fixed(e, "1.4.0", "1.4.2").as_deref(),
            Some("<1.4.2")
        );
        assert_eq!(
            affected_from_fixed(e, "2.1.0", "1.4.2, 2.3.0, 2.2.1").as_deref(),
            Some("<2.2.1")
        );
        assert_eq!(affected_from_fixed(e, "3.0.0", "1.4.2"), None);
        assert_eq!(affected_from_fixed(e, "1.0.0", ""), None);
        assert_eq!(
            affected_from_fixed(EcosystemId::Maven, "5.3.18", "5.3.27, 6.0.8").as_deref(),
            Some("<5.3.27")
        );
    }
}
