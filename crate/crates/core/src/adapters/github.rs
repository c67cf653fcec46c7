//! GitHub Advisory Database through the GraphQL API.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::json;

use super::{Adapter, Collected, Ctx, RawArtifact, Skip, SkipReason};
use crate::error::{Error, Result};
use crate::model::{ComponentRef, EcosystemId, NormalizedFinding, ToolId, VersionRef, VulnId};
use crate::transport::Request;
use crate::version::{parse_range, parse_version, satisfies};

pub const GITHUB_GRAPHQL: &str = "https://api.github.com/graphql";

const QUERY: &str =
    "query($ecosystem: SecurityAdvisoryEcosystem!, $package: String!, $after: String) { \
securityVulnerabilities(first: 100, ecosystem: $ecosystem, package: $package, after: $after) { \
nodes { advisory { ghsaId withdrawnAt identifiers { type value } } package { ecosystem name } \
vulnerableVersionRange firstPatchedVersion { identifier } } pageInfo { hasNextPage endCursor } } }";

fn gh_ecosystem(e: EcosystemId) -> &'static str {
    match e {
        EcosystemId::Maven => "MAVEN",
        EcosystemId::Npm => "NPM",
        EcosystemId::NuGet => "NUGET",
        EcosystemId::PyPI => "PIP",
    }
}

/// Name as GitHub spells it; Maven uses `group:artifact`.
fn gh_package(c: &ComponentRef) -> String {
    match &c.group {
        Some(g) => format!("{g}:{}", c.name),
        None => c.name.clone(),
    }
}

#[derive(Debug, Deserialize)]
struct Envelope {
    data: Option<Data>,
    #[serde(default)]
    errors: Vec<serde_json::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Data {
    security_vulnerabilities: Connection,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Connection {
    nodes: Vec<Node>,
    page_info: PageInfo,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct PageInfo {
    has_next_page: bool,
    end_cursor: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Node {
    advisory: Advisory,
    vulnerable_version_range: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Advisory {
    ghsa_id: String,
    withdrawn_at: Option<String>,
    #[serde(default)]
    identifiers: Vec<Identifier>,
}

#[derive(Debug, Clone, Deserialize)]
struct Identifier {
    value: String,
}

pub struct Github;

impl Github {
    fn fetch(
        &self,
        cx: &Ctx<'_>,
        url: &str,
        token: Option<&str>,
        c: &ComponentRef,
        out: &mut Vec<RawArtifact>,
    ) -> Result<Vec<Node>> {
        let mut nodes = Vec::new();
        let mut after: Option<String> = None;
        loop {
            let body = json!({
                "query": QUERY,
                "variables": { "ecosystem": gh_ecosystem(c.ecosystem), "package": gh_package(c), "after": after },
            });
            let mut req = Request::post_json(url, &body)?;
            if let Some(t) = token {
                req = req.header("Authorization", format!("bearer {t}"));
            }
            let text = cx.transport.send_ok(&req)?.text()?.to_string();
            let env: Envelope = serde_json::from_str(&text)
                .map_err(|e| Error::Decode(format!("GitHub GraphQL for {c}: {e}")))?;
            if !env.errors.is_empty() {
                return Err(Error::Execution {
                    tool: ToolId::Github.to_string(),
                    message: format!(
                        "GraphQL errors for {c}: {}",
                        serde_json::Value::from(env.errors)
                    ),
                });
            }
            let conn = env
                .data
                .ok_or_else(|| Error::Decode(format!("GitHub GraphQL for {c}: no data")))?
                .security_vulnerabilities;
            out.push(RawArtifact {
                name: format!("graphql-{:04}.json", out.len()),
                body: text,
            });
            nodes.extend(conn.nodes);
            match (conn.page_info.has_next_page, conn.page_info.end_cursor) {
                (true, Some(cursor)) => after = Some(cursor),
                _ => return Ok(nodes),
            }
        }
    }
}

/// A finding for `(c, v)` iff `v` lies in the node's vulnerable range.
fn evaluate(
    cx: &Ctx<'_>,
    c: &ComponentRef,
    v: &VersionRef,
    node: &Node,
) -> std::result::Result<NormalizedFinding, Skip> {
    let adv = &node.advisory;
    if adv.withdrawn_at.is_some() {
        return Err(Skip::new(SkipReason::Withdrawn, adv.ghsa_id.clone()));
    }
    let version = parse_version(c.ecosystem, &v.raw)
        .map_err(|e| Skip::new(SkipReason::InvalidVersion, e.to_string()))?;
    let range = parse_range(c.ecosystem, &node.vulnerable_version_range)
        .map_err(|e| Skip::new(SkipReason::InvalidRange, format!("{}: {e}", adv.ghsa_id)))?;
    match satisfies(c.ecosystem, &version, &range) {
        Ok(true) => {}
        Ok(false) => {
            return Err(Skip::new(
                SkipReason::NotAffected,
                format!(
                    "{} {} outside {}",
                    adv.ghsa_id, v.raw, node.vulnerable_version_range
                ),
            ))
        }
        Err(e) => return Err(Skip::new(SkipReason::InvalidRange, e.to_string())),
    }
    let mut f = cx.finding(
        c.ecosystem,
        c.clone(),
        v.raw.clone(),
        VulnId::normalized(&adv.ghsa_id),
    );
    f.aliases = adv
        .identifiers
        .iter()
        .map(|i| VulnId::normalized(&i.value))
        .collect();
    f.aliases.remove(&f.vuln);
    Ok(f)
}

impl Adapter for Github {
    fn tool(&self) -> ToolId {
        ToolId::Github
    }

    fn consumes_sbom(&self) -> bool {
        false
    }

    /// Every ground-truth tuple is checked against the advisories GitHub
    /// lists for its package. Listings are fetched once per component.
    fn invoke(&self, cx: &Ctx<'_>) -> Result<Collected> {
        let url = cx.cfg.endpoint.as_deref().unwrap_or(GITHUB_GRAPHQL);
        let token = cx.cfg.required_credential("token", cx.transport)?;
        let mut out = Collected::default();
        let mut listings: BTreeMap<ComponentRef, Vec<Node>> = BTreeMap::new();
        for (c, v) in cx.input.snapshot.component_versions() {
            if !listings.contains_key(&c) {
                let nodes = self.fetch(cx, url, token.as_deref(), &c, &mut out.artifacts)?;
                listings.insert(c.clone(), nodes);
            }
            for node in &listings[&c] {
                out.records.push(evaluate(cx, &c, &v, node));
            }
        }
        Ok(out)
    }
}
