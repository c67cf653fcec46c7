//! OSV v1 client: `querybatch` for affectedness, `vulns/{id}` for aliases.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::model::{ComponentRef, EcosystemId, VersionRef, VulnId};
use crate::transport::{map_bounded, Request, Transport};

pub const OSV_API: &str = "https://api.osv.dev";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsvVulnRecord {
    pub id: VulnId,
    #[serde(default)]
    pub aliases: BTreeSet<VulnId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modified: Option<String>,
    /// `affected` array exactly as returned.
    #[serde(default)]
    pub affected: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OsvBatchResult {
    pub component: ComponentRef,
    pub version: VersionRef,
    pub vulns: Vec<OsvVulnRecord>,
}

#[derive(Debug, Clone)]
pub struct OsvClient {
    transport: Transport,
    pub base_url: String,
    pub batch_size: usize,
    pub concurrency: usize,
}

pub fn osv_ecosystem(e: EcosystemId) -> &'static str {
    match e {
        EcosystemId::Maven => "Maven",
        EcosystemId::Npm => "npm",
        EcosystemId::NuGet => "NuGet",
        EcosystemId::PyPI => "PyPI",
    }
}

fn package_json(c: &ComponentRef) -> Value {
    json!({ "name": c.to_string(), "ecosystem": osv_ecosystem(c.ecosystem) })
}

#[derive(Deserialize)]
struct BatchResponse {
    #[serde(default)]
    results: Vec<BatchResult>,
}

#[derive(Deserialize)]
struct BatchResult {
    #[serde(default)]
    vulns: Vec<IdOnly>,
    #[serde(default)]
    next_page_token: Option<String>,
}

#[derive(Deserialize)]
struct IdOnly {
    id: String,
}

#[derive(Deserialize)]
struct FullRecord {
    id: String,
    #[serde(default)]
    aliases: Vec<String>,
    #[serde(default)]
    modified: Option<String>,
    #[serde(default)]
    affected: Vec<Value>,
}

impl From<FullRecord> for OsvVulnRecord {
    fn from(r: FullRecord) -> Self {
        let id = VulnId::normalized(&r.id);
        OsvVulnRecord {
            aliases: r
                .aliases
                .iter()
                .map(|a| VulnId::normalized(a))
                .filter(|a| *a != id)
                .collect(),
            id,
            modified: r.modified,
            affected: r.affected,
        }
    }
}

#[derive(Deserialize)]
struct QueryResponse {
    #[serde(default)]
    vulns: Vec<FullRecord>,
    #[serde(default)]
    next_page_token: Option<String>,
}

impl OsvClient {
    pub fn new(transport: Transport) -> Self {
        OsvClient {
            transport,
            base_url: OSV_API.into(),
            batch_size: 100,
            concurrency: 4,
        }
    }

    /// Affecting vulnerabilities for each `(component, version)`, aligned with
    /// the input. Batches of `batch_size` are sent to `querybatch`; items that
    /// come back with a page token are re-queried until exhausted. Alias sets
    /// are filled from one `vulns/{id}` lookup per distinct id.
    pub fn query_batch(&self, items: &[(ComponentRef, VersionRef)]) -> Result<Vec<OsvBatchResult>> {
        if items.is_empty() {
            return Err(Error::Usage(
                "OSV batch query needs at least one item".into(),
            ));
        }
        let mut ids: Vec<Vec<String>> = vec![Vec::new(); items.len()];
        let mut pending: Vec<(usize, Option<String>)> =
            (0..items.len()).map(|i| (i, None)).collect();
        while !pending.is_empty() {
            let mut next = Vec::new();
            for chunk in pending.chunks(self.batch_size.max(1)) {
                let queries: Vec<Value> = chunk
                    .iter()
                    .map(|(i, token)| {
                        let (c, v) = &items[*i];
                        let mut q = json!({ "package": package_json(c), "version": v.raw });
                        if let Some(t) = token {
                            q["page_token"] = json!(t);
                        }
                        q
                    })
                    .collect();
                let req = Request::post_json(
                    format!("{}/v1/querybatch", self.base_url),
                    &json!({ "queries": queries }),
                )?;
                let resp: BatchResponse = self.transport.send_ok(&req)?.parse_json()?;
                if resp.results.len() != chunk.len() {
                    return Err(Error::Decode(format!(
                        "querybatch returned {} results for {} queries",
                        resp.results.len(),
                        chunk.len()
                    )));
                }
                for ((i, _), r) in chunk.iter().zip(resp.results) {
                    ids[*i].extend(r.vulns.into_iter().map(|v| v.id));
                    if let Some(t) = r.next_page_token.filter(|t| !t.is_empty()) {
                        next.push((*i, Some(t)));
                    }
                }
            }
            pending = next;
        }

        let distinct: Vec<String> = ids
            .iter()
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let fetched = map_bounded(&distinct, self.concurrency, |id| self.get_vuln(id));
        let mut cache = BTreeMap::new();
        for (id, rec) in distinct.into_iter().zip(fetched) {
            cache.insert(id, rec?);
        }

        Ok(items
            .iter()
            .zip(ids)
            .map(|((c, v), item_ids)| {
                let mut seen = BTreeSet::new();
                let vulns = item_ids
                    .iter()
                    .filter(|id| seen.insert(id.to_string()))
                    .map(|id| cache[id].clone())
                    .collect();
                OsvBatchResult {
                    component: c.clone(),
                    version: v.clone(),
                    vulns,
                }
            })
            .collect())
    }

    pub fn get_vuln(&self, id: &str) -> Result<OsvVulnRecord> {
        let req = Request::get(format!("{}/v1/vulns/{id}", self.base_url));
        let rec: FullRecord = self.transport.send_ok(&req)?.parse_json()?;
        Ok(rec.into())
    }

    /// Single-package `query` endpoint, following pagination.
    pub fn query_one(
        &self,
        component: &ComponentRef,
        version: &VersionRef,
    ) -> Result<Vec<OsvVulnRecord>> {
        let mut out = Vec::new();
        let mut token: Option<String> = None;
        loop {
            let mut body = json!({ "package": package_json(component), "version": version.raw });
            if let Some(t) = &token {
                body["page_token"] = json!(t);
            }
            let req = Request::post_json(format!("{}/v1/query", self.base_url), &body)?;
            let resp: QueryResponse = self.transport.send_ok(&req)?.parse_json()?;
            out.extend(resp.vulns.into_iter().map(OsvVulnRecord::from));
            match resp.next_page_token.filter(|t| !t.is_empty()) {
                Some(t) => token = Some(t),
                None => break,
            }
        }
        Ok(out)
    }
}
