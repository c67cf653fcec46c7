//! CycloneDX 1.5 JSON documents for snapshot component-versions.

use std::collections::BTreeMap;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use super::purl::{to_purl, PackageUrl};
use crate::error::{Error, Result};
use crate::groundtruth::Snapshot;

pub const SPEC_VERSION: &str = "1.5";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Bom {
    pub bom_format: String,
    pub spec_version: String,
    pub serial_number: String,
    pub version: u32,
    pub metadata: Metadata,
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub timestamp: String,
    pub tools: Tools,
    pub component: Component,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tools {
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    #[serde(rename = "type")]
    pub ty: String,
    #[serde(rename = "bom-ref", default, skip_serializing_if = "Option::is_none")]
    pub bom_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purl: Option<String>,
}

/// Serial number derived from the snapshot digest.
pub fn serial_number(digest: &str) -> String {
    let id = Uuid::new_v5(
        &Uuid::NAMESPACE_URL,
        format!("urn:scabench:snapshot:{digest}").as_bytes(),
    );
    format!("urn:uuid:{id}")
}

/// Latest release timestamp in the snapshot, or the Unix epoch when no entry
/// carries one. Never the wall clock.
fn document_timestamp(s: &Snapshot) -> DateTime<Utc> {
    s.entries
        .iter()
        .filter_map(|e| e.version.released_at)
        .max()
        .unwrap_or(DateTime::UNIX_EPOCH)
}

pub fn build_bom(s: &Snapshot) -> Result<Bom> {
    if s.entries.is_empty() {
        return Err(Error::Usage(
            "cannot emit an SBOM for an empty snapshot".into(),
        ));
    }
    let mut by_purl: BTreeMap<String, Component> = BTreeMap::new();
    for (c, v) in s.component_versions() {
        let purl = to_purl(&c, &v)?;
        let text = purl.to_string();
        by_purl.entry(text.clone()).or_insert(Component {
            ty: "library".into(),
            bom_ref: Some(text.clone()),
            group: purl.namespace.clone(),
            name: purl.name.clone(),
            version: Some(v.raw.clone()),
            purl: Some(text),
        });
    }
    Ok(Bom {
        bom_format: "CycloneDX".into(),
        spec_version: SPEC_VERSION.into(),
        serial_number: serial_number(&s.digest),
        version: 1,
        metadata: Metadata {
            timestamp: document_timestamp(s).to_rfc3339_opts(SecondsFormat::Secs, true),
            tools: Tools {
                components: vec![Component {
                    ty: "application".into(),
                    bom_ref: None,
                    group: None,
                    name: "scabench".into(),
                    version: Some(env!("CARGO_PKG_VERSION").into()),
                    purl: None,
                }],
            },
            component: Component {
                ty: "application".into(),
                bom_ref: Some(format!("snapshot-{}", s.digest_prefix())),
                group: None,
                name: "scabench-ground-truth".into(),
                version: Some(s.digest_prefix().into()),
                purl: None,
            },
        },
        components: by_purl.into_values().collect(),
    })
}

/// Pretty-printed document bytes. Identical snapshots give identical bytes.
pub fn emit_sbom(s: &Snapshot) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(&build_bom(s)?)?;
    out.push(b'\n');
    Ok(out)
}

pub fn sbom_file_name(s: &Snapshot) -> String {
    format!("sbom-{}.cdx.json", s.digest_prefix())
}

/// Component purls of a CycloneDX JSON document.
pub fn parse_sbom_purls(bytes: &[u8]) -> Result<Vec<PackageUrl>> {
    let bom: Bom =
        serde_json::from_slice(bytes).map_err(|e| Error::Decode(format!("CycloneDX: {e}")))?;
    bom.components
        .iter()
        .filter_map(|c| c.purl.as_deref())
        .map(str::parse)
        .collect()
}
