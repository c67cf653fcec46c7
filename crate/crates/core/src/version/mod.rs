//! Per-ecosystem version parsing, ordering and range evaluation.
//!
//! * npm: SemVer 2.0 (a leading `v`/`=` is tolerated, missing minor/patch
//!   components default to zero).
//! * PyPI: the Python packaging version grammar.
//! * Maven: `ComparableVersion` semantics.
//! * NuGet: SemVer 2.0 with the legacy four-part numeric form.
//!
//! Whether a pre-release belongs to a range is answered purely by ordering;
//! filtering pre-releases out is a policy decision left to callers.

mod maven;
mod pep440;
mod range;
mod semver;

use std::cmp::Ordering;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::EcosystemId;

pub use range::{parse_range, satisfies, Comparator, Op, VersionRange};

/// One identifier of a pre-release tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TagPart {
    Num(u64),
    Text(String),
}

impl TagPart {
    fn from_ident(s: &str) -> Self {
        if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(n) = s.parse() {
                return TagPart::Num(n);
            }
        }
        TagPart::Text(s.to_string())
    }
}

impl fmt::Display for TagPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TagPart::Num(n) => write!(f, "{n}"),
            TagPart::Text(s) => f.write_str(s),
        }
    }
}

impl Serialize for TagPart {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TagPart::Num(n) => s.serialize_u64(*n),
            TagPart::Text(t) => s.serialize_str(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Repr {
    Npm(semver::SemVer),
    NuGet(semver::SemVer),
    PyPI(pep440::Pep440),
    Maven(Vec<maven::Item>),
}

/// A version string parsed under its ecosystem's grammar.
#[derive(Debug, Clone, Serialize)]
pub struct ParsedVersion {
    pub ecosystem: EcosystemId,
    pub release_segments: Vec<u64>,
    pub prerelease_tag: Option<Vec<TagPart>>,
    /// Build metadata or local label; never used for ordering except PyPI
    /// local labels, which the packaging rules do order.
    pub metadata: Option<String>,
    pub raw: String,
    #[serde(skip)]
    repr: Repr,
}

impl PartialEq for ParsedVersion {
    fn eq(&self, other: &Self) -> bool {
        self.ecosystem == other.ecosystem && compare_same(self, other) == Ordering::Equal
    }
}

impl fmt::Display for ParsedVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

pub fn parse_version(ecosystem: EcosystemId, s: &str) -> Result<ParsedVersion> {
    let err = |reason: String| Error::VersionParse {
        ecosystem,
        input: s.to_string(),
        reason,
    };
    if s.trim().is_empty() {
        return Err(err("empty version".into()));
    }
    let parsed = match ecosystem {
        EcosystemId::Npm | EcosystemId::NuGet => {
            let dialect = if ecosystem == EcosystemId::Npm {
                semver::Dialect::Npm
            } else {
                semver::Dialect::NuGet
            };
            let v = semver::parse(s, dialect).map_err(err)?;
            ParsedVersion {
                ecosystem,
                release_segments: v.core.clone(),
                prerelease_tag: (!v.pre.is_empty()).then(|| v.pre.clone()),
                metadata: v.build.clone(),
                raw: s.to_string(),
                repr: if dialect == semver::Dialect::Npm {
                    Repr::Npm(v)
                } else {
                    Repr::NuGet(v)
                },
            }
        }
        EcosystemId::PyPI => {
            let v = pep440::parse(s).map_err(err)?;
            let mut tag = Vec::new();
            if let Some((l, n)) = &v.pre {
                tag.push(TagPart::Text(l.clone()));
                tag.push(TagPart::Num(*n));
            }
            if let Some(n) = v.dev {
                tag.push(TagPart::Text("dev".into()));
                tag.push(TagPart::Num(n));
            }
            let metadata = v.local.as_ref().map(|_| {
                let rendered = pep440::render(&v);
                rendered
                    .split_once('+')
                    .map(|(_, l)| l.to_string())
                    .unwrap_or_default()
            });
            ParsedVersion {
                ecosystem,
                release_segments: v.release.clone(),
                prerelease_tag: (!tag.is_empty()).then_some(tag),
                metadata,
                raw: s.to_string(),
                repr: Repr::PyPI(v),
            }
        }
        EcosystemId::Maven => {
            let items = maven::parse(s).map_err(err)?;
            let quals = maven::prerelease_qualifiers(&items);
            ParsedVersion {
                ecosystem,
                release_segments: maven::release_segments(&items),
                prerelease_tag: (!quals.is_empty())
                    .then(|| quals.into_iter().map(TagPart::Text).collect()),
                metadata: None,
                raw: s.to_string(),
                repr: Repr::Maven(items),
            }
        }
    };
    Ok(parsed)
}

fn compare_same(a: &ParsedVersion, b: &ParsedVersion) -> Ordering {
    match (&a.repr, &b.repr) {
        (Repr::Npm(x), Repr::Npm(y)) => semver::compare(x, y, semver::Dialect::Npm),
        (Repr::NuGet(x), Repr::NuGet(y)) => semver::compare(x, y, semver::Dialect::NuGet),
        (Repr::PyPI(x), Repr::PyPI(y)) => pep440::compare(x, y),
        (Repr::Maven(x), Repr::Maven(y)) => maven::cmp_lists(x, y),
        _ => unreachable!("ecosystems checked by caller"),
    }
}

/// Total order within one ecosystem.
pub fn compare(ecosystem: EcosystemId, a: &ParsedVersion, b: &ParsedVersion) -> Result<Ordering> {
    if a.ecosystem != ecosystem || b.ecosystem != ecosystem {
        return Err(Error::Usage(format!(
            "cannot compare {} version {} with {} version {} under {ecosystem}",
            a.ecosystem, a.raw, b.ecosystem, b.raw
        )));
    }
    Ok(compare_same(a, b))
}

pub fn is_prerelease(ecosystem: EcosystemId, v: &ParsedVersion) -> bool {
    debug_assert_eq!(ecosystem, v.ecosystem);
    match &v.repr {
        Repr::PyPI(p) => p.is_prerelease(),
        _ => v.prerelease_tag.is_some(),
    }
}

/// Normalized text that reparses to an equal version.
pub fn render(v: &ParsedVersion) -> String {
    match &v.repr {
        Repr::Npm(s) | Repr::NuGet(s) => semver::render(s),
        Repr::PyPI(p) => pep440::render(p),
        Repr::Maven(items) => maven::render(items),
    }
}

/// Parses and compares two raw strings; convenience for sorting listings.
pub fn compare_raw(ecosystem: EcosystemId, a: &str, b: &str) -> Result<Ordering> {
    compare(
        ecosystem,
        &parse_version(ecosystem, a)?,
        &parse_version(ecosystem, b)?,
    )
}
