//! Package URLs: `pkg:type/namespace/name@version?qualifiers#subpath`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};

use crate::error::{Error, Result};
use crate::model::{canonicalize_component, ComponentRef, EcosystemId, VersionRef};

const COMPONENT: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~')
    .remove(b':');

const QUALIFIER_VALUE: &AsciiSet = &COMPONENT.remove(b'/');

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PackageUrl {
    pub ty: String,
    pub namespace: Option<String>,
    pub name: String,
    pub version: Option<String>,
    pub qualifiers: BTreeMap<String, String>,
    pub subpath: Option<String>,
}

fn invalid(input: &str, why: &str) -> Error {
    Error::Coordinate(format!("invalid purl {input:?}: {why}"))
}

fn decode(s: &str) -> String {
    percent_decode_str(s).decode_utf8_lossy().into_owned()
}

fn encode(s: &str, set: &'static AsciiSet) -> String {
    utf8_percent_encode(s, set).to_string()
}

fn valid_type(t: &str) -> bool {
    let mut chars = t.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '+' | '-'))
}

fn valid_qualifier_key(k: &str) -> bool {
    !k.is_empty()
        && !k.starts_with(|c: char| c.is_ascii_digit())
        && k.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_'))
}

impl PackageUrl {
    pub fn new(
        ty: &str,
        namespace: Option<&str>,
        name: &str,
        version: Option<&str>,
    ) -> Result<Self> {
        let p = PackageUrl {
            ty: ty.to_ascii_lowercase(),
            namespace: namespace.map(str::to_string).filter(|n| !n.is_empty()),
            name: name.to_string(),
            version: version.map(str::to_string),
            qualifiers: BTreeMap::new(),
            subpath: None,
        };
        if !valid_type(&p.ty) {
            return Err(invalid(ty, "bad type"));
        }
        if p.name.is_empty() {
            return Err(invalid(name, "empty name"));
        }
        Ok(p.normalized())
    }

    /// Type-specific case and separator rules.
    fn normalized(mut self) -> Self {
        match self.ty.as_str() {
            "pypi" => self.name = self.name.to_lowercase().replace('_', "-"),
            "npm" => {
                self.name = self.name.to_lowercase();
                self.namespace = self.namespace.map(|n| n.to_lowercase());
            }
            _ => {}
        }
        self
    }
}

impl FromStr for PackageUrl {
    type Err = Error;

    fn from_str(input: &str) -> Result<Self> {
        let rest = input
            .strip_prefix("pkg:")
            .ok_or_else(|| invalid(input, "missing pkg: scheme"))?
            .trim_start_matches('/');

        let (rest, subpath) = match rest.split_once('#') {
            Some((r, s)) => {
                let segs: Vec<String> = s
                    .split('/')
                    .filter(|p| !p.is_empty() && *p != "." && *p != "..")
                    .map(decode)
                    .collect();
                (r, (!segs.is_empty()).then(|| segs.join("/")))
            }
            None => (rest, None),
        };

        let (rest, qualifiers) = match rest.split_once('?') {
            Some((r, q)) => {
                let mut map = BTreeMap::new();
                for pair in q.split('&').filter(|p| !p.is_empty()) {
                    let (k, v) = pair
                        .split_once('=')
                        .ok_or_else(|| invalid(input, "qualifier without '='"))?;
                    let k = k.to_ascii_lowercase();
                    if !valid_qualifier_key(&k) {
                        return Err(invalid(input, "bad qualifier key"));
                    }
                    let v = decode(v);
                    if !v.is_empty() {
                        map.insert(k, v);
                    }
                }
                (r, map)
            }
            None => (rest, BTreeMap::new()),
        };

        let (ty, path) = rest
            .split_once('/')
            .ok_or_else(|| invalid(input, "missing type"))?;
        let ty = ty.to_ascii_lowercase();
        if !valid_type(&ty) {
            return Err(invalid(input, "bad type"));
        }

        let path = path.trim_matches('/');
        // The version separator is the last '@' after the last '/'; an
        // earlier one is an unencoded npm scope.
        let last_slash = path.rfind('/').map_or(0, |i| i + 1);
        let (path, version) = match path[last_slash..].rfind('@') {
            Some(i) => (
                &path[..last_slash + i],
                Some(decode(&path[last_slash + i + 1..])),
            ),
            None => (path, None),
        };
        let mut segs: Vec<String> = path
            .split('/')
            .filter(|s| !s.is_empty())
            .map(decode)
            .collect();
        let name = segs
            .pop()
            .filter(|n| !n.is_empty())
            .ok_or_else(|| invalid(input, "missing name"))?;
        let namespace = (!segs.is_empty()).then(|| segs.join("/"));

        Ok(PackageUrl {
            ty,
            namespace,
            name,
            version: version.filter(|v| !v.is_empty()),
            qualifiers,
            subpath,
        }
        .normalized())
    }
}

impl fmt::Display for PackageUrl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pkg:{}/", self.ty)?;
        if let Some(ns) = &self.namespace {
            for seg in ns.split('/').filter(|s| !s.is_empty()) {
                write!(f, "{}/", encode(seg, COMPONENT))?;
            }
        }
        f.write_str(&encode(&self.name, COMPONENT))?;
        if let Some(v) = &self.version {
            write!(f, "@{}", encode(v, COMPONENT))?;
        }
        if !self.qualifiers.is_empty() {
            let q: Vec<String> = self
                .qualifiers
                .iter()
                .map(|(k, v)| format!("{k}={}", encode(v, QUALIFIER_VALUE)))
                .collect();
            write!(f, "?{}", q.join("&"))?;
        }
        if let Some(s) = &self.subpath {
            let segs: Vec<String> = s.split('/').map(|p| encode(p, COMPONENT)).collect();
            write!(f, "#{}", segs.join("/"))?;
        }
        Ok(())
    }
}

/// purl of a ground-truth coordinate.
pub fn to_purl(c: &ComponentRef, v: &VersionRef) -> Result<PackageUrl> {
    let (namespace, name) = match c.ecosystem {
        EcosystemId::Maven => {
            let g = c
                .group
                .as_deref()
                .ok_or_else(|| Error::Coordinate(format!("Maven component {c} has no group")))?;
            (Some(g), c.name.as_str())
        }
        EcosystemId::Npm => match c.name.strip_prefix('@').and_then(|s| s.split_once('/')) {
            Some((scope, name)) => (Some(&c.name[..scope.len() + 1]), name),
            None => (None, c.name.as_str()),
        },
        EcosystemId::NuGet | EcosystemId::PyPI => (None, c.name.as_str()),
    };
    PackageUrl::new(c.ecosystem.purl_type(), namespace, name, Some(&v.raw))
}

/// The `(component, version)` a purl names, for the four supported types.
pub fn from_purl(p: &PackageUrl) -> Result<(ComponentRef, String)> {
    let eco = EcosystemId::from_purl_type(&p.ty)
        .ok_or_else(|| Error::Coordinate(format!("unsupported purl type {:?}", p.ty)))?;
    let raw = match (eco, &p.namespace) {
        (EcosystemId::Maven, Some(ns)) => format!("{ns}:{}", p.name),
        (EcosystemId::Maven, None) => {
            return Err(Error::Coordinate(format!(
                "Maven purl {p} has no namespace"
            )))
        }
        (EcosystemId::Npm, Some(ns)) => format!("{ns}/{}", p.name),
        (_, _) => p.name.clone(),
    };
    let version = p
        .version
        .clone()
        .ok_or_else(|| Error::Coordinate(format!("purl {p} has no version")))?;
    Ok((canonicalize_component(eco, &raw)?, version))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(e: EcosystemId, n: &str, v: &str) -> String {
        to_purl(&canonicalize_component(e, n).unwrap(), &VersionRef::new(v))
            .unwrap()
            .to_string()
    }

    #[test]
    fn coordinate_examples() {
        assert_eq!(
            cv(
                EcosystemId::Maven,
                "org.springframework:spring-expression",
                "5.3.0"
            ),
            "pkg:maven/org.springframework/spring-expression@5.3.0"
        );
        assert_eq!(cv(EcosystemId::Npm, "vite", "0.1.0"), "pkg:npm/vite@0.1.0");
        assert_eq!(
            cv(EcosystemId::PyPI, "requests", "2.31.0"),
            "pkg:pypi/requests@2.31.0"
        );
        assert_eq!(
            cv(EcosystemId::Npm, "@babel/core", "7.0.0"),
            "pkg:npm/%40babel/core@7.0.0"
        );
        assert_eq!(
            cv(EcosystemId::NuGet, "Newtonsoft.Json", "13.0.1"),
            "pkg:nuget/Newtonsoft.Json@13.0.1"
        );
        assert_eq!(
            cv(EcosystemId::Npm, "x", "1.0.0+build.1"),
            "pkg:npm/x@1.0.0%2Bbuild.1"
        );
    }

    #[test]
    fn maven_without_group_rejected() {
        let c = ComponentRef {
            ecosystem: EcosystemId::Maven,
            group: None,
            name: "log4j-core".into(),
        };
        assert_eq!(
            to_purl(&c, &VersionRef::new("2.0")).unwrap_err().kind(),
            "coordinate"
        );
    }

    #[test]
    fn roundtrip_to_coordinates() {
        for (e, n, v) in [
            (
                EcosystemId::Maven,
                "org.apache.logging.log4j:log4j-core",
                "2.14.1",
            ),
            (EcosystemId::Npm, "@angular/core", "12.3.1"),
            (EcosystemId::PyPI, "Django", "4.2.16"),
            (EcosystemId::NuGet, "System.Text.Encodings.Web", "4.5.0"),
        ] {
            let c = canonicalize_component(e, n).unwrap();
            let p = to_purl(&c, &VersionRef::new(v)).unwrap();
            let back: PackageUrl = p.to_string().parse().unwrap();
            assert_eq!(back, p);
            let (c2, v2) = from_purl(&back).unwrap();
            assert_eq!((c2, v2.as_str()), (c, v));
        }
    }
}
