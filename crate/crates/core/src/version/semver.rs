//! SemVer 2.0 as used by npm, and the NuGet dialect (up to four numeric
//! parts, case-insensitive pre-release labels).

use std::cmp::Ordering;

use super::TagPart;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct SemVer {
    pub core: Vec<u64>,
    pub pre: Vec<TagPart>,
    pub build: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Dialect {
    Npm,
    NuGet,
}

impl Dialect {
    fn max_parts(self) -> usize {
        match self {
            Dialect::Npm => 3,
            Dialect::NuGet => 4,
        }
    }
}

pub(crate) fn parse(input: &str, dialect: Dialect) -> Result<SemVer, String> {
    let mut s = input.trim();
    if dialect == Dialect::Npm {
        s = s.strip_prefix('=').unwrap_or(s).trim_start();
        s = s
            .strip_prefix('v')
            .or_else(|| s.strip_prefix('V'))
            .unwrap_or(s);
    }
    if s.is_empty() {
        return Err("empty version".into());
    }
    let (rest, build) = match s.split_once('+') {
        Some((r, b)) => {
            if b.is_empty() || !b.split('.').all(valid_ident) {
                return Err(format!("invalid build metadata {b:?}"));
            }
            (r, Some(b.to_string()))
        }
        None => (s, None),
    };
    let (core_text, pre_text) = match rest.split_once('-') {
        Some((c, p)) => (c, Some(p)),
        None => (rest, None),
    };

    let parts: Vec<&str> = core_text.split('.').collect();
    if parts.is_empty() || parts.len() > dialect.max_parts() {
        return Err(format!(
            "expected 1 to {} numeric components",
            dialect.max_parts()
        ));
    }
    let mut core = Vec::with_capacity(dialect.max_parts());
    for p in parts {
        if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("non-numeric component {p:?}"));
        }
        core.push(p.parse::<u64>().map_err(|e| e.to_string())?);
    }
    core.resize(dialect.max_parts(), 0);

    let mut pre = Vec::new();
    if let Some(p) = pre_text {
        if p.is_empty() {
            return Err("empty pre-release".into());
        }
        for ident in p.split('.') {
            if !valid_ident(ident) {
                return Err(format!("invalid pre-release identifier {ident:?}"));
            }
            pre.push(TagPart::from_ident(ident));
        }
    }
    Ok(SemVer { core, pre, build })
}

fn valid_ident(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
}

pub(crate) fn compare(a: &SemVer, b: &SemVer, dialect: Dialect) -> Ordering {
    a.core
        .cmp(&b.core)
        .then_with(|| match (a.pre.is_empty(), b.pre.is_empty()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => compare_pre(&a.pre, &b.pre, dialect),
        })
}

fn compare_pre(a: &[TagPart], b: &[TagPart], dialect: Dialect) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let ord = match (x, y) {
            (TagPart::Num(m), TagPart::Num(n)) => m.cmp(n),
            (TagPart::Num(_), TagPart::Text(_)) => Ordering::Less,
            (TagPart::Text(_), TagPart::Num(_)) => Ordering::Greater,
            (TagPart::Text(s), TagPart::Text(t)) => match dialect {
                Dialect::Npm => s.cmp(t),
                Dialect::NuGet => s.to_ascii_lowercase().cmp(&t.to_ascii_lowercase()),
            },
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    a.len().cmp(&b.len())
}

pub(crate) fn render(v: &SemVer) -> String {
    let mut out = v
        .core
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(".");
    if !v.pre.is_empty() {
        out.push('-');
        out.push_str(
            &v.pre
                .iter()
                .map(TagPart::to_string)
                .collect::<Vec<_>>()
                .join("."),
        );
    }
    if let Some(b) = &v.build {
        out.push('+');
        out.push_str(b);
    }
    out
}
