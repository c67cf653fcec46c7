use std::cmp::Ordering;
use std::fmt;

use super::{compare, parse_version, ParsedVersion};
use crate::error::{Error, Result};
use crate::model::EcosystemId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl Op {
    fn symbol(self) -> &'static str {
        match self {
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::Eq => "=",
        }
    }

    fn accepts(self, ord: Ordering) -> bool {
        match self {
            Op::Lt => ord == Ordering::Less,
            Op::Le => ord != Ordering::Greater,
            Op::Gt => ord == Ordering::Greater,
            Op::Ge => ord != Ordering::Less,
            Op::Eq => ord == Ordering::Equal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparator {
    pub op: Op,
    pub bound: ParsedVersion,
}

/// Either a conjunction of comparator clauses or an OSV-style event interval.
#[derive(Debug, Clone, PartialEq)]
pub enum VersionRange {
    Clauses(Vec<Comparator>),
    Events {
        introduced: Option<ParsedVersion>,
        fixed: Option<ParsedVersion>,
        last_affected: Option<ParsedVersion>,
    },
}

impl VersionRange {
    /// Event interval `[introduced, fixed)` (or `[introduced, last_affected]`).
    /// An `introduced` of `"0"` means unbounded below.
    pub fn events(
        ecosystem: EcosystemId,
        introduced: Option<&str>,
        fixed: Option<&str>,
        last_affected: Option<&str>,
    ) -> Result<Self> {
        let parse = |s: Option<&str>| -> Result<Option<ParsedVersion>> {
            s.map(|s| parse_version(ecosystem, s)).transpose()
        };
        Ok(VersionRange::Events {
            introduced: parse(introduced.filter(|s| s.trim() != "0"))?,
            fixed: parse(fixed)?,
            last_affected: parse(last_affected)?,
        })
    }

    /// Equivalent comparator clauses.
    pub fn comparators(&self) -> Vec<Comparator> {
        match self {
            VersionRange::Clauses(c) => c.clone(),
            VersionRange::Events {
                introduced,
                fixed,
                last_affected,
            } => {
                let mut out = Vec::new();
                if let Some(i) = introduced {
                    out.push(Comparator {
                        op: Op::Ge,
                        bound: i.clone(),
                    });
                }
                if let Some(f) = fixed {
                    out.push(Comparator {
                        op: Op::Lt,
                        bound: f.clone(),
                    });
                } else if let Some(l) = last_affected {
                    out.push(Comparator {
                        op: Op::Le,
                        bound: l.clone(),
                    });
                }
                out
            }
        }
    }
}

impl fmt::Display for VersionRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text: Vec<String> = self
            .comparators()
            .iter()
            .map(|c| format!("{}{}", c.op.symbol(), c.bound.raw))
            .collect();
        f.write_str(&text.join(","))
    }
}

/// Parses `op version[, op version...]`. A clause without an operator means
/// equality. `==`, `≤` and `≥` are accepted as spellings of `=`, `<=`, `>=`.
pub fn parse_range(ecosystem: EcosystemId, text: &str) -> Result<VersionRange> {
    let mut clauses = Vec::new();
    for raw in text.split(',') {
        let clause = raw.trim();
        if clause.is_empty() {
            continue;
        }
        let (op, rest) = split_op(clause);
        let rest = rest.trim();
        if rest.is_empty() {
            return Err(Error::Usage(format!(
                "range clause {clause:?} has no version"
            )));
        }
        clauses.push(Comparator {
            op,
            bound: parse_version(ecosystem, rest)?,
        });
    }
    if clauses.is_empty() {
        return Err(Error::Usage(format!("range {text:?} has no clauses")));
    }
    Ok(VersionRange::Clauses(clauses))
}

fn split_op(clause: &str) -> (Op, &str) {
    const OPS: [(&str, Op); 8] = [
        ("<=", Op::Le),
        (">=", Op::Ge),
        ("==", Op::Eq),
        ("≤", Op::Le),
        ("≥", Op::Ge),
        ("<", Op::Lt),
        (">", Op::Gt),
        ("=", Op::Eq),
    ];
    for (sym, op) in OPS {
        if let Some(rest) = clause.strip_prefix(sym) {
            return (op, rest);
        }
    }
    (Op::Eq, clause)
}

pub fn satisfies(ecosystem: EcosystemId, v: &ParsedVersion, range: &VersionRange) -> Result<bool> {
    if let VersionRange::Clauses(c) = range {
        if c.is_empty() {
            return Err(Error::Usage("empty range".into()));
        }
    }
    for c in range.comparators() {
        let ord = compare(ecosystem, v, &c.bound)?;
        if !c.op.accepts(ord) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sat(eco: EcosystemId, v: &str, r: &str) -> bool {
        satisfies(
            eco,
            &parse_version(eco, v).unwrap(),
            &parse_range(eco, r).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn range_examples() {
        let npm = EcosystemId::Npm;
        assert!(sat(npm, "1.4.1", "<1.4.2"));
        assert!(!sat(npm, "1.3.5", ">=1.2.0,<1.3.5"));
        assert!(sat(npm, "3.0.0", ">=3.0.0"));
        assert!(sat(npm, "2.0.1", "<= 2.0.1"));
        assert!(sat(npm, "1.2.3", "= 1.2.3"));
        assert!(sat(npm, "1.2.3", "1.2.3"));
        assert!(sat(npm, "1.2.3", ">= 1.0.0 , < 2.0.0"));
    }

    #[test]
    fn empty_range_is_usage_error() {
        let e = EcosystemId::Npm;
        assert_eq!(parse_range(e, " , ").unwrap_err().kind(), "usage");
        let v = parse_version(e, "1.0.0").unwrap();
        assert_eq!(
            satisfies(e, &v, &VersionRange::Clauses(vec![]))
                .unwrap_err()
                .kind(),
            "usage"
        );
    }

    #[test]
    fn events_render_as_comparators() {
        let r = VersionRange::events(EcosystemId::PyPI, Some("0"), Some("2.31.0"), None).unwrap();
        assert_eq!(r.to_string(), "<2.31.0");
        let r = VersionRange::events(EcosystemId::PyPI, Some("1.0"), None, Some("1.5")).unwrap();
        assert_eq!(r.to_string(), ">=1.0,<=1.5");
    }

    proptest! {
        #[test]
        fn events_match_comparator_form(
            i in (0u64..4, 0u64..4), f in (0u64..5, 0u64..5), v in (0u64..5, 0u64..5, 0u64..3),
            pre in prop::option::of(prop::sample::select(vec!["alpha", "beta.1", "rc.2"])),
        ) {
            let e = EcosystemId::Npm;
            let intro = format!("{}.{}.0", i.0, i.1);
            let fixed = format!("{}.{}.0", f.0, f.1);
            let mut ver = format!("{}.{}.{}", v.0, v.1, v.2);
            if let Some(p) = pre { ver.push('-'); ver.push_str(p); }
            let pv = parse_version(e, &ver).unwrap();
            let ev = VersionRange::events(e, Some(&intro), Some(&fixed), None).unwrap();
            let lhs = satisfies(e, &pv, &ev).unwrap();
            let rhs = satisfies(e, &pv, &parse_range(e, &format!(">={intro}")).unwrap()).unwrap()
                && satisfies(e, &pv, &parse_range(e, &format!("<{fixed}")).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
