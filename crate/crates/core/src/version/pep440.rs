//! Python packaging versions: epoch, release, pre/post/dev segments and local
//! labels, ordered the way `packaging.version` orders them.

use std::cmp::Ordering;
use std::sync::OnceLock;

use regex::Regex;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Pep440 {
    pub epoch: u64,
    pub release: Vec<u64>,
    /// Normalized letter (`a`, `b`, `rc`) and number.
    pub pre: Option<(String, u64)>,
    pub post: Option<u64>,
    pub dev: Option<u64>,
    pub local: Option<Vec<LocalPart>>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum LocalPart {
    // Declaration order matters: strings sort before numbers.
    Text(String),
    Num(u64),
}

fn pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?ix)^\s*v?
            (?:(?P<epoch>[0-9]+)!)?
            (?P<release>[0-9]+(?:\.[0-9]+)*)
            (?P<pre>[-_.]?(?P<pre_l>alpha|beta|preview|pre|rc|a|b|c)[-_.]?(?P<pre_n>[0-9]+)?)?
            (?P<post>(?:-(?P<post_n1>[0-9]+))|(?:[-_.]?(?P<post_l>post|rev|r)[-_.]?(?P<post_n2>[0-9]+)?))?
            (?P<dev>[-_.]?(?P<dev_l>dev)[-_.]?(?P<dev_n>[0-9]+)?)?
            (?:\+(?P<local>[a-z0-9]+(?:[-_.][a-z0-9]+)*))?
            \s*$",
        )
        .expect("valid PEP 440 pattern")
    })
}

fn num(s: Option<regex::Match<'_>>) -> Result<u64, String> {
    match s {
        Some(m) => m.as_str().parse::<u64>().map_err(|e| e.to_string()),
        None => Ok(0),
    }
}

pub(crate) fn parse(input: &str) -> Result<Pep440, String> {
    let caps = pattern()
        .captures(input)
        .ok_or_else(|| "does not match the packaging version grammar".to_string())?;
    let epoch = num(caps.name("epoch"))?;
    let release = caps["release"]
        .split('.')
        .map(|p| p.parse::<u64>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let pre = match caps.name("pre_l") {
        Some(l) => {
            let letter = match l.as_str().to_ascii_lowercase().as_str() {
                "a" | "alpha" => "a",
                "b" | "beta" => "b",
                _ => "rc",
            };
            Some((letter.to_string(), num(caps.name("pre_n"))?))
        }
        None => None,
    };
    let post = if caps.name("post").is_some() {
        Some(match caps.name("post_n1") {
            Some(m) => num(Some(m))?,
            None => num(caps.name("post_n2"))?,
        })
    } else {
        None
    };
    let dev = match caps.name("dev_l") {
        Some(_) => Some(num(caps.name("dev_n"))?),
        None => None,
    };
    let local = caps.name("local").map(|m| {
        m.as_str()
            .split(['-', '_', '.'])
            .map(|p| match p.parse::<u64>() {
                Ok(n) if p.bytes().all(|b| b.is_ascii_digit()) => LocalPart::Num(n),
                _ => LocalPart::Text(p.to_ascii_lowercase()),
            })
            .collect()
    });
    Ok(Pep440 {
        epoch,
        release,
        pre,
        post,
        dev,
        local,
    })
}

impl Pep440 {
    pub fn is_prerelease(&self) -> bool {
        self.pre.is_some() || self.dev.is_some()
    }
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
enum PreKey {
    DevOnly,
    Pre(u8, u64),
    None,
}

fn letter_rank(l: &str) -> u8 {
    match l {
        "a" => 0,
        "b" => 1,
        _ => 2,
    }
}

fn trimmed(release: &[u64]) -> &[u64] {
    let mut end = release.len();
    while end > 0 && release[end - 1] == 0 {
        end -= 1;
    }
    &release[..end]
}

pub(crate) fn compare(a: &Pep440, b: &Pep440) -> Ordering {
    fn pre_key(v: &Pep440) -> PreKey {
        match (&v.pre, v.post, v.dev) {
            (None, None, Some(_)) => PreKey::DevOnly,
            (Some((l, n)), _, _) => PreKey::Pre(letter_rank(l), *n),
            (None, _, _) => PreKey::None,
        }
    }
    fn dev_key(v: &Pep440) -> (bool, u64) {
        match v.dev {
            Some(n) => (false, n),
            None => (true, 0),
        }
    }
    a.epoch
        .cmp(&b.epoch)
        .then_with(|| trimmed(&a.release).cmp(trimmed(&b.release)))
        .then_with(|| pre_key(a).cmp(&pre_key(b)))
        .then_with(|| a.post.cmp(&b.post))
        .then_with(|| dev_key(a).cmp(&dev_key(b)))
        .then_with(|| a.local.cmp(&b.local))
}

pub(crate) fn render(v: &Pep440) -> String {
    let mut out = String::new();
    if v.epoch != 0 {
        out.push_str(&format!("{}!", v.epoch));
    }
    out.push_str(
        &v.release
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join("."),
    );
    if let Some((l, n)) = &v.pre {
        out.push_str(&format!("{l}{n}"));
    }
    if let Some(n) = v.post {
        out.push_str(&format!(".post{n}"));
    }
    if let Some(n) = v.dev {
        out.push_str(&format!(".dev{n}"));
    }
    if let Some(local) = &v.local {
        let parts: Vec<String> = local
            .iter()
            .map(|p| match p {
                LocalPart::Num(n) => n.to_string(),
                LocalPart::Text(s) => s.clone(),
            })
            .collect();
        out.push('+');
        out.push_str(&parts.join("."));
    }
    out
}
