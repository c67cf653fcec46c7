//! Maven `ComparableVersion` ordering.
//!
//! A version is tokenized into a tree of integer, qualifier and list items;
//! `-` opens a nested list and so do transitions between digits and letters.
//! Trailing "null" items (zero, empty qualifier, empty list) are trimmed from
//! each list before comparison.

use std::cmp::Ordering;

const QUALIFIERS: [&str; 7] = ["alpha", "beta", "milestone", "rc", "snapshot", "", "sp"];
const RELEASE_INDEX: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Item {
    /// Decimal digits with leading zeros stripped.
    Int(String),
    Str(String),
    List(Vec<Item>),
}

impl Item {
    fn is_null(&self) -> bool {
        match self {
            Item::Int(v) => v == "0",
            Item::Str(s) => qualifier_key(s) == qualifier_key(""),
            Item::List(l) => l.is_empty(),
        }
    }
}

fn qualifier_key(q: &str) -> String {
    match QUALIFIERS.iter().position(|k| *k == q) {
        Some(i) => i.to_string(),
        None => format!("{}-{q}", QUALIFIERS.len()),
    }
}

fn int_cmp(a: &str, b: &str) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

fn string_item(value: &str, followed_by_digit: bool) -> Item {
    let mut v = value.to_string();
    if followed_by_digit && v.len() == 1 {
        v = match v.as_str() {
            "a" => "alpha".into(),
            "b" => "beta".into(),
            "m" => "milestone".into(),
            _ => v,
        };
    }
    let v = match v.as_str() {
        "ga" | "final" | "release" => String::new(),
        "cr" => "rc".into(),
        _ => v,
    };
    Item::Str(v)
}

fn parse_item(is_digit: bool, buf: &str) -> Item {
    if is_digit {
        let trimmed = buf.trim_start_matches('0');
        Item::Int(if trimmed.is_empty() {
            "0".into()
        } else {
            trimmed.into()
        })
    } else {
        string_item(buf, false)
    }
}

/// Path of list indices from the root to the list currently being filled.
struct Builder {
    root: Vec<Item>,
    path: Vec<usize>,
}

impl Builder {
    fn current(&mut self) -> &mut Vec<Item> {
        let mut list = &mut self.root;
        for &i in &self.path {
            list = match &mut list[i] {
                Item::List(l) => l,
                _ => unreachable!("path always points at lists"),
            };
        }
        list
    }

    fn push(&mut self, item: Item) {
        self.current().push(item);
    }

    fn open_list(&mut self) {
        let cur = self.current();
        cur.push(Item::List(Vec::new()));
        let idx = cur.len() - 1;
        self.path.push(idx);
    }
}

fn normalize(list: &mut Vec<Item>) {
    for item in list.iter_mut() {
        if let Item::List(l) = item {
            normalize(l);
        }
    }
    let mut i = list.len();
    while i > 0 {
        i -= 1;
        if list[i].is_null() {
            list.remove(i);
        } else if !matches!(list[i], Item::List(_)) {
            break;
        }
    }
}

pub(crate) fn parse(input: &str) -> Result<Vec<Item>, String> {
    let version = input.trim().to_lowercase();
    if version.is_empty() {
        return Err("empty version".into());
    }
    if version.chars().any(|c| c.is_whitespace()) {
        return Err("whitespace inside version".into());
    }
    let chars: Vec<char> = version.chars().collect();
    let sub = |a: usize, b: usize| chars[a..b].iter().collect::<String>();

    let mut b = Builder {
        root: Vec::new(),
        path: Vec::new(),
    };
    let mut is_digit = false;
    let mut start = 0usize;
    for (i, &c) in chars.iter().enumerate() {
        match c {
            '.' | '-' => {
                if i == start {
                    b.push(Item::Int("0".into()));
                } else {
                    b.push(parse_item(is_digit, &sub(start, i)));
                }
                start = i + 1;
                if c == '-' {
                    b.open_list();
                }
            }
            c if c.is_ascii_digit() => {
                if !is_digit && i > start {
                    b.push(string_item(&sub(start, i), true));
                    start = i;
                    b.open_list();
                }
                is_digit = true;
            }
            _ => {
                if is_digit && i > start {
                    b.push(parse_item(true, &sub(start, i)));
                    start = i;
                    b.open_list();
                }
                is_digit = false;
            }
        }
    }
    if chars.len() > start {
        b.push(parse_item(is_digit, &sub(start, chars.len())));
    }
    let mut root = b.root;
    normalize(&mut root);
    Ok(root)
}

fn cmp_with_null(item: &Item) -> Ordering {
    match item {
        Item::Int(v) => {
            if v == "0" {
                Ordering::Equal
            } else {
                Ordering::Greater
            }
        }
        Item::Str(s) => qualifier_key(s).cmp(&RELEASE_INDEX.to_string()),
        Item::List(l) => match l.first() {
            None => Ordering::Equal,
            Some(first) => cmp_with_null(first),
        },
    }
}

fn cmp_item(a: &Item, b: &Item) -> Ordering {
    match (a, b) {
        (Item::Int(x), Item::Int(y)) => int_cmp(x, y),
        (Item::Int(_), _) => Ordering::Greater,
        (Item::Str(_), Item::Int(_)) => Ordering::Less,
        (Item::Str(x), Item::Str(y)) => qualifier_key(x).cmp(&qualifier_key(y)),
        (Item::Str(_), Item::List(_)) => Ordering::Less,
        (Item::List(_), Item::Int(_)) => Ordering::Less,
        (Item::List(_), Item::Str(_)) => Ordering::Greater,
        (Item::List(x), Item::List(y)) => cmp_lists(x, y),
    }
}

pub(crate) fn cmp_lists(a: &[Item], b: &[Item]) -> Ordering {
    let n = a.len().max(b.len());
    for i in 0..n {
        let ord = match (a.get(i), b.get(i)) {
            (None, None) => Ordering::Equal,
            (None, Some(r)) => cmp_with_null(r).reverse(),
            (Some(l), None) => cmp_with_null(l),
            (Some(l), Some(r)) => cmp_item(l, r),
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

/// Canonical text of a parsed version. An all-null version renders as `0`.
pub(crate) fn render(items: &[Item]) -> String {
    if items.is_empty() {
        return "0".into();
    }
    render_list(items)
}

fn render_list(items: &[Item]) -> String {
    let mut out = String::new();
    for (i, item) in items.iter().enumerate() {
        if i == 0 && matches!(item, Item::List(_)) {
            // A list in leading position came from a trimmed zero.
            out.push_str("0-");
        } else if i > 0 {
            out.push(if matches!(item, Item::List(_)) {
                '-'
            } else {
                '.'
            });
        }
        match item {
            Item::Int(v) => out.push_str(v),
            Item::Str(s) => out.push_str(s),
            Item::List(l) => out.push_str(&render_list(l)),
        }
    }
    out
}

/// Leading integer items of the top-level list.
pub(crate) fn release_segments(items: &[Item]) -> Vec<u64> {
    items
        .iter()
        .map_while(|i| match i {
            Item::Int(v) => v.parse::<u64>().ok(),
            _ => None,
        })
        .collect()
}

/// Every qualifier ordered before a plain release (alpha, beta, milestone,
/// rc, snapshot) anywhere in the tree.
pub(crate) fn prerelease_qualifiers(items: &[Item]) -> Vec<String> {
    let mut out = Vec::new();
    for item in items {
        match item {
            Item::Str(s) => {
                if QUALIFIERS[..RELEASE_INDEX].contains(&s.as_str()) {
                    out.push(s.clone());
                }
            }
            Item::List(l) => out.extend(prerelease_qualifiers(l)),
            Item::Int(_) => {}
        }
    }
    out
}
