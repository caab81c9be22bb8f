//! Text similarity ratios on a 0-100 scale.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextMode {
    /// Normalized Levenshtein similarity of the whole strings.
    Simple,
    /// Best alignment of the shorter string against any substring of the
    /// longer one.
    Partial,
    /// Simple ratio after lowercasing, tokenizing and sorting tokens.
    TokenSort,
    /// Token-set comparison: shared tokens against each side's extras.
    TokenSet,
}

impl TextMode {
    pub const ALL: [TextMode; 4] = [Self::Simple, Self::Partial, Self::TokenSort, Self::TokenSet];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Simple => "simple",
            Self::Partial => "partial",
            Self::TokenSort => "token_sort",
            Self::TokenSet => "token_set",
        }
    }
}

impl fmt::Display for TextMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TextMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown text mode {s:?}; expected simple, partial, token_sort or token_set"))
    }
}

/// Similarity of `a` and `b` in `0..=100`. Two empty inputs score 100, one
/// empty input scores 0.
pub fn text_ratio(a: &str, b: &str, mode: TextMode) -> u32 {
    match mode {
        TextMode::Simple => simple(a, b),
        TextMode::Partial => partial(a, b),
        TextMode::TokenSort => simple(&sorted_tokens(a).join(" "), &sorted_tokens(b).join(" ")),
        TextMode::TokenSet => token_set(a, b),
    }
}

/// `100 - max ratio` over all cross-package pairs of function texts, or
/// `None` when either side is empty.
pub fn text_package_distance<A, B>(a: &[A], b: &[B], mode: TextMode) -> Option<u32>
where
    A: AsRef<str>,
    B: AsRef<str>,
{
    let mut best = None;
    for x in a {
        for y in b {
            let r = text_ratio(x.as_ref(), y.as_ref(), mode);
            best = Some(best.map_or(r, |b: u32| b.max(r)));
            if r == 100 {
                return Some(0);
            }
        }
    }
    best.map(|r| 100 - r)
}

fn scale(distance: usize, len: usize) -> u32 {
    (100.0 * (1.0 - distance as f64 / len as f64)).round() as u32
}

fn simple(a: &str, b: &str) -> u32 {
    let len = a.chars().count().max(b.chars().count());
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 100,
        (true, false) | (false, true) => 0,
        _ => scale(strsim::levenshtein(a, b), len),
    }
}

fn partial(a: &str, b: &str) -> u32 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    match (short.is_empty(), long.is_empty()) {
        (true, true) => 100,
        (true, false) => 0,
        _ => scale(substring_distance(&short, &long), short.len()),
    }
}

/// Smallest edit distance between `pattern` and any substring of `text`.
fn substring_distance(pattern: &[char], text: &[char]) -> usize {
    // Column over the pattern; a match may start anywhere in the text, so the
    // top row stays zero.
    let mut col: Vec<usize> = (0..=pattern.len()).collect();
    let mut best = pattern.len();
    for &t in text {
        let mut diag = col[0];
        col[0] = 0;
        for (i, &p) in pattern.iter().enumerate() {
            let above = col[i + 1];
            col[i + 1] = (diag + usize::from(p != t)).min(above + 1).min(col[i] + 1);
            diag = above;
        }
        best = best.min(col[pattern.len()]);
    }
    best
}

/// Lowercased alphanumeric tokens, sorted.
fn sorted_tokens(s: &str) -> Vec<String> {
    let mut tokens: Vec<String> = s
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect();
    tokens.sort();
    tokens
}

fn token_set(a: &str, b: &str) -> u32 {
    let ta: BTreeSet<String> = sorted_tokens(a).into_iter().collect();
    let tb: BTreeSet<String> = sorted_tokens(b).into_iter().collect();
    if ta.is_empty() || tb.is_empty() {
        return if ta.is_empty() && tb.is_empty() { 100 } else { 0 };
    }
    let join = |it: &mut dyn Iterator<Item = &String>| it.map(String::as_str).collect::<Vec<_>>().join(" ");
    let common = join(&mut ta.intersection(&tb));
    let only_a = join(&mut ta.difference(&tb));
    let only_b = join(&mut tb.difference(&ta));
    let with = |extra: &str| format!("{common} {extra}").trim().to_string();
    let (t1, t2) = (with(&only_a), with(&only_b));
    let mut best = simple(&t1, &t2);
    if !common.is_empty() {
        best = best.max(simple(&common, &t1)).max(simple(&common, &t2));
    }
    best
}
