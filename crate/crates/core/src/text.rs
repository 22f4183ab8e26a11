//! Text normalization and the fuzzy similarity primitives used by region scoring.
//!
//! All lengths and edit distances are measured in Unicode scalar values.

use std::collections::BTreeSet;

use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

/// A string together with its normalized form and tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormText {
    pub original: String,
    pub normalized: String,
    pub tokens: Vec<String>,
}

impl NormText {
    pub fn char_len(&self) -> usize {
        self.normalized.chars().count()
    }

    pub fn is_empty(&self) -> bool {
        self.normalized.is_empty()
    }

    pub fn token_set(&self) -> BTreeSet<&str> {
        self.tokens.iter().map(String::as_str).collect()
    }
}

fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// NFC, full case folding, punctuation to spaces, whitespace collapsed.
pub fn normalize(s: &str) -> NormText {
    let composed: String = s.nfc().collect();
    let folded = caseless::default_case_fold_str(&composed);
    let mapped: String = folded.nfc().map(|c| if is_punctuation(c) { ' ' } else { c }).collect();
    let tokens: Vec<String> = mapped.split_whitespace().map(str::to_owned).collect();
    NormText {
        original: s.to_owned(),
        normalized: tokens.join(" "),
        tokens,
    }
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

pub(crate) fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn sim_chars(a: &[char], b: &[char]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein_chars(a, b) as f64 / longest as f64
}

/// Normalized similarity `1 - lev / max_len`; 1.0 for two empty strings.
pub fn sim(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    sim_chars(&a, &b)
}

/// Best window found by [`partial_match`].
#[derive(Debug, Clone, PartialEq)]
pub struct PartialMatch {
    pub score: f64,
    /// Window of the haystack that produced `score`; `None` when the needle is
    /// longer than the haystack or empty.
    pub window: Option<String>,
}

/// Slides a needle-length window over `hay` one character at a time and keeps
/// the most similar window (leftmost on ties). The full haystack is compared
/// last. An empty needle scores 1.0.
pub fn partial_match(needle: &str, hay: &str) -> PartialMatch {
    let n: Vec<char> = needle.chars().collect();
    let h: Vec<char> = hay.chars().collect();
    if n.is_empty() {
        return PartialMatch {
            score: 1.0,
            window: None,
        };
    }
    if n.len() > h.len() {
        return PartialMatch {
            score: sim_chars(&n, &h),
            window: None,
        };
    }
    if let Some(byte_pos) = hay.find(needle) {
        let start = hay[..byte_pos].chars().count();
        let window: String = h[start..start + n.len()].iter().collect();
        return PartialMatch {
            score: 1.0,
            window: Some(window),
        };
    }
    let mut best = (f64::NEG_INFINITY, 0usize, n.len());
    for start in 0..=(h.len() - n.len()) {
        let s = sim_chars(&n, &h[start..start + n.len()]);
        if s > best.0 {
            best = (s, start, start + n.len());
        }
    }
    let full = sim_chars(&n, &h);
    if full > best.0 {
        best = (full, 0, h.len());
    }
    PartialMatch {
        score: best.0,
        window: Some(h[best.1..best.2].iter().collect()),
    }
}

pub fn partial_ratio(needle: &str, hay: &str) -> f64 {
    partial_match(needle, hay).score
}

fn sorted_join<'a>(tokens: impl Iterator<Item = &'a str>) -> String {
    tokens.collect::<Vec<_>>().join(" ")
}

/// Token-set similarity: compares the sorted intersection against each sorted
/// token set and the two sets against each other, keeping the maximum.
/// Exactly one empty side scores 0.0; both empty scores 1.0.
pub fn token_set_ratio(a: &NormText, b: &NormText) -> f64 {
    let sa = a.token_set();
    let sb = b.token_set();
    match (sa.is_empty(), sb.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let inter = sorted_join(sa.intersection(&sb).copied());
    let ua = sorted_join(sa.iter().copied());
    let ub = sorted_join(sb.iter().copied());
    sim(&inter, &ua).max(sim(&inter, &ub)).max(sim(&ua, &ub))
}

pub fn fuzzy_score(answer: &NormText, region: &NormText) -> f64 {
    partial_ratio(&answer.normalized, &region.normalized).max(token_set_ratio(answer, region))
}
