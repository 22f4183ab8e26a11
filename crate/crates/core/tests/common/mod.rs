//! Independent reference implementations used as test oracles. Each one is
//! written for obviousness, not speed, and shares no code with the library
//! beyond text normalization.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use docground::config::MatchConfig;
use docground::layout::{Document, Line};
use docground::{normalize, BBox};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

/// Full-matrix Wagner-Fischer over chars.
pub fn lev(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

pub fn sim(a: &str, b: &str) -> f64 {
    let m = a.chars().count().max(b.chars().count());
    if m == 0 {
        1.0
    } else {
        1.0 - lev(a, b) as f64 / m as f64
    }
}

/// Every needle-length window plus the whole haystack.
pub fn partial(needle: &str, hay: &str) -> f64 {
    let n = needle.chars().count();
    let h: Vec<char> = hay.chars().collect();
    if n == 0 {
        return 1.0;
    }
    if n > h.len() {
        return sim(needle, hay);
    }
    let mut best = sim(needle, hay);
    for start in 0..=h.len() - n {
        let w: String = h[start..start + n].iter().collect();
        best = best.max(sim(needle, &w));
    }
    best
}

pub fn token_set(a: &str, b: &str) -> f64 {
    let sa: BTreeSet<&str> = a.split_whitespace().collect();
    let sb: BTreeSet<&str> = b.split_whitespace().collect();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    if sa.is_empty() || sb.is_empty() {
        return 0.0;
    }
    let join = |s: Vec<&str>| s.join(" ");
    let i = join(sa.intersection(&sb).copied().collect());
    let ua = join(sa.iter().copied().collect());
    let ub = join(sb.iter().copied().collect());
    [sim(&i, &ua), sim(&i, &ub), sim(&ua, &ub)]
        .into_iter()
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleScore {
    pub fuzzy: f64,
    pub length: f64,
    pub answer: f64,
    pub short: bool,
    pub context: bool,
    pub combined: f64,
}

/// The composite score written out directly from its definition.
pub fn score(answer: &str, question: &str, text: &str, bbox: &BBox, page_area: f64, cfg: &MatchConfig) -> OracleScore {
    let a = normalize(answer).normalized;
    let q = normalize(question).normalized;
    let t = normalize(text).normalized;

    let fuzzy = partial(&a, &t).max(token_set(&a, &t));

    let (la, lt) = (a.chars().count() as f64, t.chars().count() as f64);
    let length = if la == 0.0 && lt == 0.0 {
        1.0
    } else {
        la.min(lt) / la.max(lt)
    };

    let a_tokens: BTreeSet<&str> = a.split_whitespace().collect();
    let t_tokens: BTreeSet<&str> = t.split_whitespace().collect();
    let answer_match = if a_tokens.is_empty() {
        1.0
    } else {
        a_tokens.iter().filter(|x| t_tokens.contains(*x)).count() as f64 / a_tokens.len() as f64
    };

    let min_len = 3usize.max((0.2 * la).ceil() as usize);
    let area = (bbox.x1 - bbox.x0) * (bbox.y1 - bbox.y0);
    let short = (lt as usize) < min_len || area / page_area < cfg.min_area_fraction;

    let keep = |s: &&str| !cfg.stopwords.contains(s);
    let region: BTreeSet<&str> = t.split_whitespace().filter(keep).collect();
    let ctx: BTreeSet<&str> = a.split_whitespace().chain(q.split_whitespace()).filter(keep).collect();
    let inter = region.iter().filter(|x| ctx.contains(*x)).count();
    let union = region.len() + ctx.len() - inter;
    let jaccard = if union == 0 { 0.0 } else { inter as f64 / union as f64 };
    let context = jaccard < 0.05;

    let mut combined = cfg.w_fuzzy * fuzzy + cfg.w_length * length + cfg.w_answer * answer_match;
    if short {
        combined -= cfg.penalty_short;
    }
    if context {
        combined -= cfg.penalty_context;
    }
    OracleScore {
        fuzzy,
        length,
        answer: answer_match,
        short,
        context,
        combined: combined.clamp(0.0, 1.0),
    }
}

/// Block ids above threshold, best first, reading order on ties.
pub fn rank_blocks(answer: &str, question: &str, doc: &Document, cfg: &MatchConfig) -> Vec<(String, f64)> {
    let page_area = doc.page_width * doc.page_height;
    let mut scored: Vec<(usize, f64)> = doc
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| (i, score(answer, question, &b.text, &b.bbox, page_area, cfg).combined))
        .filter(|(_, s)| *s >= cfg.threshold)
        .collect();
    scored.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
    scored.truncate(cfg.top_k.min(cfg.max_blocks));
    scored.into_iter().map(|(i, s)| (doc.blocks[i].id.clone(), s)).collect()
}

/// Exhaustive search over index ranges with matched endpoints.
/// Returns (start, end, matched_count).
pub fn best_run(
    matched: &[usize],
    line: &Line,
    answer_normalized: &str,
    gap_tolerance: usize,
) -> Option<(usize, usize, usize)> {
    let is_matched = |i: usize| matched.contains(&i);
    let text = |s: usize, e: usize| {
        let raw: Vec<&str> = line.words[s..=e].iter().map(|w| w.text.as_str()).collect();
        normalize(&raw.join(" ")).normalized
    };
    let mut best: Option<(usize, f64, usize, usize)> = None;
    for &s in matched {
        for &e in matched {
            if e < s {
                continue;
            }
            let count = (s..=e).filter(|&i| is_matched(i)).count();
            if (e - s + 1) - count > gap_tolerance {
                continue;
            }
            let sm = sim(&text(s, e), answer_normalized);
            let better = match best {
                None => true,
                Some((c, bs, bstart, _)) => count > c || (count == c && (sm > bs || (sm == bs && s < bstart))),
            };
            if better {
                best = Some((count, sm, s, e));
            }
        }
    }
    best.map(|(c, _, s, e)| (s, e, c))
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let w = (a.x1.min(b.x1) - a.x0.max(b.x0)).max(0.0);
    let h = (a.y1.min(b.y1) - a.y0.max(b.y0)).max(0.0);
    let inter = w * h;
    let union = (a.x1 - a.x0) * (a.y1 - a.y0) + (b.x1 - b.x0) * (b.y1 - b.y0) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Optimal one-to-one matching by trying every assignment (DP over used-gt masks).
pub fn brute_force_matching(preds: &[BBox], gts: &[BBox], thr: f64) -> usize {
    fn go(i: usize, used: u32, preds: &[BBox], gts: &[BBox], thr: f64) -> usize {
        if i == preds.len() {
            return 0;
        }
        let mut best = go(i + 1, used, preds, gts, thr);
        for (j, g) in gts.iter().enumerate() {
            if used & (1 << j) == 0 && iou(&preds[i], g) >= thr {
                best = best.max(1 + go(i + 1, used | (1 << j), preds, gts, thr));
            }
        }
        best
    }
    go(0, 0, preds, gts, thr)
}
