//! Composite-score region matching.
//!
//! Every candidate region is scored against the answer (and question) with a
//! weighted sum of a fuzzy text score, a length factor and a token-containment
//! score, minus fixed penalties for short regions and for regions with no
//! contextual overlap. Regions at or above the threshold are ranked by score,
//! ties going to reading order, and the head of the ranking is returned.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, MatchConfig};
use crate::layout::{validate_document, Block, Document, Violation};
use crate::text::{fuzzy_score, normalize, NormText};
use crate::BBox;

/// Contextual overlap below this Jaccard index triggers the context penalty.
pub const CONTEXT_JACCARD_MIN: f64 = 0.05;
/// Regions shorter than this many characters are always "short".
pub const SHORT_TEXT_FLOOR: usize = 3;
/// Regions shorter than this fraction of the answer length are "short".
pub const SHORT_TEXT_FRACTION: f64 = 0.2;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("answer is empty after normalization")]
    EmptyAnswer,
    #[error("document {doc_id} has not been validated: {} violation(s)", violations.len())]
    InvalidDocument { doc_id: String, violations: Vec<Violation> },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Block,
    Line,
    Word,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub fuzzy: f64,
    #[serde(rename = "length")]
    pub length_factor: f64,
    #[serde(rename = "answer")]
    pub answer_match: f64,
    #[serde(rename = "pen_short")]
    pub penalty_short_applied: bool,
    #[serde(rename = "pen_ctx")]
    pub penalty_context_applied: bool,
    /// Clamped to [0, 1].
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMatch {
    pub region_id: String,
    pub granularity: Granularity,
    pub bbox: BBox,
    pub text: String,
    pub score: ScoreBreakdown,
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Penalties {
    pub short: bool,
    pub context: bool,
}

/// Normalized answer and question, shared by every region scored for one query.
#[derive(Debug, Clone)]
pub struct Query {
    pub answer: NormText,
    pub question: NormText,
}

impl Query {
    pub fn new(answer: &str, question: &str) -> Self {
        Query {
            answer: normalize(answer),
            question: normalize(question),
        }
    }
}

/// min/max ratio of the normalized lengths; 1.0 when both are empty.
pub fn length_factor(answer: &NormText, matched_text: &NormText) -> f64 {
    let la = answer.char_len();
    let lt = matched_text.char_len();
    if la == 0 && lt == 0 {
        return 1.0;
    }
    la.min(lt) as f64 / la.max(lt) as f64
}

/// Fraction of distinct answer tokens present in the region.
pub fn answer_match_score(answer: &NormText, region_text: &NormText) -> f64 {
    let wanted = answer.token_set();
    if wanted.is_empty() {
        return 1.0;
    }
    let have = region_text.token_set();
    wanted.intersection(&have).count() as f64 / wanted.len() as f64
}

fn content_tokens<'a>(texts: &[&'a NormText], cfg: &MatchConfig) -> BTreeSet<&'a str> {
    texts
        .iter()
        .flat_map(|t| t.tokens.iter())
        .map(String::as_str)
        .filter(|t| !cfg.stopwords.contains(t))
        .collect()
}

fn region_penalties(query: &Query, text: &NormText, bbox: &BBox, page_area: f64, cfg: &MatchConfig) -> Penalties {
    let min_len = SHORT_TEXT_FLOOR.max((SHORT_TEXT_FRACTION * query.answer.char_len() as f64).ceil() as usize);
    let short = text.char_len() < min_len || bbox.area() / page_area < cfg.min_area_fraction;

    let region = content_tokens(&[text], cfg);
    let context = content_tokens(&[&query.answer, &query.question], cfg);
    let union = region.union(&context).count();
    let jaccard = if union == 0 {
        0.0
    } else {
        region.intersection(&context).count() as f64 / union as f64
    };
    Penalties {
        short,
        context: jaccard < CONTEXT_JACCARD_MIN,
    }
}

pub fn compute_penalties(
    answer: &NormText,
    question: &NormText,
    block: &Block,
    page_area: f64,
    cfg: &MatchConfig,
) -> Penalties {
    let query = Query {
        answer: answer.clone(),
        question: question.clone(),
    };
    region_penalties(&query, &normalize(&block.text), &block.bbox, page_area, cfg)
}

/// Scores one region (block or line) with the composite formula.
pub fn score_region(query: &Query, text: &str, bbox: &BBox, page_area: f64, cfg: &MatchConfig) -> ScoreBreakdown {
    let region = normalize(text);
    let fuzzy = fuzzy_score(&query.answer, &region);
    let length = length_factor(&query.answer, &region);
    let answer_match = answer_match_score(&query.answer, &region);
    let pen = region_penalties(query, &region, bbox, page_area, cfg);

    let mut raw = cfg.w_fuzzy * fuzzy + cfg.w_length * length + cfg.w_answer * answer_match;
    if pen.short {
        raw -= cfg.penalty_short;
    }
    if pen.context {
        raw -= cfg.penalty_context;
    }
    ScoreBreakdown {
        fuzzy,
        length_factor: length,
        answer_match,
        penalty_short_applied: pen.short,
        penalty_context_applied: pen.context,
        combined: raw.clamp(0.0, 1.0),
    }
}

pub fn score_block(
    answer: &NormText,
    question: &NormText,
    block: &Block,
    page_area: f64,
    cfg: &MatchConfig,
) -> ScoreBreakdown {
    let query = Query {
        answer: answer.clone(),
        question: question.clone(),
    };
    score_region(&query, &block.text, &block.bbox, page_area, cfg)
}

/// Keeps candidates at or above the threshold, sorts by score (stable, so
/// reading order breaks ties), truncates to `limit` and assigns ranks.
pub(crate) fn rank_candidates(mut candidates: Vec<RegionMatch>, threshold: f64, limit: usize) -> Vec<RegionMatch> {
    candidates.retain(|c| c.score.combined >= threshold);
    candidates.sort_by(|a, b| b.score.combined.total_cmp(&a.score.combined));
    candidates.truncate(limit);
    for (i, c) in candidates.iter_mut().enumerate() {
        c.rank = i + 1;
    }
    candidates
}

pub(crate) fn check_inputs(query: &Query, doc: &Document, cfg: &MatchConfig) -> Result<(), MatchError> {
    cfg.validate()?;
    if query.answer.is_empty() {
        return Err(MatchError::EmptyAnswer);
    }
    let violations = validate_document(doc);
    if !violations.is_empty() {
        return Err(MatchError::InvalidDocument {
            doc_id: doc.doc_id.clone(),
            violations,
        });
    }
    Ok(())
}

pub(crate) fn match_blocks_query(query: &Query, doc: &Document, cfg: &MatchConfig) -> Vec<RegionMatch> {
    let page_area = doc.page_area();
    let candidates = doc
        .blocks
        .iter()
        .map(|b| RegionMatch {
            region_id: b.id.clone(),
            granularity: Granularity::Block,
            bbox: b.bbox,
            text: b.text.clone(),
            score: score_region(query, &b.text, &b.bbox, page_area, cfg),
            rank: 0,
        })
        .collect();
    rank_candidates(candidates, cfg.threshold, cfg.top_k.min(cfg.max_blocks))
}

/// Block-level matches for an answer, best first.
pub fn match_blocks(
    answer: &str,
    question: &str,
    doc: &Document,
    cfg: &MatchConfig,
) -> Result<Vec<RegionMatch>, MatchError> {
    let query = Query::new(answer, question);
    check_inputs(&query, doc, cfg)?;
    Ok(match_blocks_query(&query, doc, cfg))
}
