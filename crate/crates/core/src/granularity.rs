//! Refinement of block matches to line, word and point granularity.

use crate::config::MatchConfig;
use crate::geometry::union_bbox;
use crate::layout::{Document, Line};
use crate::matcher::{
    check_inputs, match_blocks_query, rank_candidates, score_region, Granularity, MatchError, Query, RegionMatch,
    ScoreBreakdown,
};
use crate::text::{levenshtein, normalize, sim, NormText};
use crate::{BBox, Pt};

/// Answer tokens at least this long tolerate small edit distances.
pub const FUZZY_TOKEN_MIN_LEN: usize = 5;

/// A contiguous stretch of words in one line, anchored on matched words at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct WordRun {
    pub line_id: String,
    pub start_idx: usize,
    pub end_idx: usize,
    pub matched_count: usize,
    pub gap_count: usize,
    pub run_text: String,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundingResult {
    pub question_id: String,
    pub doc_id: String,
    pub question: String,
    pub answer: String,
    pub block_regions: Vec<RegionMatch>,
    pub line_regions: Vec<RegionMatch>,
    pub word_regions: Vec<RegionMatch>,
    pub points: Vec<Pt>,
    pub config: MatchConfig,
}

pub(crate) fn refine_lines_query(
    query: &Query,
    matched_blocks: &[RegionMatch],
    doc: &Document,
    cfg: &MatchConfig,
) -> Vec<RegionMatch> {
    let page_area = doc.page_area();
    // candidates in reading order so the stable sort breaks ties by position
    let candidates = doc
        .lines()
        .filter(|(b, _)| matched_blocks.iter().any(|m| m.region_id == b.id))
        .map(|(_, l)| RegionMatch {
            region_id: l.id.clone(),
            granularity: Granularity::Line,
            bbox: l.bbox,
            text: l.text.clone(),
            score: score_region(query, &l.text, &l.bbox, page_area, cfg),
            rank: 0,
        })
        .collect();
    rank_candidates(candidates, cfg.threshold, cfg.max_lines)
}

/// Scores the lines of the matched blocks and keeps the best `max_lines` above threshold.
pub fn refine_lines(
    answer: &str,
    question: &str,
    matched_blocks: &[RegionMatch],
    doc: &Document,
    cfg: &MatchConfig,
) -> Vec<RegionMatch> {
    refine_lines_query(&Query::new(answer, question), matched_blocks, doc, cfg)
}

fn word_matches(word: &NormText, answer_tokens: &[String], cfg: &MatchConfig) -> bool {
    if word.is_empty() {
        return false;
    }
    let exact = |w: &str| answer_tokens.iter().any(|t| t == w);
    if exact(&word.normalized) {
        return true;
    }
    // "T.P." normalizes to "t p": matched when every piece is an answer token
    if word.tokens.len() > 1 && word.tokens.iter().all(|t| exact(t)) {
        return true;
    }
    answer_tokens.iter().any(|t| {
        t.chars().count() >= FUZZY_TOKEN_MIN_LEN && levenshtein(&word.normalized, t) <= cfg.word_edit_tolerance
    })
}

/// Indices of the words in `line` that match some answer token, ascending.
pub fn match_words(answer_tokens: &[String], line: &Line, cfg: &MatchConfig) -> Vec<usize> {
    line.words
        .iter()
        .enumerate()
        .filter(|(_, w)| word_matches(&normalize(&w.text), answer_tokens, cfg))
        .map(|(i, _)| i)
        .collect()
}

fn run_text(line: &Line, start: usize, end: usize) -> String {
    let raw: Vec<&str> = line.words[start..=end].iter().map(|w| w.text.as_str()).collect();
    normalize(&raw.join(" ")).normalized
}

/// Longest run of matched words whose interior unmatched words number at most
/// the gap tolerance. Ties go to the run more similar to the answer, then to
/// the leftmost run.
pub fn longest_contiguous_run(matched: &[usize], line: &Line, answer: &NormText, cfg: &MatchConfig) -> Option<WordRun> {
    // for each starting match, the furthest end within tolerance has the most matches
    let mut best: Option<(usize, f64, usize, usize)> = None;
    let mut end = 0;
    for start in 0..matched.len() {
        end = end.max(start);
        while end + 1 < matched.len() {
            let span = matched[end + 1] - matched[start] + 1;
            if span - (end + 2 - start) > cfg.word_gap_tolerance {
                break;
            }
            end += 1;
        }
        let count = end - start + 1;
        let better = match best {
            None => true,
            Some((c, _, _, _)) if count > c => true,
            Some((c, _, _, _)) if count < c => false,
            Some((_, s, _, _)) => {
                let cand = sim(&run_text(line, matched[start], matched[end]), &answer.normalized);
                cand > s
            }
        };
        if better {
            let s = sim(&run_text(line, matched[start], matched[end]), &answer.normalized);
            best = Some((count, s, matched[start], matched[end]));
        }
    }
    let (matched_count, _, start_idx, end_idx) = best?;
    let boxes: Vec<BBox> = line.words[start_idx..=end_idx].iter().map(|w| w.bbox).collect();
    Some(WordRun {
        line_id: line.id.clone(),
        start_idx,
        end_idx,
        matched_count,
        gap_count: end_idx - start_idx + 1 - matched_count,
        run_text: run_text(line, start_idx, end_idx),
        bbox: union_bbox(&boxes).expect("run has at least one word"),
    })
}

pub(crate) fn ground_words_query(
    answer: &NormText,
    line_regions: &[RegionMatch],
    doc: &Document,
    cfg: &MatchConfig,
) -> Vec<RegionMatch> {
    let mut out = Vec::new();
    for (_, line) in doc
        .lines()
        .filter(|(_, l)| line_regions.iter().any(|r| r.region_id == l.id))
    {
        if line.words.is_empty() {
            continue;
        }
        let matched = match_words(&answer.tokens, line, cfg);
        let Some(run) = longest_contiguous_run(&matched, line, answer, cfg) else {
            continue;
        };
        let run_sim = sim(&run.run_text, &answer.normalized);
        let span = run.end_idx - run.start_idx + 1;
        for word in &line.words[run.start_idx..=run.end_idx] {
            out.push(RegionMatch {
                region_id: word.id.clone(),
                granularity: Granularity::Word,
                bbox: word.bbox,
                text: word.text.clone(),
                score: ScoreBreakdown {
                    fuzzy: run_sim,
                    length_factor: 1.0,
                    answer_match: run.matched_count as f64 / span as f64,
                    penalty_short_applied: false,
                    penalty_context_applied: false,
                    combined: run_sim,
                },
                rank: out.len() + 1,
            });
        }
    }
    out
}

/// One region per word of the best run in each selected line, lines in reading order.
pub fn ground_words(answer: &str, line_regions: &[RegionMatch], doc: &Document, cfg: &MatchConfig) -> Vec<RegionMatch> {
    ground_words_query(&normalize(answer), line_regions, doc, cfg)
}

/// Centroid of each block region, in rank order.
pub fn derive_points(block_regions: &[RegionMatch]) -> Vec<Pt> {
    block_regions.iter().map(|r| r.bbox.centroid()).collect()
}

/// Full pipeline: blocks, then lines within them, then words, then points.
pub fn ground(
    question_id: &str,
    answer: &str,
    question: &str,
    doc: &Document,
    cfg: &MatchConfig,
) -> Result<GroundingResult, MatchError> {
    let query = Query::new(answer, question);
    check_inputs(&query, doc, cfg)?;
    let block_regions = match_blocks_query(&query, doc, cfg);
    let line_regions = refine_lines_query(&query, &block_regions, doc, cfg);
    let word_regions = ground_words_query(&query.answer, &line_regions, doc, cfg);
    let points = derive_points(&block_regions);
    Ok(GroundingResult {
        question_id: question_id.to_string(),
        doc_id: doc.doc_id.clone(),
        question: question.to_string(),
        answer: answer.to_string(),
        block_regions,
        line_regions,
        word_regions,
        points,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{Block, Word};

    fn line(id: &str, text: &str, y: f64) -> Line {
        let mut x = 60.0;
        let words = text
            .split_whitespace()
            .enumerate()
            .map(|(i, w)| {
                let width = 12.0 * w.chars().count() as f64;
                let b = BBox::new(x, y, x + width, y + 20.0);
                x += width + 10.0;
                Word {
                    id: format!("{id}.w{i}"),
                    bbox: b,
                    text: w.into(),
                }
            })
            .collect();
        Line {
            id: id.into(),
            bbox: BBox::new(60.0, y, x, y + 20.0),
            text: text.into(),
            words,
        }
    }

    fn block(id: &str, lines: Vec<Line>) -> Block {
        let boxes: Vec<BBox> = lines.iter().map(|l| l.bbox).collect();
        let text = lines.iter().map(|l| l.text.as_str()).collect::<Vec<_>>().join(" ");
        Block {
            id: id.into(),
            bbox: union_bbox(&boxes).unwrap(),
            text,
            lines,
        }
    }

    fn doc(blocks: Vec<Block>) -> Document {
        Document {
            doc_id: "g".into(),
            page_width: 1240.0,
            page_height: 1754.0,
            image_path: None,
            blocks,
        }
    }

    fn tokens(s: &str) -> Vec<String> {
        normalize(s).tokens
    }

    #[test]
    fn match_words_examples() {
        let cfg = MatchConfig::default();
        let l = line("l", "transferred to new delhi", 0.0);
        assert_eq!(match_words(&tokens("new delhi"), &l, &cfg), vec![2, 3]);
        let noisy = line("l", "posted at delhl office", 0.0);
        assert_eq!(match_words(&tokens("delhi"), &noisy, &cfg), vec![2]);
        assert!(match_words(&tokens("mumbai"), &l, &cfg).is_empty());
        // short tokens need an exact match
        let short = line("l", "to tu", 0.0);
        assert_eq!(match_words(&tokens("to"), &short, &cfg), vec![0]);
        let dotted = line("l", "Shri T.P. Singh", 0.0);
        assert_eq!(match_words(&tokens("Shri T.P. Singh"), &dotted, &cfg), vec![0, 1, 2]);
    }

    #[test]
    fn runs() {
        let cfg = MatchConfig::default();
        let l = line("l", "a b c d e f", 0.0);
        let ans = normalize("c d e");
        let r = longest_contiguous_run(&[2, 3, 4], &l, &ans, &cfg).unwrap();
        assert_eq!((r.start_idx, r.end_idx, r.gap_count, r.matched_count), (2, 4, 0, 3));
        let r = longest_contiguous_run(&[1, 3, 4], &l, &ans, &cfg).unwrap();
        assert_eq!((r.start_idx, r.end_idx, r.gap_count, r.matched_count), (1, 4, 1, 3));
        assert_eq!(r.bbox, union_bbox(&[l.words[1].bbox, l.words[4].bbox]).unwrap());
        assert!(longest_contiguous_run(&[], &l, &ans, &cfg).is_none());
    }

    #[test]
    fn single_word_runs_tie_break_on_similarity() {
        let cfg = MatchConfig::default();
        let l = line("l", "delhl x y z w delhi", 0.0);
        let r = longest_contiguous_run(&[0, 5], &l, &normalize("delhi"), &cfg).unwrap();
        assert_eq!((r.start_idx, r.end_idx), (5, 5));
        let same = line("l", "delhi x y z w delhi", 0.0);
        let r = longest_contiguous_run(&[0, 5], &same, &normalize("delhi"), &cfg).unwrap();
        assert_eq!(r.start_idx, 0);
    }

    #[test]
    fn refine_and_ground_single_line() {
        let cfg = MatchConfig::default();
        let d = doc(vec![
            block("b0", vec![line("b0.l0", "Office of the Principal Secretary", 60.0)]),
            block(
                "b1",
                vec![
                    line("b1.l0", "Shri Ramesh Kumar has been", 200.0),
                    line("b1.l1", "transferred to New Delhi with", 230.0),
                    line("b1.l2", "immediate effect until further orders", 260.0),
                ],
            ),
        ]);
        let blocks = match_blocks_query(&Query::new("New Delhi", "Where was he transferred?"), &d, &cfg);
        assert_eq!(blocks[0].region_id, "b1");
        let mut one = cfg.clone();
        one.max_lines = 1;
        let lines = refine_lines("New Delhi", "Where was he transferred?", &blocks, &d, &one);
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].region_id, "b1.l1");

        let g = ground("q1", "New Delhi", "Where was he transferred?", &d, &cfg).unwrap();
        assert_eq!(g.block_regions.len(), 1);
        assert_eq!(g.line_regions.len(), 1);
        let words: Vec<_> = g.word_regions.iter().map(|w| w.region_id.as_str()).collect();
        assert_eq!(words, ["b1.l1.w2", "b1.l1.w3"]);
        assert_eq!(g.points, vec![g.block_regions[0].bbox.centroid()]);
    }

    #[test]
    fn answer_across_two_lines() {
        let cfg = MatchConfig::default();
        let d = doc(vec![block(
            "b0",
            vec![
                line("l0", "Notice issued today", 60.0),
                line("l1", "Regional Passport", 90.0),
                line("l2", "Office Chandigarh", 120.0),
                line("l3", "Applicants may apply online soon", 150.0),
            ],
        )]);
        let g = ground(
            "q",
            "Regional Passport Office Chandigarh",
            "Which office issued the notice?",
            &d,
            &cfg,
        )
        .unwrap();
        let ids: Vec<_> = g.line_regions.iter().map(|l| l.region_id.as_str()).collect();
        assert_eq!(ids, ["l1", "l2"]);
        assert_eq!(g.word_regions.len(), 4);
    }

    #[test]
    fn absent_answer_is_empty() {
        let d = doc(vec![block("b0", vec![line("l0", "Notice issued today", 60.0)])]);
        let g = ground("q", "zebra quantum", "?", &d, &MatchConfig::default()).unwrap();
        assert!(g.block_regions.is_empty() && g.line_regions.is_empty());
        assert!(g.word_regions.is_empty() && g.points.is_empty());
    }

    #[test]
    fn max_lines_prefix() {
        let d = doc(vec![block(
            "b0",
            vec![
                line("l0", "alpha beta gamma", 60.0),
                line("l1", "alpha beta", 90.0),
                line("l2", "beta gamma delta", 120.0),
            ],
        )]);
        let cfg = MatchConfig::default();
        let blocks = match_blocks_query(&Query::new("alpha beta gamma", ""), &d, &cfg);
        let at = |k| {
            let mut c = cfg.clone();
            c.max_lines = k;
            refine_lines("alpha beta gamma", "", &blocks, &d, &c)
        };
        let (one, three) = (at(1), at(3));
        assert!(!one.is_empty());
        assert_eq!(&three[..one.len()], &one[..]);
    }
}
