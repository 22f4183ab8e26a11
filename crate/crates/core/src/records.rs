//! Wire formats for predictions and ground truth.
//!
//! Both files hold a JSON array with one record per question, written one
//! record per line. A file holding a single bare record is also accepted.

use std::collections::HashSet;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::MatchConfig;
use crate::granularity::GroundingResult;
use crate::matcher::{RegionMatch, ScoreBreakdown};
use crate::{BBox, Pt};

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("cannot parse records at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("record {question_id}: {message}")]
    Invalid { question_id: String, message: String },
    #[error("duplicate question_id {0}")]
    Duplicate(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub id: String,
    pub bbox: BBox,
    pub score: ScoreBreakdown,
    pub rank: usize,
}

impl From<&RegionMatch> for RegionRecord {
    fn from(r: &RegionMatch) -> Self {
        RegionRecord {
            id: r.region_id.clone(),
            bbox: r.bbox,
            score: r.score,
            rank: r.rank,
        }
    }
}

/// Grounding output for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub question_id: String,
    pub doc_id: String,
    pub question: String,
    pub answer: String,
    pub config: MatchConfig,
    pub blocks: Vec<RegionRecord>,
    pub lines: Vec<RegionRecord>,
    pub words: Vec<RegionRecord>,
    pub points: Vec<Pt>,
}

impl From<&GroundingResult> for PredictionRecord {
    fn from(g: &GroundingResult) -> Self {
        let conv = |rs: &[RegionMatch]| rs.iter().map(RegionRecord::from).collect();
        PredictionRecord {
            question_id: g.question_id.clone(),
            doc_id: g.doc_id.clone(),
            question: g.question.clone(),
            answer: g.answer.clone(),
            config: g.config.clone(),
            blocks: conv(&g.block_regions),
            lines: conv(&g.line_regions),
            words: conv(&g.word_regions),
            points: g.points.clone(),
        }
    }
}

impl PredictionRecord {
    /// A prediction that reproduces the ground truth exactly.
    pub fn from_ground_truth(gt: &GroundTruth, config: &MatchConfig) -> Self {
        let perfect = ScoreBreakdown {
            fuzzy: 1.0,
            length_factor: 1.0,
            answer_match: 1.0,
            penalty_short_applied: false,
            penalty_context_applied: false,
            combined: 1.0,
        };
        let conv = |kind: &str, boxes: &[BBox]| {
            boxes
                .iter()
                .enumerate()
                .map(|(i, b)| RegionRecord {
                    id: format!("gt-{kind}-{i}"),
                    bbox: *b,
                    score: perfect,
                    rank: i + 1,
                })
                .collect()
        };
        PredictionRecord {
            question_id: gt.question_id.clone(),
            doc_id: gt.doc_id.clone(),
            question: gt.question.clone(),
            answer: gt.answer.clone(),
            config: config.clone(),
            blocks: conv("block", &gt.regions.block),
            lines: conv("line", &gt.regions.line),
            words: conv("word", &gt.regions.word),
            points: gt.regions.point.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GtRegions {
    #[serde(default)]
    pub block: Vec<BBox>,
    #[serde(default)]
    pub line: Vec<BBox>,
    #[serde(default)]
    pub word: Vec<BBox>,
    #[serde(default)]
    pub point: Vec<Pt>,
}

/// Annotated answer regions for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub question_id: String,
    pub doc_id: String,
    pub question: String,
    pub answer: String,
    #[serde(default)]
    pub regions: GtRegions,
}

impl GroundTruth {
    pub fn validate(&self) -> Result<(), RecordError> {
        let r = &self.regions;
        let invalid = |message: &str| RecordError::Invalid {
            question_id: self.question_id.clone(),
            message: message.into(),
        };
        if r.block.is_empty() && r.line.is_empty() && r.word.is_empty() && r.point.is_empty() {
            return Err(invalid("no ground-truth regions"));
        }
        if !r.block.iter().chain(&r.line).chain(&r.word).all(|b| b.is_valid()) {
            return Err(invalid("invalid box"));
        }
        if !r.point.iter().all(|p| p.is_valid()) {
            return Err(invalid("invalid point"));
        }
        Ok(())
    }
}

fn parse_many<T: DeserializeOwned>(raw: &str) -> Result<Vec<T>, RecordError> {
    let syntax = |e: serde_json::Error| RecordError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(raw).map_err(syntax)?;
    if value.is_array() {
        serde_json::from_value(value).map_err(syntax)
    } else {
        serde_json::from_value(value).map(|one| vec![one]).map_err(syntax)
    }
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<(), RecordError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(RecordError::Duplicate(id.to_string()));
        }
    }
    Ok(())
}

pub fn parse_predictions(raw: &str) -> Result<Vec<PredictionRecord>, RecordError> {
    let recs: Vec<PredictionRecord> = parse_many(raw)?;
    check_unique(recs.iter().map(|r| r.question_id.as_str()))?;
    Ok(recs)
}

pub fn parse_ground_truth(raw: &str) -> Result<Vec<GroundTruth>, RecordError> {
    let recs: Vec<GroundTruth> = parse_many(raw)?;
    check_unique(recs.iter().map(|r| r.question_id.as_str()))?;
    for r in &recs {
        r.validate()?;
    }
    Ok(recs)
}

/// JSON array, one compact record per line.
pub fn write_records<T: Serialize>(records: &[T]) -> String {
    if records.is_empty() {
        return "[]\n".into();
    }
    let lines: Vec<String> = records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize"))
        .collect();
    format!("[\n{}\n]\n", lines.join(",\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const GT: &str = r#"[
{"question_id":"q1","doc_id":"d","question":"?","answer":"a","regions":{"block":[[0,0,10,10]],"line":[],"word":[],"point":[[5,5]]}}
]"#;

    #[test]
    fn ground_truth_parses() {
        let gts = parse_ground_truth(GT).unwrap();
        assert_eq!(gts.len(), 1);
        assert_eq!(gts[0].regions.point, vec![Pt::new(5.0, 5.0)]);
        let single = parse_ground_truth(GT.trim().trim_start_matches('[').trim_end_matches(']')).unwrap();
        assert_eq!(single, gts);
    }

    #[test]
    fn duplicates_and_empty_regions_rejected() {
        let dup = format!("[{0},{0}]", GT.trim().trim_start_matches('[').trim_end_matches(']'));
        assert!(matches!(parse_ground_truth(&dup), Err(RecordError::Duplicate(id)) if id == "q1"));
        let empty = r#"{"question_id":"q","doc_id":"d","question":"","answer":"","regions":{}}"#;
        assert!(matches!(parse_ground_truth(empty), Err(RecordError::Invalid { .. })));
    }

    #[test]
    fn perfect_prediction_round_trips() {
        let gt = &parse_ground_truth(GT).unwrap()[0];
        let p = PredictionRecord::from_ground_truth(gt, &MatchConfig::default());
        let text = write_records(std::slice::from_ref(&p));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(parse_predictions(&text).unwrap(), vec![p]);
    }

    #[test]
    fn score_uses_wire_names() {
        let s = ScoreBreakdown {
            fuzzy: 1.0,
            length_factor: 0.5,
            answer_match: 1.0,
            penalty_short_applied: false,
            penalty_context_applied: true,
            combined: 0.65,
        };
        let v = serde_json::to_value(s).unwrap();
        for key in ["fuzzy", "length", "answer", "pen_short", "pen_ctx", "combined"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
