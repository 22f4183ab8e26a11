//! IoU-based precision / recall / F1 at block, line, word and point granularity.
//!
//! Predictions are paired with ground truth by a maximum one-to-one matching,
//! so adding predictions can never lower the true-positive count. Corpus
//! scores are micro-averaged: counts are summed over questions first.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::MatchConfig;
use crate::geometry::{iou, Point, Rect};
use crate::records::{GroundTruth, PredictionRecord};
use crate::scalar::Scalar;
use crate::BBox;

/// Distance-mode match radius as a fraction of the page diagonal.
pub const POINT_RADIUS_FRACTION: f64 = 0.025;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("question {question_id}: point mode {mode} needs ground-truth {missing}")]
    MissingGranularity {
        question_id: String,
        mode: &'static str,
        missing: &'static str,
    },
    #[error("prediction {pred} does not belong to ground truth {gt}")]
    IdMismatch { pred: String, gt: String },
    #[error("prediction {0} has no ground-truth record")]
    UnknownQuestion(String),
    #[error("duplicate question_id {0}")]
    Duplicate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalGranularity {
    Block,
    Line,
    Word,
    Point,
}

impl EvalGranularity {
    pub const ALL: [EvalGranularity; 4] = [
        EvalGranularity::Block,
        EvalGranularity::Line,
        EvalGranularity::Word,
        EvalGranularity::Point,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EvalGranularity::Block => "block",
            EvalGranularity::Line => "line",
            EvalGranularity::Word => "word",
            EvalGranularity::Point => "point",
        }
    }
}

impl std::str::FromStr for EvalGranularity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EvalGranularity::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| format!("unknown granularity {s}"))
    }
}

/// How predicted points are matched at point granularity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PointMode {
    /// A point matches a ground-truth block box that contains it.
    PointInBox,
    /// A point matches a ground-truth point within 2.5% of the page diagonal.
    Distance { page_diagonal: f64 },
}

impl PointMode {
    fn name(&self) -> &'static str {
        match self {
            PointMode::PointInBox => "point_in_box",
            PointMode::Distance { .. } => "distance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub iou_threshold: f64,
    pub point_mode: PointMode,
}

impl EvalOptions {
    pub fn from_config(cfg: &MatchConfig) -> Self {
        EvalOptions {
            iou_threshold: cfg.iou_threshold,
            point_mode: PointMode::PointInBox,
        }
    }
}

/// Size of a maximum matching in a bipartite graph given as adjacency lists
/// from left vertices to right vertex indices (Kuhn's augmenting paths).
pub fn max_bipartite_matching(adj: &[Vec<usize>], n_right: usize) -> usize {
    fn augment(u: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &v in &adj[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if owner[v].is_none_or(|w| augment(w, adj, seen, owner)) {
                owner[v] = Some(u);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; n_right];
    let mut size = 0;
    for u in 0..adj.len() {
        let mut seen = vec![false; n_right];
        if augment(u, adj, &mut seen, &mut owner) {
            size += 1;
        }
    }
    size
}

/// Number of prediction/ground-truth pairs in a maximum one-to-one matching
/// where a pair qualifies when IoU reaches the threshold.
pub fn match_regions<T: Scalar>(preds: &[Rect<T>], gts: &[Rect<T>], iou_threshold: T) -> usize {
    let adj: Vec<Vec<usize>> = preds
        .iter()
        .map(|p| (0..gts.len()).filter(|&j| iou(p, &gts[j]) >= iou_threshold).collect())
        .collect();
    max_bipartite_matching(&adj, gts.len())
}

fn match_points_in_boxes<T: Scalar>(points: &[Point<T>], boxes: &[Rect<T>]) -> usize {
    let adj: Vec<Vec<usize>> = points
        .iter()
        .map(|p| (0..boxes.len()).filter(|&j| boxes[j].contains_point(p)).collect())
        .collect();
    max_bipartite_matching(&adj, boxes.len())
}

fn match_points_by_distance<T: Scalar>(points: &[Point<T>], gts: &[Point<T>], radius: T) -> usize {
    let adj: Vec<Vec<usize>> = points
        .iter()
        .map(|p| (0..gts.len()).filter(|&j| p.distance(&gts[j]) <= radius).collect())
        .collect();
    max_bipartite_matching(&adj, gts.len())
}

pub fn match_points(pred_points: &[crate::Pt], gt: &GroundTruth, mode: PointMode) -> Result<usize, EvalError> {
    let missing = |missing| EvalError::MissingGranularity {
        question_id: gt.question_id.clone(),
        mode: mode.name(),
        missing,
    };
    match mode {
        PointMode::PointInBox => {
            if gt.regions.block.is_empty() {
                return Err(missing("block"));
            }
            Ok(match_points_in_boxes(pred_points, &gt.regions.block))
        }
        PointMode::Distance { page_diagonal } => {
            if gt.regions.point.is_empty() {
                return Err(missing("point"));
            }
            Ok(match_points_by_distance(
                pred_points,
                &gt.regions.point,
                POINT_RADIUS_FRACTION * page_diagonal,
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub n_pred: usize,
    pub n_gt: usize,
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts {
            tp: self.tp + o.tp,
            n_pred: self.n_pred + o.n_pred,
            n_gt: self.n_gt + o.n_gt,
        }
    }
}

pub type QuestionCounts = BTreeMap<EvalGranularity, Counts>;

fn region_counts(preds: &[BBox], gts: &[BBox], thr: f64) -> Counts {
    Counts {
        tp: match_regions(preds, gts, thr),
        n_pred: preds.len(),
        n_gt: gts.len(),
    }
}

/// Raw per-granularity counts for one question.
pub fn evaluate_question(
    pred: &PredictionRecord,
    gt: &GroundTruth,
    opts: &EvalOptions,
) -> Result<QuestionCounts, EvalError> {
    if pred.question_id != gt.question_id {
        return Err(EvalError::IdMismatch {
            pred: pred.question_id.clone(),
            gt: gt.question_id.clone(),
        });
    }
    let boxes = |rs: &[crate::records::RegionRecord]| rs.iter().map(|r| r.bbox).collect::<Vec<_>>();
    let thr = opts.iou_threshold;
    let mut out = QuestionCounts::new();
    out.insert(
        EvalGranularity::Block,
        region_counts(&boxes(&pred.blocks), &gt.regions.block, thr),
    );
    out.insert(
        EvalGranularity::Line,
        region_counts(&boxes(&pred.lines), &gt.regions.line, thr),
    );
    out.insert(
        EvalGranularity::Word,
        region_counts(&boxes(&pred.words), &gt.regions.word, thr),
    );
    let n_gt = match opts.point_mode {
        PointMode::PointInBox => gt.regions.block.len(),
        PointMode::Distance { .. } => gt.regions.point.len(),
    };
    let tp = if pred.points.is_empty() || n_gt == 0 {
        0
    } else {
        match_points(&pred.points, gt, opts.point_mode)?
    };
    out.insert(
        EvalGranularity::Point,
        Counts {
            tp,
            n_pred: pred.points.len(),
            n_gt,
        },
    );
    Ok(out)
}

/// `100 * num / den` as an exact rational; zero when `den` is zero.
fn percent(num: usize, den: usize) -> Ratio<u64> {
    if den == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(100 * num as u64, den as u64)
    }
}

/// Two decimals, half rounded up.
pub fn fmt_percent(r: Ratio<u64>) -> String {
    let hundredths = (r * 100 + Ratio::new(1, 2)).floor().to_integer();
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

fn to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub granularity: EvalGranularity,
    pub tp: usize,
    pub n_pred: usize,
    pub n_gt: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ReportRow {
    pub fn from_counts(granularity: EvalGranularity, c: Counts) -> Self {
        let (p, r, f) = Self::exact(c);
        ReportRow {
            granularity,
            tp: c.tp,
            n_pred: c.n_pred,
            n_gt: c.n_gt,
            precision: to_f64(p),
            recall: to_f64(r),
            f1: to_f64(f),
        }
    }

    fn counts(&self) -> Counts {
        Counts {
            tp: self.tp,
            n_pred: self.n_pred,
            n_gt: self.n_gt,
        }
    }

    /// Exact (precision, recall, F1) percentages. F1 = 2PR/(P+R) reduces to
    /// 200·tp / (n_pred + n_gt) whenever tp > 0.
    pub fn exact(c: Counts) -> (Ratio<u64>, Ratio<u64>, Ratio<u64>) {
        let p = percent(c.tp, c.n_pred);
        let r = percent(c.tp, c.n_gt);
        let f = if c.tp == 0 {
            Ratio::from_integer(0)
        } else {
            percent(2 * c.tp, c.n_pred + c.n_gt)
        };
        (p, r, f)
    }

    pub fn exact_f1(&self) -> Ratio<u64> {
        Self::exact(self.counts()).2
    }

    /// Percentages formatted to two decimals: (precision, recall, f1).
    pub fn formatted(&self) -> (String, String, String) {
        let (p, r, f) = Self::exact(self.counts());
        (fmt_percent(p), fmt_percent(r), fmt_percent(f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub iou_threshold: f64,
    pub point_mode: PointMode,
    pub n_questions: usize,
    pub config: MatchConfig,
}

impl EvalReport {
    pub fn row(&self, g: EvalGranularity) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.granularity == g)
    }

    /// `granularity,precision,recall,f1,tp,n_pred,n_gt`, restricted to `only` when given.
    pub fn to_csv(&self, only: Option<EvalGranularity>) -> String {
        let mut s = String::from("granularity,precision,recall,f1,tp,n_pred,n_gt\n");
        for row in self.rows.iter().filter(|r| only.is_none_or(|g| g == r.granularity)) {
            let (p, r, f) = row.formatted();
            let _ = writeln!(
                s,
                "{},{p},{r},{f},{},{},{}",
                row.granularity.name(),
                row.tp,
                row.n_pred,
                row.n_gt
            );
        }
        s
    }

    /// Structured report: header with the matching protocol, then one object per granularity.
    pub fn to_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let (p, r, f) = row.formatted();
                serde_json::json!({
                    "granularity": row.granularity.name(),
                    "precision": p, "recall": r, "f1": f,
                    "tp": row.tp, "n_pred": row.n_pred, "n_gt": row.n_gt,
                })
            })
            .collect();
        let doc = serde_json::json!({
            "iou_threshold": self.iou_threshold,
            "point_mode": self.point_mode,
            "point_protocol_note": "point-level matching rule is a chosen convention, not a published protocol",
            "matching": "maximum one-to-one bipartite",
            "averaging": "micro",
            "n_questions": self.n_questions,
            "rows": rows,
            "config": self.config,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Micro-averaged report over a corpus. Ground-truth questions without a
/// prediction count as empty predictions.
pub fn evaluate_corpus(
    preds: &[PredictionRecord],
    gts: &[GroundTruth],
    cfg: &MatchConfig,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let mut by_id: HashMap<&str, &PredictionRecord> = HashMap::new();
    for p in preds {
        if by_id.insert(&p.question_id, p).is_some() {
            return Err(EvalError::Duplicate(p.question_id.clone()));
        }
    }
    let mut gt_ids = HashSet::new();
    for g in gts {
        if !gt_ids.insert(g.question_id.as_str()) {
            return Err(EvalError::Duplicate(g.question_id.clone()));
        }
    }
    let mut unknown: Vec<&str> = by_id.keys().filter(|id| !gt_ids.contains(*id)).copied().collect();
    unknown.sort();
    if let Some(id) = unknown.first() {
        return Err(EvalError::UnknownQuestion(id.to_string()));
    }

    let per_question: Vec<QuestionCounts> = gts
        .par_iter()
        .map(|gt| {
            let empty;
            let pred = match by_id.get(gt.question_id.as_str()) {
                Some(p) => *p,
                None => {
                    empty = PredictionRecord {
                        question_id: gt.question_id.clone(),
                        doc_id: gt.doc_id.clone(),
                        question: gt.question.clone(),
                        answer: gt.answer.clone(),
                        config: cfg.clone(),
                        blocks: vec![],
                        lines: vec![],
                        words: vec![],
                        points: vec![],
                    };
                    &empty
                }
            };
            evaluate_question(pred, gt, opts)
        })
        .collect::<Result<_, _>>()?;

    let rows = EvalGranularity::ALL
        .into_iter()
        .map(|g| {
            let total = per_question.iter().map(|q| q[&g]).fold(Counts::default(), |a, b| a + b);
            ReportRow::from_counts(g, total)
        })
        .collect();
    Ok(EvalReport {
        rows,
        iou_threshold: opts.iou_threshold,
        point_mode: opts.point_mode,
        n_questions: gts.len(),
        config: cfg.clone(),
    })
}
