//! Sweeps of `max_blocks` / `max_lines` over a corpus.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::MatchConfig;
use crate::evaluator::{evaluate_corpus, EvalError, EvalGranularity, EvalOptions, ReportRow};
use crate::granularity::ground;
use crate::layout::{parse_layout, Document, LayoutError};
use crate::matcher::MatchError;
use crate::records::{parse_ground_truth, GroundTruth, PredictionRecord, RecordError};

#[derive(Debug, Error)]
pub enum AblationError {
    #[error("invalid sweep: {0}")]
    Spec(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("layout {path}: {source}")]
    Layout { path: String, source: LayoutError },
    #[error(transparent)]
    Records(#[from] RecordError),
    #[error("ground truth {question_id} refers to unknown document {doc_id}")]
    UnknownDocument { question_id: String, doc_id: String },
    #[error("duplicate document id {0}")]
    DuplicateDocument(String),
    #[error("question {question_id}: {source}")]
    Match { question_id: String, source: MatchError },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("recall decreased from {prev} at {param}={prev_value} to {cur} at {param}={value}")]
    RecallDecrease {
        param: &'static str,
        prev_value: usize,
        value: usize,
        prev: String,
        cur: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationParam {
    MaxBlocks,
    MaxLines,
}

impl AblationParam {
    pub fn name(&self) -> &'static str {
        match self {
            AblationParam::MaxBlocks => "max_blocks",
            AblationParam::MaxLines => "max_lines",
        }
    }

    /// Granularity a sweep of this parameter is usually read at.
    pub fn default_granularity(&self) -> EvalGranularity {
        match self {
            AblationParam::MaxBlocks => EvalGranularity::Block,
            AblationParam::MaxLines => EvalGranularity::Line,
        }
    }

    fn apply(&self, cfg: &MatchConfig, value: usize) -> MatchConfig {
        let mut c = cfg.clone();
        match self {
            AblationParam::MaxBlocks => c.max_blocks = value,
            AblationParam::MaxLines => c.max_lines = value,
        }
        c
    }
}

impl std::str::FromStr for AblationParam {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "max_blocks" => Ok(AblationParam::MaxBlocks),
            "max_lines" => Ok(AblationParam::MaxLines),
            _ => Err(format!("unknown sweep parameter {s}; expected max-blocks or max-lines")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationSpec {
    pub param: AblationParam,
    pub values: Vec<usize>,
    pub granularity: EvalGranularity,
    pub config: MatchConfig,
}

impl AblationSpec {
    pub fn new(param: AblationParam, values: Vec<usize>, config: MatchConfig) -> Self {
        AblationSpec {
            param,
            values,
            granularity: param.default_granularity(),
            config,
        }
    }

    pub fn validate(&self) -> Result<(), AblationError> {
        if self.values.is_empty() {
            return Err(AblationError::Spec("no values to sweep".into()));
        }
        if self.values[0] == 0 {
            return Err(AblationError::Spec("values must be positive".into()));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AblationError::Spec("values must be strictly ascending".into()));
        }
        self.config.validate().map_err(|e| AblationError::Spec(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub value: usize,
    pub row: ReportRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub param: AblationParam,
    pub granularity: EvalGranularity,
    pub rows: Vec<AblationRow>,
    /// Index of the first row with the highest F1.
    pub best: usize,
}

impl AblationTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("value,precision,recall,f1,best\n");
        for (i, r) in self.rows.iter().enumerate() {
            let (p, rc, f) = r.row.formatted();
            let _ = writeln!(s, "{},{p},{rc},{f},{}", r.value, u8::from(i == self.best));
        }
        s
    }

    pub fn precisions(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.row.precision).collect()
    }

    pub fn recalls(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.row.recall).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value as f64).collect()
    }
}

fn layout_files(dir: &Path) -> Result<Vec<PathBuf>, AblationError> {
    let nested = dir.join("layouts");
    let dir = if nested.is_dir() { nested } else { dir.to_path_buf() };
    let io = |source| AblationError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(&dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().is_some_and(|e| e == "json") && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Reads every `*.json` layout in `dir` (or `dir/layouts` when present),
/// sorted by file name.
pub fn load_corpus(dir: &Path) -> Result<Vec<Document>, AblationError> {
    let files = layout_files(dir)?;
    let docs: Vec<Document> = files
        .par_iter()
        .map(|path| {
            let raw = std::fs::read_to_string(path).map_err(|source| AblationError::Io {
                path: path.display().to_string(),
                source,
            })?;
            parse_layout(&raw).map_err(|source| AblationError::Layout {
                path: path.display().to_string(),
                source,
            })
        })
        .collect::<Result<_, _>>()?;
    let mut seen = HashMap::new();
    for d in &docs {
        if seen.insert(d.doc_id.as_str(), ()).is_some() {
            return Err(AblationError::DuplicateDocument(d.doc_id.clone()));
        }
    }
    Ok(docs)
}

/// Grounds every ground-truth question (with its own question and answer)
/// under `cfg`, in ground-truth order.
pub fn ground_all(
    docs: &[Document],
    gts: &[GroundTruth],
    cfg: &MatchConfig,
) -> Result<Vec<PredictionRecord>, AblationError> {
    let by_id: HashMap<&str, &Document> = docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    gts.par_iter()
        .map(|gt| {
            let doc = by_id
                .get(gt.doc_id.as_str())
                .ok_or_else(|| AblationError::UnknownDocument {
                    question_id: gt.question_id.clone(),
                    doc_id: gt.doc_id.clone(),
                })?;
            ground(&gt.question_id, &gt.answer, &gt.question, doc, cfg)
                .map(|r| PredictionRecord::from(&r))
                .map_err(|source| AblationError::Match {
                    question_id: gt.question_id.clone(),
                    source,
                })
        })
        .collect()
}

/// One full grounding + evaluation per swept value; everything else in
/// `spec.config` stays fixed. Fails if recall ever decreases.
pub fn run_ablation_on(
    docs: &[Document],
    gts: &[GroundTruth],
    spec: &AblationSpec,
) -> Result<AblationTable, AblationError> {
    spec.validate()?;
    let rows: Vec<AblationRow> = spec
        .values
        .par_iter()
        .map(|&value| {
            let cfg = spec.param.apply(&spec.config, value);
            let preds = ground_all(docs, gts, &cfg)?;
            let report = evaluate_corpus(&preds, gts, &cfg, &EvalOptions::from_config(&cfg))?;
            let row = report
                .row(spec.granularity)
                .expect("every granularity is reported")
                .clone();
            Ok(AblationRow { value, row })
        })
        .collect::<Result<_, AblationError>>()?;

    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if ReportRow::exact(counts(&b.row)).1 < ReportRow::exact(counts(&a.row)).1 {
            return Err(AblationError::RecallDecrease {
                param: spec.param.name(),
                prev_value: a.value,
                value: b.value,
                prev: a.row.formatted().1,
                cur: b.row.formatted().1,
            });
        }
    }

    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.row.exact_f1() > rows[best].row.exact_f1() {
            best = i;
        }
    }
    Ok(AblationTable {
        param: spec.param,
        granularity: spec.granularity,
        rows,
        best,
    })
}

fn counts(r: &ReportRow) -> crate::evaluator::Counts {
    crate::evaluator::Counts {
        tp: r.tp,
        n_pred: r.n_pred,
        n_gt: r.n_gt,
    }
}

pub fn run_ablation(corpus_dir: &Path, gt_file: &Path, spec: &AblationSpec) -> Result<AblationTable, AblationError> {
    let docs = load_corpus(corpus_dir)?;
    let raw = std::fs::read_to_string(gt_file).map_err(|source| AblationError::Io {
        path: gt_file.display().to_string(),
        source,
    })?;
    let gts = parse_ground_truth(&raw)?;
    run_ablation_on(&docs, &gts, spec)
}

/// Ranks starting at 1; tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mean;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson on average ranks). `None` when either
/// side is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}
