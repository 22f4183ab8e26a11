//! Multi-granular answer grounding for scanned document pages.
//!
//! Given a hierarchical OCR layout (blocks of lines of words) and an answer
//! string, the engine localizes the answer at block, line, word and point
//! granularity and scores the localization against ground truth with
//! IoU-based precision, recall and F1.
//!
//! Geometry is generic over the coordinate type ([`Scalar`]); the layout model
//! and the pipeline use `f64` through the [`BBox`] and [`Pt`] aliases.

pub mod config;
pub mod evaluator;
pub mod geometry;
pub mod granularity;
pub mod harness;
pub mod layout;
pub mod matcher;
pub mod records;
pub mod scalar;
pub mod text;

pub use config::{MatchConfig, Stopwords};
pub use evaluator::{evaluate_corpus, evaluate_question, match_points, match_regions, EvalReport, PointMode};
pub use geometry::{centroid, contains_point, iou, union_bbox, Point, Rect};
pub use granularity::{ground, GroundingResult, WordRun};
pub use layout::{parse_layout, serialize_layout, validate_document, Block, Document, Line, Word};
pub use matcher::{match_blocks, Granularity, RegionMatch, ScoreBreakdown};
pub use records::{GroundTruth, PredictionRecord};
pub use scalar::Scalar;
pub use text::{normalize, NormText};

/// Pixel-space box used throughout the layout model.
pub type BBox = Rect<f64>;
/// Pixel-space point used throughout the layout model.
pub type Pt = Point<f64>;

pub type BBoxF32 = Rect<f32>;
pub type PtF32 = Point<f32>;
