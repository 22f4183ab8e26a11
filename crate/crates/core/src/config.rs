use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize;

const BUILTIN_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Environment variable naming a stopword file that replaces the built-in list.
pub const STOPWORDS_ENV: &str = "GROUND_STOPWORDS";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("weights must sum to 1, got {0}")]
    Weights(f64),
    #[error("{field} must be in [0, 1], got {value}")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad config file: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Function words ignored when measuring contextual overlap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Stopwords(BTreeSet<String>);

impl Stopwords {
    /// Parses one entry per line; blank lines and `#` comments are skipped.
    pub fn parse(list: &str) -> Self {
        let words = list
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .flat_map(|l| normalize(l).tokens)
            .collect();
        Stopwords(words)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::parse(&raw))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Stopwords::parse(BUILTIN_STOPWORDS)
    }
}

impl From<Vec<String>> for Stopwords {
    fn from(v: Vec<String>) -> Self {
        Stopwords::parse(&v.join("\n"))
    }
}

impl From<Stopwords> for Vec<String> {
    fn from(s: Stopwords) -> Self {
        s.0.into_iter().collect()
    }
}

/// Every tunable of the matching and evaluation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub w_fuzzy: f64,
    pub w_length: f64,
    pub w_answer: f64,
    /// Minimum combined score for a region to count as a match.
    pub threshold: f64,
    pub top_k: usize,
    pub max_blocks: usize,
    pub max_lines: usize,
    pub penalty_short: f64,
    pub penalty_context: f64,
    pub min_area_fraction: f64,
    pub iou_threshold: f64,
    pub word_edit_tolerance: usize,
    pub word_gap_tolerance: usize,
    #[serde(rename = "stopword_list")]
    pub stopwords: Stopwords,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            w_fuzzy: 0.6,
            w_length: 0.2,
            w_answer: 0.2,
            threshold: 0.55,
            top_k: 10,
            max_blocks: 2,
            max_lines: 5,
            penalty_short: 0.2,
            penalty_context: 0.25,
            min_area_fraction: 0.0005,
            iou_threshold: 0.5,
            word_edit_tolerance: 1,
            word_gap_tolerance: 1,
            stopwords: Stopwords::default(),
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let sum = self.w_fuzzy + self.w_length + self.w_answer;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::Weights(sum));
        }
        let unit = [
            ("w_fuzzy", self.w_fuzzy),
            ("w_length", self.w_length),
            ("w_answer", self.w_answer),
            ("threshold", self.threshold),
            ("penalty_short", self.penalty_short),
            ("penalty_context", self.penalty_context),
            ("min_area_fraction", self.min_area_fraction),
            ("iou_threshold", self.iou_threshold),
        ];
        for (field, value) in unit {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::OutOfRange { field, value });
            }
        }
        for (field, value) in [
            ("top_k", self.top_k),
            ("max_blocks", self.max_blocks),
            ("max_lines", self.max_lines),
        ] {
            if value == 0 {
                return Err(ConfigError::NotPositive(field));
            }
        }
        if self.iou_threshold == 0.0 {
            return Err(ConfigError::OutOfRange {
                field: "iou_threshold",
                value: 0.0,
            });
        }
        Ok(())
    }

    pub fn from_json(raw: &str) -> Result<Self, ConfigError> {
        let cfg: MatchConfig = serde_json::from_str(raw)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = MatchConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.max_blocks, cfg.max_lines, cfg.top_k), (2, 5, 10));
        assert!(cfg.stopwords.len() > 150);
        assert!(cfg.stopwords.contains("the") && cfg.stopwords.contains("का"));
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = MatchConfig::from_json(r#"{"max_lines": 3, "threshold": 0.6}"#).unwrap();
        assert_eq!(cfg.max_lines, 3);
        assert_eq!(cfg.threshold, 0.6);
        assert_eq!(cfg.top_k, 10);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(
            MatchConfig::from_json(r#"{"w_fuzzy": 0.7}"#),
            Err(ConfigError::Weights(_))
        ));
        assert!(matches!(
            MatchConfig::from_json(r#"{"threshold": 1.5}"#),
            Err(ConfigError::OutOfRange { field: "threshold", .. })
        ));
        assert!(MatchConfig::from_json(r#"{"max_lines": 0}"#).is_err());
        assert!(MatchConfig::from_json(r#"{"unknown": 1}"#).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = MatchConfig::default();
        let s = serde_json::to_string(&cfg).unwrap();
        assert_eq!(MatchConfig::from_json(&s).unwrap(), cfg);
    }
}
