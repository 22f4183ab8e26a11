//! Hierarchical OCR layout: documents made of blocks, lines and words.
//!
//! The interchange format is a single JSON object per document. [`parse_layout`]
//! reads it and rejects anything that fails [`validate_document`];
//! [`serialize_layout`] writes the canonical form (fixed key order, numbers with
//! at most four decimals) so two serializations of one document are
//! byte-identical.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Deserialize;
use thiserror::Error;

use crate::BBox;

/// Default slack, in pixels, when checking that a child box sits inside its parent.
pub const CONTAINMENT_SLACK: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    pub id: String,
    pub bbox: BBox,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: String,
    pub bbox: BBox,
    pub text: String,
    pub words: Vec<Word>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: String,
    pub bbox: BBox,
    pub text: String,
    pub lines: Vec<Line>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub page_width: f64,
    pub page_height: f64,
    pub image_path: Option<String>,
    pub blocks: Vec<Block>,
}

impl Document {
    pub fn page_area(&self) -> f64 {
        self.page_width * self.page_height
    }

    pub fn page_diagonal(&self) -> f64 {
        self.page_width.hypot(self.page_height)
    }

    pub fn page_box(&self) -> BBox {
        BBox::new(0.0, 0.0, self.page_width, self.page_height)
    }

    /// (blocks, lines, words)
    pub fn counts(&self) -> (usize, usize, usize) {
        let lines = self.blocks.iter().map(|b| b.lines.len()).sum();
        let words = self.lines().map(|(_, l)| l.words.len()).sum();
        (self.blocks.len(), lines, words)
    }

    /// All lines with their parent block, in reading order.
    pub fn lines(&self) -> impl Iterator<Item = (&Block, &Line)> {
        self.blocks.iter().flat_map(|b| b.lines.iter().map(move |l| (b, l)))
    }

    pub fn block(&self, id: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn line(&self, id: &str) -> Option<(&Block, &Line)> {
        self.lines().find(|(_, l)| l.id == id)
    }

    /// Multiplies every coordinate and the page size by `k`.
    pub fn scaled(&self, k: f64) -> Document {
        let mut d = self.clone();
        d.page_width *= k;
        d.page_height *= k;
        for b in &mut d.blocks {
            b.bbox = b.bbox.scale(k);
            for l in &mut b.lines {
                l.bbox = l.bbox.scale(k);
                for w in &mut l.words {
                    w.bbox = w.bbox.scale(k);
                }
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    InvalidBox,
    EmptyText,
    DuplicateId,
    Containment,
    OutsidePage,
    ReadingOrder,
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::InvalidBox => "invalid_box",
            Rule::EmptyText => "empty_text",
            Rule::DuplicateId => "duplicate_id",
            Rule::Containment => "containment",
            Rule::OutsidePage => "outside_page",
            Rule::ReadingOrder => "reading_order",
        }
    }
}

/// One broken invariant. `value` is the measured quantity: overhang in pixels for
/// containment and page rules, occurrence count for duplicates, 0 otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub id: String,
    pub rule: Rule,
    pub value: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {} ({})", self.id, self.rule.name(), fmt_num(self.value))
    }
}

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("layout parse error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("layout schema error at {id}: {message}")]
    Schema { id: String, message: String },
    #[error("layout fails validation: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

pub fn validate_document(d: &Document) -> Vec<Violation> {
    validate_with_slack(d, CONTAINMENT_SLACK)
}

pub fn validate_with_slack(d: &Document, slack: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let page = d.page_box().expand(slack);

    let check_box = |out: &mut Vec<Violation>, id: &str, bbox: &BBox, parent: Option<&BBox>| {
        if !bbox.is_valid() {
            out.push(Violation {
                id: id.to_string(),
                rule: Rule::InvalidBox,
                value: 0.0,
            });
            return;
        }
        if let Some(p) = parent {
            let over = p.expand(slack).overhang(bbox);
            if over > 0.0 {
                out.push(Violation {
                    id: id.to_string(),
                    rule: Rule::Containment,
                    value: over,
                });
            }
        }
        let over = page.overhang(bbox);
        if over > 0.0 {
            out.push(Violation {
                id: id.to_string(),
                rule: Rule::OutsidePage,
                value: over,
            });
        }
    };

    for (bi, block) in d.blocks.iter().enumerate() {
        *seen.entry(&block.id).or_default() += 1;
        check_box(&mut out, &block.id, &block.bbox, None);
        if bi > 0 {
            let prev = &d.blocks[bi - 1].bbox;
            let key = |b: &BBox| (b.y0, b.x0);
            if key(&block.bbox).partial_cmp(&key(prev)) == Some(std::cmp::Ordering::Less) {
                out.push(Violation {
                    id: block.id.clone(),
                    rule: Rule::ReadingOrder,
                    value: 0.0,
                });
            }
        }
        for (li, line) in block.lines.iter().enumerate() {
            *seen.entry(&line.id).or_default() += 1;
            check_box(&mut out, &line.id, &line.bbox, Some(&block.bbox));
            if li > 0 && line.bbox.y0 < block.lines[li - 1].bbox.y0 {
                out.push(Violation {
                    id: line.id.clone(),
                    rule: Rule::ReadingOrder,
                    value: 0.0,
                });
            }
            for (wi, word) in line.words.iter().enumerate() {
                *seen.entry(&word.id).or_default() += 1;
                check_box(&mut out, &word.id, &word.bbox, Some(&line.bbox));
                if word.text.trim().is_empty() {
                    out.push(Violation {
                        id: word.id.clone(),
                        rule: Rule::EmptyText,
                        value: 0.0,
                    });
                }
                if wi > 0 && word.bbox.x0 < line.words[wi - 1].bbox.x0 {
                    out.push(Violation {
                        id: word.id.clone(),
                        rule: Rule::ReadingOrder,
                        value: 0.0,
                    });
                }
            }
        }
    }

    let mut dups: Vec<_> = seen.into_iter().filter(|(_, n)| *n > 1).collect();
    dups.sort();
    for (id, n) in dups {
        out.push(Violation {
            id: id.to_string(),
            rule: Rule::DuplicateId,
            value: n as f64,
        });
    }
    out
}

#[derive(Deserialize)]
struct RawDocument {
    doc_id: Option<String>,
    page_width: Option<f64>,
    page_height: Option<f64>,
    #[serde(default)]
    image_path: Option<String>,
    #[serde(default)]
    blocks: Vec<RawBlock>,
}

#[derive(Deserialize)]
struct RawBlock {
    id: Option<String>,
    bbox: Option<Vec<f64>>,
    text: Option<String>,
    #[serde(default)]
    lines: Vec<RawLine>,
}

#[derive(Deserialize)]
struct RawLine {
    id: Option<String>,
    bbox: Option<Vec<f64>>,
    text: Option<String>,
    #[serde(default)]
    words: Vec<RawWord>,
}

#[derive(Deserialize)]
struct RawWord {
    id: Option<String>,
    bbox: Option<Vec<f64>>,
    text: Option<String>,
}

fn schema(id: &str, message: impl Into<String>) -> LayoutError {
    LayoutError::Schema {
        id: id.to_string(),
        message: message.into(),
    }
}

fn take_id(id: Option<String>, fallback: impl FnOnce() -> String) -> Result<String, LayoutError> {
    match id {
        Some(id) if !id.is_empty() => Ok(id),
        _ => Err(schema(&fallback(), "missing id")),
    }
}

fn take_bbox(id: &str, raw: Option<Vec<f64>>) -> Result<BBox, LayoutError> {
    let raw = raw.ok_or_else(|| schema(id, "missing bbox"))?;
    let arr: [f64; 4] = raw
        .try_into()
        .map_err(|v: Vec<f64>| schema(id, format!("bbox must have 4 numbers, got {}", v.len())))?;
    let b = BBox::from(arr);
    if !b.is_valid() {
        return Err(schema(
            id,
            format!("invalid bbox {arr:?}: need finite, non-negative, x0 < x1 and y0 < y1"),
        ));
    }
    Ok(b)
}

/// Reads a document without running the document-wide invariants. Syntax and
/// per-item schema problems (missing bbox, bad box, empty word text) still fail.
pub fn parse_layout_unchecked(raw: &str) -> Result<Document, LayoutError> {
    let doc: RawDocument = serde_json::from_str(raw).map_err(|e| LayoutError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let doc_id = take_id(doc.doc_id, || "<document>".into())?;
    let page_width = doc.page_width.ok_or_else(|| schema(&doc_id, "missing page_width"))?;
    let page_height = doc.page_height.ok_or_else(|| schema(&doc_id, "missing page_height"))?;
    if !(page_width.is_finite() && page_width > 0.0 && page_height.is_finite() && page_height > 0.0) {
        return Err(schema(&doc_id, "page size must be positive"));
    }

    let mut blocks = Vec::with_capacity(doc.blocks.len());
    for (bi, rb) in doc.blocks.into_iter().enumerate() {
        let bid = take_id(rb.id, || format!("{doc_id}/blocks[{bi}]"))?;
        let bbox = take_bbox(&bid, rb.bbox)?;
        let mut lines = Vec::with_capacity(rb.lines.len());
        for (li, rl) in rb.lines.into_iter().enumerate() {
            let lid = take_id(rl.id, || format!("{bid}/lines[{li}]"))?;
            let lbox = take_bbox(&lid, rl.bbox)?;
            let mut words = Vec::with_capacity(rl.words.len());
            for (wi, rw) in rl.words.into_iter().enumerate() {
                let wid = take_id(rw.id, || format!("{lid}/words[{wi}]"))?;
                let wbox = take_bbox(&wid, rw.bbox)?;
                let text = rw.text.unwrap_or_default();
                if text.trim().is_empty() {
                    return Err(schema(&wid, "empty word text"));
                }
                words.push(Word {
                    id: wid,
                    bbox: wbox,
                    text,
                });
            }
            let text = rl
                .text
                .unwrap_or_else(|| join_texts(words.iter().map(|w| w.text.as_str())));
            lines.push(Line {
                id: lid,
                bbox: lbox,
                text,
                words,
            });
        }
        let text = rb
            .text
            .unwrap_or_else(|| join_texts(lines.iter().map(|l| l.text.as_str())));
        blocks.push(Block {
            id: bid,
            bbox,
            text,
            lines,
        });
    }

    Ok(Document {
        doc_id,
        page_width,
        page_height,
        image_path: doc.image_path,
        blocks,
    })
}

/// Parses the interchange format. Missing `text` on a block or line defaults to
/// its children's texts joined by single spaces; missing `image_path` is null.
pub fn parse_layout(raw: &str) -> Result<Document, LayoutError> {
    let doc = parse_layout_unchecked(raw)?;
    let violations = validate_document(&doc);
    if violations.is_empty() {
        Ok(doc)
    } else {
        Err(LayoutError::Invalid(violations))
    }
}

pub fn join_texts<'a>(parts: impl Iterator<Item = &'a str>) -> String {
    parts.collect::<Vec<_>>().join(" ")
}

/// Formats a coordinate with at most four decimals and no trailing zeros.
pub fn fmt_num(v: f64) -> String {
    let mut s = format!("{v:.4}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn fmt_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

pub(crate) fn fmt_bbox(b: &BBox) -> String {
    format!(
        "[{}, {}, {}, {}]",
        fmt_num(b.x0),
        fmt_num(b.y0),
        fmt_num(b.x1),
        fmt_num(b.y1)
    )
}

/// Canonical serialization of a document.
pub fn serialize_layout(d: &Document) -> String {
    let mut s = String::new();
    s.push_str("{\n");
    let _ = writeln!(s, "  \"doc_id\": {},", fmt_str(&d.doc_id));
    let _ = writeln!(s, "  \"page_width\": {},", fmt_num(d.page_width));
    let _ = writeln!(s, "  \"page_height\": {},", fmt_num(d.page_height));
    let image = d.image_path.as_deref().map(fmt_str).unwrap_or_else(|| "null".into());
    let _ = writeln!(s, "  \"image_path\": {image},");
    if d.blocks.is_empty() {
        s.push_str("  \"blocks\": []\n}\n");
        return s;
    }
    s.push_str("  \"blocks\": [\n");
    for (bi, b) in d.blocks.iter().enumerate() {
        s.push_str("    {\n");
        let _ = writeln!(s, "      \"id\": {},", fmt_str(&b.id));
        let _ = writeln!(s, "      \"bbox\": {},", fmt_bbox(&b.bbox));
        let _ = writeln!(s, "      \"text\": {},", fmt_str(&b.text));
        if b.lines.is_empty() {
            s.push_str("      \"lines\": []\n");
        } else {
            s.push_str("      \"lines\": [\n");
            for (li, l) in b.lines.iter().enumerate() {
                s.push_str("        {\n");
                let _ = writeln!(s, "          \"id\": {},", fmt_str(&l.id));
                let _ = writeln!(s, "          \"bbox\": {},", fmt_bbox(&l.bbox));
                let _ = writeln!(s, "          \"text\": {},", fmt_str(&l.text));
                if l.words.is_empty() {
                    s.push_str("          \"words\": []\n");
                } else {
                    s.push_str("          \"words\": [\n");
                    for (wi, w) in l.words.iter().enumerate() {
                        let _ = write!(
                            s,
                            "            {{ \"id\": {}, \"bbox\": {}, \"text\": {} }}",
                            fmt_str(&w.id),
                            fmt_bbox(&w.bbox),
                            fmt_str(&w.text)
                        );
                        s.push_str(if wi + 1 < l.words.len() { ",\n" } else { "\n" });
                    }
                    s.push_str("          ]\n");
                }
                s.push_str(if li + 1 < b.lines.len() {
                    "        },\n"
                } else {
                    "        }\n"
                });
            }
            s.push_str("      ]\n");
        }
        s.push_str(if bi + 1 < d.blocks.len() { "    },\n" } else { "    }\n" });
    }
    s.push_str("  ]\n}\n");
    s
}
