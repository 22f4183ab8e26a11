//! SVG overlays of grounded regions on a page.

use std::fmt::Write as _;

use crate::granularity::GroundingResult;
use crate::layout::{fmt_num, Document};
use crate::records::{PredictionRecord, RegionRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayStyle {
    pub block_stroke: String,
    pub line_stroke: String,
    pub word_fill: String,
    pub point_stroke: String,
    pub frame_stroke: String,
    pub stroke_width: f64,
    pub word_opacity: f64,
    /// Half the arm length of a point cross, in pixels.
    pub cross_size: f64,
}

impl Default for OverlayStyle {
    fn default() -> Self {
        OverlayStyle {
            block_stroke: "#d62728".into(),
            line_stroke: "#1f77b4".into(),
            word_fill: "#2ca02c".into(),
            point_stroke: "#9467bd".into(),
            frame_stroke: "#7f7f7f".into(),
            stroke_width: 3.0,
            word_opacity: 0.3,
            cross_size: 12.0,
        }
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn rect_attrs(r: &RegionRecord) -> String {
    let b = &r.bbox;
    format!(
        r#"x="{}" y="{}" width="{}" height="{}""#,
        fmt_num(b.x0),
        fmt_num(b.y0),
        fmt_num(b.width()),
        fmt_num(b.height())
    )
}

/// Standalone SVG sized to the page: blocks, then lines, then words, then
/// points, each in ranking order. Every region element has class `region`.
pub fn render_overlay(doc: &Document, pred: &PredictionRecord, style: &OverlayStyle) -> String {
    let (w, h) = (fmt_num(doc.page_width), fmt_num(doc.page_height));
    let sw = fmt_num(style.stroke_width);
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" data-doc="{}" data-question="{}">"#,
        escape(&doc.doc_id),
        escape(&pred.question_id)
    );
    if let Some(img) = &doc.image_path {
        let _ = writeln!(
            s,
            r#"  <image href="{}" x="0" y="0" width="{w}" height="{h}" preserveAspectRatio="none"/>"#,
            escape(img)
        );
    }
    let _ = writeln!(
        s,
        r#"  <rect class="page" x="0" y="0" width="{w}" height="{h}" fill="none" stroke="{}" stroke-width="1"/>"#,
        escape(&style.frame_stroke)
    );
    for r in &pred.blocks {
        let _ = writeln!(
            s,
            r#"  <rect class="region block" data-id="{}" {} fill="none" stroke="{}" stroke-width="{sw}"/>"#,
            escape(&r.id),
            rect_attrs(r),
            escape(&style.block_stroke)
        );
    }
    for r in &pred.lines {
        let _ = writeln!(
            s,
            r#"  <rect class="region line" data-id="{}" {} fill="none" stroke="{}" stroke-width="{sw}" stroke-dasharray="8 4"/>"#,
            escape(&r.id),
            rect_attrs(r),
            escape(&style.line_stroke)
        );
    }
    for r in &pred.words {
        let _ = writeln!(
            s,
            r#"  <rect class="region word" data-id="{}" {} fill="{}" fill-opacity="{}" stroke="none"/>"#,
            escape(&r.id),
            rect_attrs(r),
            escape(&style.word_fill),
            fmt_num(style.word_opacity)
        );
    }
    let c = style.cross_size;
    for p in &pred.points {
        let _ = writeln!(
            s,
            r#"  <path class="region point" d="M {} {} L {} {} M {} {} L {} {}" stroke="{}" stroke-width="{sw}"/>"#,
            fmt_num(p.x - c),
            fmt_num(p.y),
            fmt_num(p.x + c),
            fmt_num(p.y),
            fmt_num(p.x),
            fmt_num(p.y - c),
            fmt_num(p.x),
            fmt_num(p.y + c),
            escape(&style.point_stroke)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_result(doc: &Document, result: &GroundingResult, style: &OverlayStyle) -> String {
    render_overlay(doc, &PredictionRecord::from(result), style)
}
