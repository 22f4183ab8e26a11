//! Synthetic documents with planted answers and exact ground truth.
//!
//! Each document is a single column of blocks built from a bundled vocabulary
//! of pseudo-words, sampled without replacement so that only planted answer
//! tokens can match. Every question plants its answer in its own host block,
//! in one of three shapes:
//!
//! * single line: the answer replaces a stretch of words inside one line;
//! * multi line: the answer occupies two consecutive short lines;
//! * multi block: the answer occupies two one-line blocks around the host.
//!
//! Optional distractor lines repeat all but one answer token next to the
//! planted line. OCR noise substitutes characters in the layout text only.

use std::ops::RangeInclusive;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::union_bbox;
use crate::layout::{serialize_layout, Block, Document, Line, Word};
use crate::records::{write_records, GroundTruth, GtRegions};
use crate::BBox;

const VOCAB: &str = include_str!("../../data/vocab.txt");

const MARGIN_X: f64 = 80.0;
const MARGIN_Y: f64 = 100.0;
const CHAR_W: f64 = 10.0;
const WORD_GAP: f64 = 8.0;
const LINE_H: f64 = 20.0;
const LINE_PITCH: f64 = 26.0;
const BLOCK_PAD: f64 = 4.0;
const BLOCK_GAP: f64 = 20.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("document {doc_id} does not fit on a {width}x{height} page")]
    DoesNotFit { doc_id: String, width: f64, height: f64 },
    #[error("vocabulary exhausted in document {0}")]
    Vocabulary(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub seed: u64,
    pub n_docs: usize,
    pub blocks_per_doc: RangeInclusive<usize>,
    pub lines_per_block: RangeInclusive<usize>,
    pub words_per_line: RangeInclusive<usize>,
    pub questions_per_doc: usize,
    pub multiblock_fraction: f64,
    pub multiline_fraction: f64,
    /// Per-character substitution probability applied to layout text.
    pub ocr_noise_rate: f64,
    /// Probability that a single-line answer gets 1 to 3 distractor lines.
    pub distractor_rate: f64,
    pub page_width: f64,
    pub page_height: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 42,
            n_docs: 100,
            blocks_per_doc: 3..=5,
            lines_per_block: 2..=4,
            words_per_line: 4..=8,
            questions_per_doc: 3,
            multiblock_fraction: 0.2,
            multiline_fraction: 0.3,
            ocr_noise_rate: 0.02,
            distractor_rate: 0.0,
            page_width: 1240.0,
            page_height: 1754.0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Params(m.to_string()));
        for (name, r) in [
            ("blocks_per_doc", &self.blocks_per_doc),
            ("lines_per_block", &self.lines_per_block),
            ("words_per_line", &self.words_per_line),
        ] {
            if r.is_empty() || *r.start() == 0 {
                return bad(&format!("{name} must be a non-empty range of positive counts"));
            }
        }
        if *self.words_per_line.start() < 4 {
            return bad("words_per_line must start at 4 or more to host a planted answer");
        }
        if self.questions_per_doc > *self.blocks_per_doc.start() {
            return bad("questions_per_doc cannot exceed the minimum number of blocks");
        }
        for (name, v) in [
            ("multiblock_fraction", self.multiblock_fraction),
            ("multiline_fraction", self.multiline_fraction),
            ("ocr_noise_rate", self.ocr_noise_rate),
            ("distractor_rate", self.distractor_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(&format!("{name} must be in [0, 1]"));
            }
        }
        if !(self.page_width > 0.0 && self.page_height > 0.0) {
            return bad("page size must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub params: SynthParams,
    pub docs: Vec<Document>,
    pub ground_truth: Vec<GroundTruth>,
}

fn vocabulary() -> Vec<&'static str> {
    VOCAB
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

/// Where a planted token lives: (block, line, word) in the abstract layout.
type Slot = (usize, usize, usize);

struct Plan {
    blocks: Vec<Vec<Vec<String>>>,
}

struct Planted {
    question: String,
    answer: String,
    slots: Vec<Slot>,
}

struct Words<'a> {
    pool: Vec<&'a str>,
    doc_id: String,
}

impl Words<'_> {
    fn take(&mut self) -> Result<String, SynthError> {
        self.pool
            .pop()
            .map(str::to_owned)
            .ok_or_else(|| SynthError::Vocabulary(self.doc_id.clone()))
    }

    fn take_n(&mut self, n: usize) -> Result<Vec<String>, SynthError> {
        (0..n).map(|_| self.take()).collect()
    }
}

fn question_text(context: &[String]) -> String {
    format!("What is the {}?", context.join(" "))
}

/// Plants one answer into `plan` around `host`. Block indices of blocks after
/// an insertion point shift, so `hosts` is updated in place.
fn plant(
    plan: &mut Plan,
    host_pos: usize,
    hosts: &mut [usize],
    p: &SynthParams,
    words: &mut Words,
    rng: &mut ChaCha8Rng,
) -> Result<(String, String), SynthError> {
    let host = hosts[host_pos];
    let shift_after = |hosts: &mut [usize], at: usize| {
        for h in hosts.iter_mut() {
            if *h >= at {
                *h += 1;
            }
        }
    };

    if rng.gen_bool(p.multiblock_fraction) {
        let first = words.take_n(rng.gen_range(2..=3))?;
        let second = words.take_n(rng.gen_range(2..=3))?;
        let ctx_line = &plan.blocks[host][0];
        let context = vec![ctx_line[0].clone(), ctx_line[1].clone()];
        // [first][host][second]
        plan.blocks.insert(host + 1, vec![second.clone()]);
        shift_after(hosts, host + 1);
        plan.blocks.insert(host, vec![first.clone()]);
        shift_after(hosts, host);
        let answer = [first, second].concat().join(" ");
        return Ok((question_text(&context), answer));
    }

    if rng.gen_bool(p.multiline_fraction) {
        let first = words.take_n(rng.gen_range(2..=3))?;
        let second = words.take_n(rng.gen_range(2..=3))?;
        let n_lines = plan.blocks[host].len();
        let at = rng.gen_range(0..=n_lines);
        let ctx_src = if at > 0 { at - 1 } else { 0 };
        let ctx_line = &plan.blocks[host][ctx_src];
        let context = vec![
            ctx_line[ctx_line.len() - 2].clone(),
            ctx_line[ctx_line.len() - 1].clone(),
        ];
        let answer = [first.clone(), second.clone()].concat().join(" ");
        plan.blocks[host].insert(at, second);
        plan.blocks[host].insert(at, first);
        return Ok((question_text(&context), answer));
    }

    let n_answer = rng.gen_range(3..=4);
    let answer_words = words.take_n(n_answer)?;
    let line_idx = rng.gen_range(0..plan.blocks[host].len());
    let line_len = plan.blocks[host][line_idx].len();
    let n_answer = n_answer.min(line_len - 1);
    let answer_words = answer_words[..n_answer].to_vec();
    let start = rng.gen_range(0..=(line_len - n_answer));
    let line = &mut plan.blocks[host][line_idx];
    line.splice(start..start + n_answer, answer_words.iter().cloned());
    let context: Vec<String> = if start >= 2 {
        line[start - 2..start].to_vec()
    } else {
        line[start + n_answer..(start + n_answer + 2).min(line.len())].to_vec()
    };
    if rng.gen_bool(p.distractor_rate) {
        for _ in 0..rng.gen_range(1..=3) {
            let drop = rng.gen_range(0..answer_words.len());
            let mut d: Vec<String> = answer_words
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != drop)
                .map(|(_, w)| w.clone())
                .collect();
            let before = rng.gen_range(0..=2);
            let after = rng.gen_range(1..=2);
            let mut full = words.take_n(before)?;
            full.append(&mut d);
            full.extend(words.take_n(after)?);
            let at = rng.gen_range(0..=plan.blocks[host].len());
            plan.blocks[host].insert(at, full);
        }
    }

    Ok((question_text(&context), answer_words.join(" ")))
}

fn corrupt(word: &str, rate: f64, rng: &mut ChaCha8Rng) -> String {
    if rate == 0.0 {
        return word.to_string();
    }
    word.chars()
        .map(|c| {
            if rng.gen_bool(rate) {
                loop {
                    let r = (b'a' + rng.gen_range(0..26u8)) as char;
                    if r != c {
                        break r;
                    }
                }
            } else {
                c
            }
        })
        .collect()
}

fn build_document(index: usize, p: &SynthParams, vocab: &[&str]) -> Result<(Document, Vec<GroundTruth>), SynthError> {
    let doc_id = format!("doc_{index:04}");
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(index as u64);

    let mut pool = vocab.to_vec();
    pool.shuffle(&mut rng);
    let mut words = Words {
        pool,
        doc_id: doc_id.clone(),
    };

    let n_blocks = rng.gen_range(p.blocks_per_doc.clone());
    let mut plan = Plan {
        blocks: Vec::with_capacity(n_blocks),
    };
    for _ in 0..n_blocks {
        let n_lines = rng.gen_range(p.lines_per_block.clone());
        let mut lines = Vec::with_capacity(n_lines);
        for _ in 0..n_lines {
            let n = rng.gen_range(p.words_per_line.clone());
            lines.push(words.take_n(n)?);
        }
        plan.blocks.push(lines);
    }

    let mut hosts: Vec<usize> = (0..n_blocks).collect();
    hosts.shuffle(&mut rng);
    hosts.truncate(p.questions_per_doc);

    let mut planted = Vec::with_capacity(hosts.len());
    for q in 0..hosts.len() {
        let (question, answer) = plant(&mut plan, q, &mut hosts, p, &mut words, &mut rng)?;
        planted.push((question, answer));
    }
    // later plants shift block and line indices, so slots are located by
    // word identity once the plan is final
    let planted: Vec<Planted> = planted
        .into_iter()
        .map(|(question, answer)| {
            let slots = locate(&plan, &answer);
            Planted {
                question,
                answer,
                slots,
            }
        })
        .collect();

    let doc = layout_plan(&doc_id, &plan, p, &mut rng)?;
    let gts = planted
        .iter()
        .enumerate()
        .map(|(qi, pl)| ground_truth_for(&doc, qi, pl))
        .collect();
    Ok((doc, gts))
}

/// Slots of the planted answer, grouped by line. Vocabulary words are unique
/// within a document, so only distractor lines share answer tokens; those
/// lack one token, so a line holding every token is the planted one.
fn locate(plan: &Plan, answer: &str) -> Vec<Slot> {
    let tokens: Vec<&str> = answer.split(' ').collect();
    let mut lines: Vec<Vec<Slot>> = Vec::new();
    for (bi, block) in plan.blocks.iter().enumerate() {
        for (li, line) in block.iter().enumerate() {
            let hits: Vec<Slot> = line
                .iter()
                .enumerate()
                .filter(|(_, w)| tokens.contains(&w.as_str()))
                .map(|(wi, _)| (bi, li, wi))
                .collect();
            if !hits.is_empty() {
                lines.push(hits);
            }
        }
    }
    match lines.iter().find(|l| l.len() == tokens.len()) {
        Some(full) => full.clone(),
        None => lines.concat(),
    }
}

fn ground_truth_for(doc: &Document, qi: usize, pl: &Planted) -> GroundTruth {
    let mut by_line: Vec<((usize, usize), Vec<usize>)> = Vec::new();
    for &(b, l, w) in &pl.slots {
        match by_line.last_mut() {
            Some((key, ws)) if *key == (b, l) => ws.push(w),
            _ => by_line.push(((b, l), vec![w])),
        }
    }

    let mut regions = GtRegions::default();
    let mut seen_blocks = Vec::new();
    for ((b, l), ws) in &by_line {
        let block = &doc.blocks[*b];
        if !seen_blocks.contains(b) {
            seen_blocks.push(*b);
            regions.block.push(block.bbox);
        }
        let line = &block.lines[*l];
        regions.line.push(line.bbox);
        regions.word.extend(ws.iter().map(|&w| line.words[w].bbox));
    }
    regions.point = regions.block.iter().map(|b| b.centroid()).collect();
    GroundTruth {
        question_id: format!("{}.q{qi}", doc.doc_id),
        doc_id: doc.doc_id.clone(),
        question: pl.question.clone(),
        answer: pl.answer.clone(),
        regions,
    }
}

fn layout_plan(doc_id: &str, plan: &Plan, p: &SynthParams, rng: &mut ChaCha8Rng) -> Result<Document, SynthError> {
    let too_big = || SynthError::DoesNotFit {
        doc_id: doc_id.to_string(),
        width: p.page_width,
        height: p.page_height,
    };
    let mut y = MARGIN_Y;
    let mut blocks = Vec::with_capacity(plan.blocks.len());
    for (bi, block_words) in plan.blocks.iter().enumerate() {
        let bid = format!("b{bi}");
        let mut lines = Vec::with_capacity(block_words.len());
        for (li, line_words) in block_words.iter().enumerate() {
            let lid = format!("{bid}.l{li}");
            let mut x = MARGIN_X;
            let mut words = Vec::with_capacity(line_words.len());
            for (wi, w) in line_words.iter().enumerate() {
                let text = corrupt(w, p.ocr_noise_rate, rng);
                let width = CHAR_W * text.chars().count() as f64;
                words.push(Word {
                    id: format!("{lid}.w{wi}"),
                    bbox: BBox::new(x, y, x + width, y + LINE_H),
                    text,
                });
                x += width + WORD_GAP;
            }
            if x - WORD_GAP > p.page_width - MARGIN_X {
                return Err(too_big());
            }
            let boxes: Vec<BBox> = words.iter().map(|w| w.bbox).collect();
            let text = words.iter().map(|w| w.text.as_str()).collect::<Vec<_>>().join(" ");
            lines.push(Line {
                id: lid,
                bbox: union_bbox(&boxes).expect("line has words"),
                text,
                words,
            });
            y += LINE_PITCH;
        }
        let boxes: Vec<BBox> = lines.iter().map(|l| l.bbox).collect();
        let u = union_bbox(&boxes).expect("block has lines");
        let bbox = BBox::new(u.x0 - BLOCK_PAD, u.y0 - BLOCK_PAD, u.x1 + BLOCK_PAD, u.y1 + BLOCK_PAD);
        let text = lines.iter().map(|l| l.text.as_str()).collect::<Vec<_>>().join(" ");
        blocks.push(Block {
            id: bid,
            bbox,
            text,
            lines,
        });
        y += BLOCK_GAP;
    }
    if y > p.page_height - MARGIN_Y / 2.0 {
        return Err(too_big());
    }
    Ok(Document {
        doc_id: doc_id.to_string(),
        page_width: p.page_width,
        page_height: p.page_height,
        image_path: None,
        blocks,
    })
}

/// Generates the whole corpus. Documents are built in parallel from
/// independent random streams, so the output depends only on `p`.
pub fn generate_synthetic_corpus(p: &SynthParams) -> Result<SynthCorpus, SynthError> {
    p.validate()?;
    let vocab = vocabulary();
    let built: Vec<(Document, Vec<GroundTruth>)> = (0..p.n_docs)
        .into_par_iter()
        .map(|i| build_document(i, p, &vocab))
        .collect::<Result<_, _>>()?;
    let mut docs = Vec::with_capacity(built.len());
    let mut ground_truth = Vec::new();
    for (d, g) in built {
        docs.push(d);
        ground_truth.extend(g);
    }
    Ok(SynthCorpus {
        params: p.clone(),
        docs,
        ground_truth,
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    generator: &'static str,
    version: &'static str,
    seed: u64,
    params: &'a SynthParams,
    layouts: Vec<String>,
    ground_truth: &'static str,
    n_questions: usize,
}

fn write_file(path: &Path, contents: &str) -> Result<(), SynthError> {
    let io = |source| SynthError::Io {
        path: path.display().to_string(),
        source,
    };
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

/// Writes `layouts/<doc_id>.json`, `gt.json` and `manifest.json` under `dir`.
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<(), SynthError> {
    let layouts = dir.join("layouts");
    std::fs::create_dir_all(&layouts).map_err(|source| SynthError::Io {
        path: layouts.display().to_string(),
        source,
    })?;
    let mut names = Vec::with_capacity(corpus.docs.len());
    for d in &corpus.docs {
        let name = format!("{}.json", d.doc_id);
        write_file(&layouts.join(&name), &serialize_layout(d))?;
        names.push(format!("layouts/{name}"));
    }
    write_file(&dir.join("gt.json"), &write_records(&corpus.ground_truth))?;
    let manifest = Manifest {
        generator: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed: corpus.params.seed,
        params: &corpus.params,
        layouts: names,
        ground_truth: "gt.json",
        n_questions: corpus.ground_truth.len(),
    };
    let mut m = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    m.push('\n');
    write_file(&dir.join("manifest.json"), &m)
}
