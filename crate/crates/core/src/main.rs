use std::collections::HashMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use docground::config::STOPWORDS_ENV;
use docground::evaluator::{EvalGranularity, EvalOptions};
use docground::harness::ablation::{ground_all, load_corpus, AblationParam, AblationSpec};
use docground::harness::{
    generate_synthetic_corpus, render_overlay, run_ablation_on, write_corpus, OverlayStyle, SynthParams,
};
use docground::layout::{parse_layout, parse_layout_unchecked, serialize_layout, LayoutError};
use docground::records::{parse_ground_truth, parse_predictions, write_records, GroundTruth, PredictionRecord};
use docground::{evaluate_corpus, ground, Document, MatchConfig, PointMode, Stopwords};

#[derive(Parser)]
#[command(
    name = "docground",
    version,
    about = "Ground answers in OCR layouts and score the result"
)]
struct Cli {
    /// Worker threads for batch work (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Localize an answer at block, line, word and point granularity.
    Ground(GroundArgs),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Sweep max-blocks or max-lines over a corpus.
    Ablate(AblateArgs),
    /// Generate a synthetic corpus with planted answers.
    Synth(SynthArgs),
    /// Draw predicted regions over a page as SVG.
    Render(RenderArgs),
    /// Check a layout file (or a directory of them); optionally write its canonical form.
    Validate(ValidateArgs),
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// Match configuration file (JSON); the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    iou: Option<f64>,
    #[arg(long)]
    max_blocks: Option<usize>,
    #[arg(long)]
    max_lines: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct GroundArgs {
    /// Layout file, or a corpus directory in batch mode.
    #[arg(long, short = 'l')]
    layout: PathBuf,
    /// Batch file of records with question_id, doc_id, question and answer.
    #[arg(long, short = 'q', conflicts_with_all = ["question", "answer"])]
    questions: Option<PathBuf>,
    #[arg(long)]
    question: Option<String>,
    #[arg(long, required_unless_present = "questions")]
    answer: Option<String>,
    #[arg(long, default_value = "q0")]
    question_id: String,
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Block,
    Line,
    Word,
    Point,
    All,
}

impl GranularityArg {
    fn get(self) -> Option<EvalGranularity> {
        match self {
            GranularityArg::Block => Some(EvalGranularity::Block),
            GranularityArg::Line => Some(EvalGranularity::Line),
            GranularityArg::Word => Some(EvalGranularity::Word),
            GranularityArg::Point => Some(EvalGranularity::Point),
            GranularityArg::All => None,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PointModeArg {
    PointInBox,
    Distance,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Report file; `.json` gives the structured report, anything else CSV.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    granularity: GranularityArg,
    #[arg(long, value_enum, default_value = "point-in-box")]
    point_mode: PointModeArg,
    /// Page size WxH, needed by the distance point mode.
    #[arg(long)]
    page_size: Option<String>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct AblateArgs {
    /// Corpus directory (layout files directly inside or under `layouts/`).
    #[arg(long, short = 'l', visible_alias = "corpus")]
    layout: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// max-blocks or max-lines.
    #[arg(long)]
    param: AblationParam,
    /// Inclusive range `a:b` or a comma-separated ascending list.
    #[arg(long)]
    values: String,
    /// Granularity to report (default: block for max-blocks, line for max-lines).
    #[arg(long, value_enum)]
    granularity: Option<GranularityArg>,
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long, short = 'o')]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    n_docs: usize,
    #[arg(long, default_value_t = 3)]
    questions_per_doc: usize,
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    distractors: f64,
    #[arg(long, default_value_t = 0.2)]
    multiblock: f64,
    #[arg(long, default_value_t = 0.3)]
    multiline: f64,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long, short = 'l')]
    layout: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Which record to draw when the prediction file holds several.
    #[arg(long)]
    question_id: Option<String>,
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Layout file or directory of layout files.
    #[arg(long, short = 'l')]
    layout: PathBuf,
    /// Write the canonical form of a valid single layout here.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

trait Classify<T> {
    fn input(self) -> Result<T, Failure>;
    fn internal(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 1, err: e.into() })
    }
    fn internal(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 2, err: e.into() })
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .input()
}

/// Writes through a temporary sibling and a rename, or to stdout without a path.
fn emit(out: Option<&Path>, contents: &str) -> Result<(), Failure> {
    match out {
        None => std::io::stdout()
            .write_all(contents.as_bytes())
            .context("cannot write to stdout")
            .internal(),
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("cannot create {}", dir.display()))
                    .internal()?;
            }
            let mut tmp = path.as_os_str().to_owned();
            tmp.push(".tmp");
            let tmp = PathBuf::from(tmp);
            std::fs::write(&tmp, contents)
                .with_context(|| format!("cannot write {}", tmp.display()))
                .internal()?;
            std::fs::rename(&tmp, path)
                .with_context(|| format!("cannot write {}", path.display()))
                .internal()
        }
    }
}

fn load_config(args: &ConfigArgs) -> Result<MatchConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => MatchConfig::from_file(path).input()?,
        None => MatchConfig::default(),
    };
    if let Some(path) = std::env::var_os(STOPWORDS_ENV) {
        cfg.stopwords = Stopwords::from_file(Path::new(&path)).input()?;
    }
    if let Some(v) = args.iou {
        cfg.iou_threshold = v;
    }
    if let Some(v) = args.max_blocks {
        cfg.max_blocks = v;
    }
    if let Some(v) = args.max_lines {
        cfg.max_lines = v;
    }
    if let Some(v) = args.top_k {
        cfg.top_k = v;
    }
    if let Some(v) = args.threshold {
        cfg.threshold = v;
    }
    cfg.validate().input()?;
    Ok(cfg)
}

fn layout_error(path: &Path, e: LayoutError) -> anyhow::Error {
    match e {
        LayoutError::Invalid(vs) => {
            let list: Vec<String> = vs.iter().map(|v| format!("  {v}")).collect();
            anyhow!(
                "{}: layout violates {} rule(s):\n{}",
                path.display(),
                vs.len(),
                list.join("\n")
            )
        }
        e => anyhow!("{}: {e}", path.display()),
    }
}

fn load_layout(path: &Path) -> Result<Document, Failure> {
    parse_layout(&read(path)?).map_err(|e| layout_error(path, e)).input()
}

#[derive(Deserialize)]
struct QaRecord {
    question_id: String,
    doc_id: String,
    #[serde(default)]
    question: String,
    answer: String,
}

fn cmd_ground(a: GroundArgs) -> Result<(), Failure> {
    let cfg = load_config(&a.config)?;
    let Some(qa_path) = a.questions else {
        let doc = load_layout(&a.layout)?;
        let answer = a.answer.expect("clap requires --answer without --questions");
        let question = a.question.unwrap_or_default();
        let result = ground(&a.question_id, &answer, &question, &doc, &cfg).input()?;
        return emit(a.out.as_deref(), &write_records(&[PredictionRecord::from(&result)]));
    };

    let raw = read(&qa_path)?;
    let records: Vec<QaRecord> = match serde_json::from_str::<serde_json::Value>(&raw) {
        Ok(v) if v.is_array() => serde_json::from_value(v),
        Ok(v) => serde_json::from_value(v).map(|one| vec![one]),
        Err(e) => Err(e),
    }
    .with_context(|| format!("cannot parse {}", qa_path.display()))
    .input()?;
    let docs = if a.layout.is_dir() {
        load_corpus(&a.layout).input()?
    } else {
        vec![load_layout(&a.layout)?]
    };
    let gts: Vec<GroundTruth> = records
        .into_iter()
        .map(|r| GroundTruth {
            question_id: r.question_id,
            doc_id: r.doc_id,
            question: r.question,
            answer: r.answer,
            regions: Default::default(),
        })
        .collect();
    let mut seen = HashMap::new();
    for g in &gts {
        if seen.insert(g.question_id.as_str(), ()).is_some() {
            return Err(anyhow!("duplicate question_id {}", g.question_id)).input();
        }
    }
    let preds = ground_all(&docs, &gts, &cfg).input()?;
    emit(a.out.as_deref(), &write_records(&preds))
}

fn parse_page_size(s: &str) -> anyhow::Result<(f64, f64)> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| anyhow!("page size must look like WxH"))?;
    let (w, h): (f64, f64) = (w.trim().parse()?, h.trim().parse()?);
    if !(w > 0.0 && h > 0.0) {
        bail!("page size must be positive");
    }
    Ok((w, h))
}

fn cmd_eval(a: EvalArgs) -> Result<(), Failure> {
    let cfg = load_config(&a.config)?;
    let preds = parse_predictions(&read(&a.pred)?)
        .with_context(|| a.pred.display().to_string())
        .input()?;
    let gts = parse_ground_truth(&read(&a.gt)?)
        .with_context(|| a.gt.display().to_string())
        .input()?;
    let mut opts = EvalOptions::from_config(&cfg);
    if let PointModeArg::Distance = a.point_mode {
        let size = a
            .page_size
            .as_deref()
            .ok_or_else(|| anyhow!("--point-mode distance needs --page-size WxH"))
            .input()?;
        let (w, h) = parse_page_size(size).input()?;
        opts.point_mode = PointMode::Distance {
            page_diagonal: w.hypot(h),
        };
    }
    let report = evaluate_corpus(&preds, &gts, &cfg, &opts).input()?;
    let json = a
        .out
        .as_deref()
        .is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
    let text = if json {
        report.to_json()
    } else {
        report.to_csv(a.granularity.get())
    };
    emit(a.out.as_deref(), &text)
}

fn parse_values(s: &str) -> anyhow::Result<Vec<usize>> {
    if let Some((a, b)) = s.split_once(':') {
        let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            bail!("empty range {s}");
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|v| v.trim().parse::<usize>().map_err(Into::into))
        .collect()
}

fn cmd_ablate(a: AblateArgs) -> Result<(), Failure> {
    let cfg = load_config(&a.config)?;
    let values = parse_values(&a.values).context("bad --values").input()?;
    let mut spec = AblationSpec::new(a.param, values, cfg);
    if let Some(g) = a.granularity {
        spec.granularity = g
            .get()
            .ok_or_else(|| anyhow!("ablate reports a single granularity"))
            .input()?;
    }
    spec.validate().input()?;
    let docs = load_corpus(&a.layout).input()?;
    let gts = parse_ground_truth(&read(&a.gt)?)
        .with_context(|| a.gt.display().to_string())
        .input()?;
    let table = run_ablation_on(&docs, &gts, &spec).input()?;
    emit(a.out.as_deref(), &table.to_csv())
}

fn cmd_synth(a: SynthArgs) -> Result<(), Failure> {
    let p = SynthParams {
        seed: a.seed,
        n_docs: a.n_docs,
        questions_per_doc: a.questions_per_doc,
        ocr_noise_rate: a.noise,
        distractor_rate: a.distractors,
        multiblock_fraction: a.multiblock,
        multiline_fraction: a.multiline,
        ..SynthParams::default()
    };
    let corpus = generate_synthetic_corpus(&p).input()?;
    write_corpus(&corpus, &a.out).internal()?;
    eprintln!(
        "wrote {} documents and {} questions to {}",
        corpus.docs.len(),
        corpus.ground_truth.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_render(a: RenderArgs) -> Result<(), Failure> {
    let doc = load_layout(&a.layout)?;
    let preds = parse_predictions(&read(&a.pred)?)
        .with_context(|| a.pred.display().to_string())
        .input()?;
    let pick: Vec<&PredictionRecord> = match &a.question_id {
        Some(id) => preds.iter().filter(|p| &p.question_id == id).collect(),
        None => preds.iter().filter(|p| p.doc_id == doc.doc_id).collect(),
    };
    let pred = match pick.as_slice() {
        [one] => *one,
        [] => {
            return Err(anyhow!(
                "no prediction for document {} in {}",
                doc.doc_id,
                a.pred.display()
            ))
            .input()
        }
        _ => return Err(anyhow!("several predictions match; choose one with --question-id")).input(),
    };
    if pred.doc_id != doc.doc_id {
        return Err(anyhow!(
            "prediction {} belongs to {}, not {}",
            pred.question_id,
            pred.doc_id,
            doc.doc_id
        ))
        .input();
    }
    emit(a.out.as_deref(), &render_overlay(&doc, pred, &OverlayStyle::default()))
}

fn cmd_validate(a: ValidateArgs) -> Result<(), Failure> {
    let files = if a.layout.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(&a.layout)
            .with_context(|| format!("cannot list {}", a.layout.display()))
            .input()?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        files.sort();
        files
    } else {
        vec![a.layout.clone()]
    };
    if a.out.is_some() && files.len() != 1 {
        return Err(anyhow!("--out needs a single layout file")).input();
    }

    let mut report = String::new();
    let mut failed = 0;
    let mut canonical = None;
    for path in &files {
        let doc = match parse_layout_unchecked(&read(path)?) {
            Ok(d) => d,
            Err(e) => {
                failed += 1;
                report.push_str(&format!("{}: {e}\n", path.display()));
                continue;
            }
        };
        let violations = docground::validate_document(&doc);
        if violations.is_empty() {
            let (b, l, w) = doc.counts();
            report.push_str(&format!("{}: ok ({b} blocks, {l} lines, {w} words)\n", path.display()));
            canonical = Some(serialize_layout(&doc));
        } else {
            failed += 1;
            for v in &violations {
                report.push_str(&format!("{}: {v}\n", path.display()));
            }
        }
    }
    emit(None, &report)?;
    if failed > 0 {
        return Err(anyhow!("{failed} of {} layout file(s) invalid", files.len())).input();
    }
    match (a.out, canonical) {
        (Some(out), Some(text)) => emit(Some(&out), &text),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(anyhow!("--jobs must be at least 1")).input();
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .internal()?;
    }
    match cli.command {
        Command::Ground(a) => cmd_ground(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Render(a) => cmd_render(a),
        Command::Validate(a) => cmd_validate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, err }) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}
