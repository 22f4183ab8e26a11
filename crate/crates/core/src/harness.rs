//! Experiment tooling: synthetic corpora, parameter sweeps and SVG overlays.

pub mod ablation;
pub mod overlay;
pub mod synth;

pub use ablation::{load_corpus, run_ablation, run_ablation_on, AblationParam, AblationSpec, AblationTable};
pub use overlay::{render_overlay, render_result, OverlayStyle};
pub use synth::{generate_synthetic_corpus, write_corpus, SynthCorpus, SynthParams};
