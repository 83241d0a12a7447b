//! Orchestration of the subcommands: corpus generation, preparation,
//! training, synthesis with speaker swapping, evaluation and analysis.

mod config;
mod dataset;
mod run;

pub use config::{EvalSettings, PipelineConfig, Seeds};
pub use dataset::{format_pp_tsv, parse_pp_tsv, prepare, Dataset, DatasetItem, DatasetReport, PpRecord};
pub use run::{
    analyze_speakers, evaluate, gen_corpus, read_speaker_groups, swap_speaker, synthesize, train_model,
    write_synthesis, EvalReport, EvalRow, PpSource, Sidecar, SpeakerAnalysis, Synthesizer,
};
