use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nsv_core::acoustic::load_checkpoint;
use nsv_core::pipeline::{
    analyze_speakers, evaluate, gen_corpus, prepare, read_speaker_groups, synthesize, train_model, write_synthesis,
    Dataset, PipelineConfig, PpSource, Synthesizer,
};
use nsv_core::{NsvError, Result};

#[derive(Parser)]
#[command(name = "nsv", version, about = "Non-speech vocalization synthesis from discrete units")]
struct Cli {
    /// key=value config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; per-stage seeds derive from it unless set explicitly
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    /// Override a config key (repeatable), e.g. --set model.max_steps=100
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the seeded synthetic corpus into the corpus directory
    GenCorpus,
    /// Prune, analyze, quantize and encode the corpus into the dataset directory
    Prepare,
    /// Train the acoustic model and write the checkpoint
    Train,
    /// Render one pseudo-phoneme sequence under a chosen speaker
    Synthesize(SynthArgs),
    /// Emotion-conditional FID of speaker-swapped syntheses
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Export the 2-D projection of the speaker table
    AnalyzeSpeakers {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// TSV of speaker_id and group; defaults to the corpus speakers.tsv when present
        #[arg(long)]
        groups: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    speaker: String,
    /// Take the pseudo-phonemes of this dataset utterance
    #[arg(long, conflicts_with = "text", required_unless_present = "text")]
    utterance: Option<String>,
    /// Pseudo-phoneme text
    #[arg(long)]
    text: Option<String>,
    /// Comma-separated durations for --text, in frames at --frame-rate
    #[arg(long, requires = "text")]
    durations: Option<String>,
    #[arg(long, default_value_t = 50)]
    frame_rate: u32,
    #[arg(long)]
    noise_seed: Option<u64>,
    /// Use source durations instead of predicted ones
    #[arg(long)]
    ground_truth_durations: bool,
    #[arg(long, default_value = "out.wav")]
    out: PathBuf,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| NsvError::invalid(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(w) = &cli.workdir {
        cfg.workdir = w.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_durations(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|d| {
            d.trim()
                .parse()
                .map_err(|_| NsvError::invalid(format!("bad duration {d:?}")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let ckpt_path = |p: &Option<PathBuf>| p.clone().unwrap_or_else(|| cfg.checkpoint_path());
    match &cli.command {
        Command::GenCorpus => {
            let m = gen_corpus(&cfg)?;
            println!("clips\t{}\ncorpus\t{}", m.entries.len(), cfg.corpus_dir().display());
        }
        Command::Prepare => {
            let report = prepare(&cfg)?;
            print!("{}", report.to_tsv());
        }
        Command::Train => {
            let every = (cfg.model.max_steps / 20).max(1);
            let (_, report) = train_model(&cfg, |step, l| {
                if step % every == 0 {
                    eprintln!("step {step} loss {:.4} mel {:.4} pitch {:.4} dur {:.4}", l.total, l.mel_l1, l.pitch_mse, l.dur_mse);
                }
                Ok(())
            })?;
            if let Some(last) = report.losses.last() {
                println!("steps\t{}\nfinal_loss\t{}", report.losses.len(), last.total);
            }
            println!("checkpoint\t{}", cfg.checkpoint_path().display());
        }
        Command::Synthesize(a) => {
            let synth = Synthesizer::new(load_checkpoint(&ckpt_path(&a.checkpoint))?, &cfg)?;
            let source = match (&a.utterance, &a.text) {
                (Some(u), _) => PpSource::Utterance(u.clone()),
                (None, Some(t)) => PpSource::Text {
                    text: t.clone(),
                    durations: a.durations.as_deref().map(parse_durations).transpose()?,
                    frame_rate_hz: a.frame_rate,
                },
                (None, None) => return Err(NsvError::invalid("need --utterance or --text")),
            };
            let dataset = match source {
                PpSource::Utterance(_) => Some(Dataset::load(&cfg.dataset_dir())?),
                PpSource::Text { .. } => None,
            };
            let gt = a.ground_truth_durations || cfg.ground_truth_durations;
            let seed = a.noise_seed.unwrap_or_else(|| cfg.seeds.synth());
            let (clip, sidecar) = synthesize(&synth, dataset.as_ref(), &source, &a.speaker, seed, gt)?;
            let side = write_synthesis(&a.out, &clip, &sidecar)?;
            println!("wav\t{}\nsidecar\t{}\nsamples\t{}", a.out.display(), side.display(), clip.samples.len());
        }
        Command::Evaluate { checkpoint } => {
            let synth = Synthesizer::new(load_checkpoint(&ckpt_path(checkpoint))?, &cfg)?;
            print!("{}", evaluate(&cfg, &synth)?.to_tsv());
        }
        Command::AnalyzeSpeakers { checkpoint, groups } => {
            let ckpt = load_checkpoint(&ckpt_path(checkpoint))?;
            let default_groups = cfg.corpus_dir().join("speakers.tsv");
            let groups = match groups {
                Some(p) => Some(read_speaker_groups(p)?),
                None if default_groups.exists() => Some(read_speaker_groups(&default_groups)?),
                None => None,
            };
            let a = analyze_speakers(&cfg, &ckpt, groups.as_ref())?;
            if a.projection.degenerate {
                eprintln!("warning: speaker table is degenerate, all points at the origin");
            }
            println!("projection\t{}", cfg.workdir.join("speakers_projection.tsv").display());
            if let Some(s) = a.silhouette {
                println!("silhouette\t{s:.4}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace(['\t', '\n'], " ");
            eprintln!("error\t{}\t{msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
