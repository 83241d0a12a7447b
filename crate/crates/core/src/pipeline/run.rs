use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::PipelineConfig;
use super::dataset::{Dataset, DatasetItem};
use crate::acoustic::{
    align_durations, save_checkpoint, train, AcousticModel, AcousticOutput, Checkpoint, LossBreakdown, Mode, ModelInput,
    TrainOptions, TrainReport,
};
use crate::audioio::{generate_synthetic_corpus, write_corpus, write_wav, AudioClip, CorpusManifest, Emotion};
use crate::error::{NsvError, Result};
use crate::eval::{
    gaussian_stats, project_speakers, repeated_fid, silhouette, utterance_feature, write_projection, write_stats,
    FidReference, Projection, RepeatedFid,
};
use crate::features::{analyze, unscale_pitch, FrameConfig, MelSpectrogram, F0_MAX_HZ, F0_MIN_HZ};
use crate::io::{read_text, write_bytes};
use crate::ppcodec::{from_text, units_to_text, PseudoPhonemeSequence};
use crate::vocoder::Vocoder;

/// Writes the synthetic corpus plus `speakers.tsv` (speaker id and condition group).
pub fn gen_corpus(cfg: &PipelineConfig) -> Result<CorpusManifest> {
    let (manifest, clips) = generate_synthetic_corpus(&cfg.corpus_gen, cfg.seeds.corpus())?;
    let dir = cfg.corpus_dir();
    let written = write_corpus(&dir, &manifest, &clips)?;
    let conditions = &cfg.corpus_gen.conditions;
    let mut s = String::from("speaker_id\tgroup\tcutoff_hz\n");
    for (i, spk) in written.speakers().iter().enumerate() {
        let c = conditions[i % conditions.len()];
        let cutoff = c.cutoff_hz.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        let _ = writeln!(s, "{spk}\t{}\t{cutoff}", i % conditions.len());
    }
    write_bytes(&dir.join("speakers.tsv"), s.as_bytes())?;
    Ok(written)
}

/// Trains on the prepared dataset and writes the checkpoint and `train_loss.tsv`.
pub fn train_model<F>(cfg: &PipelineConfig, on_step: F) -> Result<(Checkpoint, TrainReport)>
where
    F: FnMut(usize, &LossBreakdown) -> Result<()>,
{
    let dataset = Dataset::load(&cfg.dataset_dir())?;
    let items = dataset.train_items()?;
    let mut model_cfg = cfg.model.clone();
    model_cfg.n_speakers = dataset.speakers.len();
    let mut model = AcousticModel::new(model_cfg, cfg.seeds.model())?;
    let opts = TrainOptions::from_model(&model, cfg.seeds.train());
    let report = train(&mut model, &items, &opts, on_step)?;
    let mut extra = BTreeMap::new();
    extra.insert("frame.hop_samples".into(), cfg.frame.hop_samples.to_string());
    extra.insert("frame.win_samples".into(), cfg.frame.win_samples.to_string());
    extra.insert("frame.fft_size".into(), cfg.frame.fft_size.to_string());
    extra.insert("seed.model".into(), cfg.seeds.model().to_string());
    let ckpt = Checkpoint {
        model,
        speakers: dataset.speakers.clone(),
        seed: cfg.seeds.train(),
        extra,
    };
    save_checkpoint(&cfg.checkpoint_path(), &ckpt)?;
    let mut s = String::from("step\ttotal\tmel_l1\tpitch_mse\tdur_mse\n");
    for (i, l) in report.losses.iter().enumerate() {
        let _ = writeln!(s, "{i}\t{}\t{}\t{}\t{}", l.total, l.mel_l1, l.pitch_mse, l.dur_mse);
    }
    write_bytes(&cfg.workdir.join("train_loss.tsv"), s.as_bytes())?;
    Ok((ckpt, report))
}

/// Where the pseudo-phonemes to synthesize come from.
#[derive(Debug, Clone, PartialEq)]
pub enum PpSource {
    Utterance(String),
    /// Codec text; durations (at `frame_rate_hz`) are needed only with ground-truth durations.
    Text {
        text: String,
        durations: Option<Vec<u32>>,
        frame_rate_hz: u32,
    },
}

/// Audit record written next to each synthesized WAV.
#[derive(Debug, Clone, PartialEq)]
pub struct Sidecar {
    pub source: String,
    pub speaker_id: String,
    pub text: String,
    /// Durations used for length regulation, at the mel frame rate.
    pub durations: Vec<u32>,
    pub frame_rate_hz: u32,
    pub duration_source: &'static str,
}

impl Sidecar {
    pub fn to_tsv(&self) -> String {
        let d: Vec<String> = self.durations.iter().map(|v| v.to_string()).collect();
        format!(
            "source\tspeaker_id\ttext\tdurations\tframe_rate_hz\tduration_source\n{}\t{}\t{}\t{}\t{}\t{}\n",
            self.source,
            self.speaker_id,
            self.text,
            d.join(","),
            self.frame_rate_hz,
            self.duration_source
        )
    }
}

/// Checkpoint plus vocoder, ready to render pseudo-phoneme sequences.
pub struct Synthesizer {
    pub checkpoint: Checkpoint,
    vocoder: Vocoder,
    frame: FrameConfig,
    voicing_threshold: f64,
}

impl Synthesizer {
    pub fn new(checkpoint: Checkpoint, cfg: &PipelineConfig) -> Result<Self> {
        if checkpoint.model.config.mel_bins != crate::features::N_MELS {
            return Err(NsvError::invalid("checkpoint mel size differs from the feature front end"));
        }
        Ok(Self {
            vocoder: Vocoder::new(cfg.hnm.clone(), checkpoint.model.config.mel_bins)?,
            frame: cfg.frame,
            voicing_threshold: cfg.voicing_threshold,
            checkpoint,
        })
    }

    /// Predicts mel and pitch, then vocodes. `durations` are at the mel rate.
    pub fn render(
        &self,
        units: &[u16],
        speaker: usize,
        durations: Option<&[u32]>,
        noise_seed: u64,
        utterance_id: &str,
    ) -> Result<(AudioClip, AcousticOutput)> {
        let out = self.checkpoint.model.forward(
            &ModelInput {
                units,
                speaker,
                durations,
            },
            Mode::Infer,
        )?;
        let mel = MelSpectrogram::new(out.mel.clone(), out.frames, out.mel_bins, self.frame)?;
        let pitch = unscale_pitch(&out.pitch, F0_MIN_HZ, F0_MAX_HZ, self.voicing_threshold, self.frame)?;
        let mut clip = self.vocoder.synthesize(&mel, &pitch, noise_seed, utterance_id)?;
        clip.speaker_id = self.checkpoint.speakers[speaker].clone();
        Ok((clip, out))
    }
}

/// Resolves the source, renders it under `speaker_id` and returns the clip and its audit record.
pub fn synthesize(
    synth: &Synthesizer,
    dataset: Option<&Dataset>,
    source: &PpSource,
    speaker_id: &str,
    noise_seed: u64,
    ground_truth_durations: bool,
) -> Result<(AudioClip, Sidecar)> {
    let speaker = synth.checkpoint.speaker_index(speaker_id)?;
    let mel_rate = synth.frame.frame_rate_hz();
    let (label, units, gt) = match source {
        PpSource::Utterance(id) => {
            let ds = dataset.ok_or_else(|| NsvError::invalid("utterance source needs a prepared dataset"))?;
            let item = ds
                .item(id)
                .ok_or_else(|| NsvError::invalid(format!("utterance {id:?} is not in the dataset")))?;
            (id.clone(), item.pp.units.clone(), Some(ds.aligned_durations(item)?))
        }
        PpSource::Text {
            text,
            durations,
            frame_rate_hz,
        } => {
            let units = from_text(text)?;
            let gt = match durations {
                Some(d) => {
                    let pp = PseudoPhonemeSequence::new(units.clone(), d.clone(), *frame_rate_hz)?;
                    Some(align_durations(&pp, mel_rate, None)?)
                }
                None => None,
            };
            ("text".to_string(), units, gt)
        }
    };
    let durations = if ground_truth_durations {
        Some(gt.ok_or_else(|| NsvError::invalid("ground-truth durations requested but none supplied"))?)
    } else {
        None
    };
    let (clip, out) = synth.render(&units, speaker, durations.as_deref(), noise_seed, &label)?;
    let sidecar = Sidecar {
        source: label,
        speaker_id: speaker_id.to_string(),
        text: units_to_text(&units)?,
        durations: out.durations,
        frame_rate_hz: mel_rate,
        duration_source: if ground_truth_durations { "ground-truth" } else { "predicted" },
    };
    Ok((clip, sidecar))
}

/// Writes the WAV and its sidecar (`<stem>.tsv`).
pub fn write_synthesis(path: &Path, clip: &AudioClip, sidecar: &Sidecar) -> Result<PathBuf> {
    write_wav(path, &clip.samples, clip.sample_rate_hz)?;
    let side = path.with_extension("tsv");
    write_bytes(&side, sidecar.to_tsv().as_bytes())?;
    Ok(side)
}

/// Draws a speaker uniformly among those other than `source` (or `source` when it is the only one).
pub fn swap_speaker(n_speakers: usize, source: usize, rng: &mut ChaCha8Rng) -> usize {
    if n_speakers < 2 {
        return source;
    }
    let pick = rng.random_range(0..n_speakers - 1);
    if pick >= source {
        pick + 1
    } else {
        pick
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub emotion: Emotion,
    /// `synthesized` or `train`.
    pub source: &'static str,
    pub n: usize,
    pub result: RepeatedFid,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("emotion\tsource\tn\trepeats\tfid_mean\tfid_std\tstd_defined\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}",
                r.emotion,
                r.source,
                r.n,
                r.result.values.len(),
                r.result.mean,
                r.result.std,
                r.result.std_defined
            );
        }
        s
    }
}

fn features_of(items: &[&DatasetItem]) -> Result<Vec<Vec<f64>>> {
    items.iter().map(|i| utterance_feature(&i.mel)).collect()
}

/// Emotion-conditional FID of speaker-swapped syntheses against the reference
/// dataset, for every `n` in the config, plus the training set's own FID as a
/// baseline row.
pub fn evaluate(cfg: &PipelineConfig, synth: &Synthesizer) -> Result<EvalReport> {
    let train_set = Dataset::load(&cfg.dataset_dir())?;
    let reference = match &cfg.eval.reference {
        Some(dir) => Dataset::load(dir)?,
        None => train_set.clone(),
    };
    let mut emotions: Vec<Emotion> = train_set.items.iter().map(|i| i.emotion).collect();
    emotions.sort_by_key(|e| e.to_string());
    emotions.dedup();
    let eval_dir = cfg.workdir.join("eval");
    let mut report = EvalReport::default();
    let n_speakers = synth.checkpoint.speakers.len();
    for emotion in emotions {
        let refs: Vec<&DatasetItem> = reference.items.iter().filter(|i| i.emotion == emotion).collect();
        if refs.len() < 2 {
            continue;
        }
        let ref_stats = gaussian_stats(&features_of(&refs)?)?;
        write_stats(&eval_dir.join(format!("ref_{emotion}.fids")), &ref_stats)?;
        let reference_fid = FidReference::new(ref_stats)?;
        let sources: Vec<&DatasetItem> = train_set.items.iter().filter(|i| i.emotion == emotion).collect();
        for &n in &cfg.eval.n_values {
            let draw = |_r: usize, n: usize, rng: &mut ChaCha8Rng| -> Result<Vec<Vec<f64>>> {
                (0..n)
                    .map(|k| {
                        let src = *sources.choose(rng).expect("emotion has items");
                        let from = synth.checkpoint.speaker_index(&src.speaker_id)?;
                        let to = swap_speaker(n_speakers, from, rng);
                        let seed: u64 = rng.random();
                        let (clip, _) = synth.render(&src.pp.units, to, None, seed, &format!("eval{k}"))?;
                        let (mel, _) = analyze(&clip, &cfg.frame)?;
                        utterance_feature(&mel)
                    })
                    .collect()
            };
            let result = repeated_fid(draw, &reference_fid, n, cfg.eval.repeats, cfg.seeds.eval())?;
            report.rows.push(EvalRow {
                emotion,
                source: "synthesized",
                n,
                result,
            });
        }
        let train_feats = features_of(&sources)?;
        if train_feats.len() >= 2 {
            let fid = reference_fid.fid(&gaussian_stats(&train_feats)?)?;
            report.rows.push(EvalRow {
                emotion,
                source: "train",
                n: train_feats.len(),
                result: RepeatedFid {
                    values: vec![fid],
                    mean: fid,
                    std: 0.0,
                    std_defined: false,
                    n_per_eval: train_feats.len(),
                },
            });
        }
    }
    write_bytes(&eval_dir.join("fid_report.tsv"), report.to_tsv().as_bytes())?;
    Ok(report)
}

/// Reads `speaker_id<TAB>group...` rows (header optional) into a speaker -> group map.
pub fn read_speaker_groups(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = read_text(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || (i == 0 && line.starts_with("speaker_id\t")) {
            continue;
        }
        let mut cols = line.split('\t');
        match (cols.next(), cols.next()) {
            (Some(s), Some(g)) => {
                out.insert(s.to_string(), g.to_string());
            }
            _ => {
                return Err(NsvError::Parse {
                    line: i + 1,
                    message: "expected speaker_id and group columns".into(),
                })
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerAnalysis {
    pub projection: Projection,
    /// Silhouette of the 2-D points under the supplied grouping; `None`
    /// without groups or when every speaker shares one group.
    pub silhouette: Option<f64>,
}

/// Projects the checkpoint's speaker table to 2-D and writes `speakers_projection.tsv`.
pub fn analyze_speakers(
    cfg: &PipelineConfig,
    ckpt: &Checkpoint,
    groups: Option<&BTreeMap<String, String>>,
) -> Result<SpeakerAnalysis> {
    let projection = project_speakers(&ckpt.speakers, &ckpt.model.speaker_embeddings())?;
    write_projection(&cfg.workdir.join("speakers_projection.tsv"), &projection)?;
    let silhouette = match groups {
        Some(g) => {
            let mut names: Vec<&String> = g.values().collect();
            names.sort();
            names.dedup();
            let labels = ckpt
                .speakers
                .iter()
                .map(|s| {
                    g.get(s)
                        .map(|name| names.iter().position(|n| *n == name).unwrap())
                        .ok_or_else(|| NsvError::invalid(format!("speaker {s} has no group")))
                })
                .collect::<Result<Vec<_>>>()?;
            let pts: Vec<Vec<f64>> = projection.points.iter().map(|(_, x, y)| vec![*x, *y]).collect();
            if labels.iter().any(|&l| l != labels[0]) {
                Some(silhouette(&pts, &labels)?)
            } else {
                None
            }
        }
        None => None,
    };
    Ok(SpeakerAnalysis { projection, silhouette })
}
