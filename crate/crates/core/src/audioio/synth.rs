//! Synthetic laughter-like corpus standing in for a real vocalization dataset.
//!
//! Each speaker gets a fixed timbre (base f0, three formants, breathiness)
//! and a recording condition (optional band limit and noise floor). Clips are
//! voiced burst trains ("ha ha ha") separated by pauses or inhalation noise.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{write_manifest, write_wav, AudioClip, CorpusManifest, Emotion, ManifestEntry, PIPELINE_RATE};
use crate::error::{NsvError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RecordingCondition {
    /// Low-pass cutoff simulating a band-limited codec or microphone.
    pub cutoff_hz: Option<f64>,
    /// Level of an additive white noise floor.
    pub noise_dbfs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpusConfig {
    pub n_speakers: usize,
    pub clips_per_speaker: usize,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    /// Assigned to clips round-robin.
    pub emotions: Vec<Emotion>,
    /// Assigned to speakers round-robin, so speaker `i` gets `conditions[i % len]`.
    pub conditions: Vec<RecordingCondition>,
    pub f0_range_hz: (f64, f64),
}

impl Default for SynthCorpusConfig {
    fn default() -> Self {
        Self {
            n_speakers: 5,
            clips_per_speaker: 4,
            min_duration_s: 0.8,
            max_duration_s: 1.4,
            emotions: vec![Emotion::Amusement, Emotion::Awe],
            conditions: vec![RecordingCondition::default()],
            f0_range_hz: (140.0, 320.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerTimbre {
    pub speaker_id: String,
    pub base_f0_hz: f64,
    pub formants_hz: [f64; 3],
    pub bandwidths_hz: [f64; 3],
    pub breathiness: f64,
    pub peak_gain: f64,
    pub condition: RecordingCondition,
}

impl SpeakerTimbre {
    fn harmonic_gain(&self, freq: f64, k: usize) -> f64 {
        let resonance: f64 = self
            .formants_hz
            .iter()
            .zip(&self.bandwidths_hz)
            .enumerate()
            .map(|(i, (&f, &b))| {
                let x = (freq - f) / b;
                (1.0 / (1.0 + x * x)) / (1.0 + i as f64)
            })
            .sum();
        (resonance + 0.02) / (k as f64).sqrt()
    }
}

fn validate(cfg: &SynthCorpusConfig) -> Result<()> {
    if !(cfg.min_duration_s > 0.0) || cfg.min_duration_s > cfg.max_duration_s {
        return Err(NsvError::invalid(format!(
            "duration range [{}, {}] is empty or inverted",
            cfg.min_duration_s, cfg.max_duration_s
        )));
    }
    if cfg.min_duration_s < 0.4 {
        return Err(NsvError::invalid("clips shorter than 0.4 s cannot hold two voiced bursts"));
    }
    if !(cfg.f0_range_hz.0 > 0.0 && cfg.f0_range_hz.0 < cfg.f0_range_hz.1) {
        return Err(NsvError::invalid("f0 range must be positive and increasing"));
    }
    if cfg.emotions.is_empty() || cfg.conditions.is_empty() {
        return Err(NsvError::invalid("emotions and conditions must be nonempty"));
    }
    if cfg.n_speakers == 0 || cfg.clips_per_speaker == 0 {
        return Err(NsvError::EmptyCorpus(format!(
            "{} speakers x {} clips per speaker",
            cfg.n_speakers, cfg.clips_per_speaker
        )));
    }
    Ok(())
}

/// Generates the corpus in memory. Pure in `(cfg, seed)`; entry paths are
/// relative (`wav/<utterance_id>.wav`).
pub fn generate_synthetic_corpus(cfg: &SynthCorpusConfig, seed: u64) -> Result<(CorpusManifest, Vec<AudioClip>)> {
    validate(cfg)?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let (f0_lo, f0_hi) = cfg.f0_range_hz;
    let stride = (f0_hi - f0_lo) / cfg.n_speakers as f64;
    let mut f0_slots: Vec<usize> = (0..cfg.n_speakers).collect();
    // Shuffle so base pitch is not tied to the condition group.
    for i in (1..f0_slots.len()).rev() {
        let j = master.random_range(0..=i);
        f0_slots.swap(i, j);
    }
    let timbres: Vec<SpeakerTimbre> = (0..cfg.n_speakers)
        .map(|s| SpeakerTimbre {
            speaker_id: format!("spk{s:03}"),
            // stratified so every speaker has a distinct base pitch
            base_f0_hz: f0_lo + stride * (f0_slots[s] as f64 + master.random_range(0.2..0.8)),
            formants_hz: [
                master.random_range(500.0..900.0),
                master.random_range(1100.0..2000.0),
                master.random_range(2300.0..3200.0),
            ],
            bandwidths_hz: [
                master.random_range(80.0..140.0),
                master.random_range(100.0..180.0),
                master.random_range(150.0..250.0),
            ],
            breathiness: master.random_range(0.02..0.08),
            peak_gain: master.random_range(0.35..0.7),
            condition: cfg.conditions[s % cfg.conditions.len()],
        })
        .collect();

    let mut entries = Vec::new();
    let mut clips = Vec::new();
    for timbre in &timbres {
        for c in 0..cfg.clips_per_speaker {
            let clip_seed: u64 = master.random();
            let mut rng = ChaCha8Rng::seed_from_u64(clip_seed);
            let duration = if cfg.max_duration_s > cfg.min_duration_s {
                rng.random_range(cfg.min_duration_s..cfg.max_duration_s)
            } else {
                cfg.min_duration_s
            };
            let emotion = cfg.emotions[(entries.len()) % cfg.emotions.len()];
            let samples = render_clip(timbre, emotion, duration, &mut rng);
            let utterance_id = format!("{}_{c:03}", timbre.speaker_id);
            entries.push(ManifestEntry {
                utterance_id: utterance_id.clone(),
                speaker_id: timbre.speaker_id.clone(),
                emotion,
                path: PathBuf::from(format!("wav/{utterance_id}.wav")),
                duration_s: samples.len() as f64 / PIPELINE_RATE as f64,
            });
            clips.push(AudioClip {
                samples,
                sample_rate_hz: PIPELINE_RATE,
                utterance_id,
                speaker_id: timbre.speaker_id.clone(),
                emotion,
            });
        }
    }
    Ok((CorpusManifest::new(entries, PathBuf::new())?, clips))
}

/// Writes `manifest.tsv`, `prune_log.tsv` and `wav/*.wav` under `dir`.
pub fn write_corpus(dir: &Path, manifest: &CorpusManifest, clips: &[AudioClip]) -> Result<CorpusManifest> {
    let mut m = manifest.clone();
    m.root = dir.to_path_buf();
    for (entry, clip) in m.entries.iter().zip(clips) {
        write_wav(&m.resolve(entry), &clip.samples, clip.sample_rate_hz)?;
    }
    write_manifest(&dir.join("manifest.tsv"), &m)?;
    Ok(m)
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    /// Voiced burst with start/end f0 multipliers relative to the speaker's base pitch.
    Voiced { len: usize, f0_start: f64, f0_end: f64 },
    Inhale { len: usize },
    Pause { len: usize },
}

fn plan_segments(emotion: Emotion, duration_s: f64, rng: &mut ChaCha8Rng) -> Vec<Segment> {
    let fs = PIPELINE_RATE as f64;
    let total = (duration_s * fs) as usize;
    let ms = |v: f64| (v * fs / 1000.0) as usize;
    let mut segs = vec![Segment::Pause { len: ms(40.0) }];
    let mut used = ms(40.0);
    match emotion {
        Emotion::Awe => {
            // "wo-ah": two long gliding vowels.
            let first = ((total as f64) * rng.random_range(0.3..0.4)) as usize;
            let gap = ms(rng.random_range(60.0..100.0));
            let second = total.saturating_sub(used + first + gap + ms(60.0));
            segs.push(Segment::Voiced { len: first, f0_start: 0.9, f0_end: 1.25 });
            segs.push(Segment::Pause { len: gap });
            segs.push(Segment::Voiced { len: second, f0_start: 1.2, f0_end: 0.85 });
        }
        _ => {
            let mut bursts = 0;
            loop {
                let burst = ms(rng.random_range(70.0..140.0));
                let start = rng.random_range(1.0..1.2) - 0.03 * bursts as f64;
                let end = start * rng.random_range(0.85..0.97);
                if used + burst + ms(30.0) > total && bursts >= 2 {
                    break;
                }
                segs.push(Segment::Voiced { len: burst, f0_start: start, f0_end: end });
                used += burst;
                bursts += 1;
                let gap = if bursts % 4 == 0 && rng.random_bool(0.6) {
                    Segment::Inhale { len: ms(rng.random_range(150.0..230.0)) }
                } else {
                    Segment::Pause { len: ms(rng.random_range(50.0..110.0)) }
                };
                let gap_len = match gap {
                    Segment::Inhale { len } | Segment::Pause { len } => len,
                    Segment::Voiced { .. } => unreachable!(),
                };
                if used + gap_len >= total && bursts >= 2 {
                    break;
                }
                segs.push(gap);
                used += gap_len;
            }
        }
    }
    segs.push(Segment::Pause { len: ms(40.0) });
    segs
}

/// Raised-cosine attack/release envelope.
fn envelope(i: usize, len: usize, attack: usize, release: usize) -> f64 {
    let a = if i < attack { 0.5 - 0.5 * (PI * i as f64 / attack as f64).cos() } else { 1.0 };
    let r_i = len - 1 - i;
    let r = if r_i < release { 0.5 - 0.5 * (PI * r_i as f64 / release as f64).cos() } else { 1.0 };
    a * r
}

fn render_clip(t: &SpeakerTimbre, emotion: Emotion, duration_s: f64, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let fs = PIPELINE_RATE as f64;
    let max_harm_hz = 15_000.0;
    let segs = plan_segments(emotion, duration_s, rng);
    let mut out: Vec<f64> = Vec::new();
    for seg in segs {
        match seg {
            Segment::Pause { len } => out.extend(std::iter::repeat_n(0.0, len)),
            Segment::Inhale { len } => {
                let mut prev = 0.0;
                for i in 0..len {
                    let w: f64 = StandardNormal.sample(rng);
                    // first difference tilts the noise upward like turbulent airflow
                    let v = w - 0.7 * prev;
                    prev = w;
                    out.push(0.12 * v * envelope(i, len, len / 3, len / 3));
                }
            }
            Segment::Voiced { len, f0_start, f0_end } => {
                let onset = (0.015 * fs) as usize;
                // breathy /h/ onset
                for i in 0..onset {
                    let w: f64 = StandardNormal.sample(rng);
                    out.push(0.05 * w * envelope(i, onset, onset / 2, onset / 2));
                }
                let mut phase = vec![0.0f64; 128];
                let attack = (0.01 * fs) as usize;
                let release = (0.02 * fs) as usize;
                for i in 0..len {
                    let frac = i as f64 / len.max(1) as f64;
                    let f0 = t.base_f0_hz * (f0_start + (f0_end - f0_start) * frac);
                    let mut v = 0.0;
                    let mut k = 1;
                    while k < phase.len() && k as f64 * f0 < max_harm_hz {
                        phase[k] += 2.0 * PI * k as f64 * f0 / fs;
                        if phase[k] > 2.0 * PI {
                            phase[k] -= 2.0 * PI;
                        }
                        v += t.harmonic_gain(k as f64 * f0, k) * phase[k].sin();
                        k += 1;
                    }
                    let w: f64 = StandardNormal.sample(rng);
                    out.push((v + t.breathiness * w) * envelope(i, len, attack, release));
                }
            }
        }
    }
    if let Some(cutoff) = t.condition.cutoff_hz {
        out = lowpass(&out, cutoff / fs);
    }
    let peak = out.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if peak > 0.0 {
        for v in &mut out {
            *v *= t.peak_gain / peak;
        }
    }
    if let Some(db) = t.condition.noise_dbfs {
        let sigma = 10f64.powf(db / 20.0);
        for v in &mut out {
            let w: f64 = StandardNormal.sample(rng);
            *v += sigma * w;
        }
    }
    out.into_iter().map(|v| v.clamp(-1.0, 1.0) as f32).collect()
}

/// Hamming-windowed sinc low-pass; `cutoff` in cycles per sample.
fn lowpass(x: &[f64], cutoff: f64) -> Vec<f64> {
    let half = 127i64;
    let taps: Vec<f64> = (-half..=half)
        .map(|n| {
            let n = n as f64;
            let s = if n == 0.0 { 2.0 * cutoff } else { (2.0 * PI * cutoff * n).sin() / (PI * n) };
            let w = 0.54 + 0.46 * (PI * n / half as f64).cos();
            s * w
        })
        .collect();
    (0..x.len() as i64)
        .map(|i| {
            taps.iter()
                .enumerate()
                .filter_map(|(j, h)| {
                    let k = i + j as i64 - half;
                    (k >= 0 && (k as usize) < x.len()).then(|| h * x[k as usize])
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audioio::{encode_wav_pcm16, read_manifest, read_wav};

    fn small() -> SynthCorpusConfig {
        SynthCorpusConfig::default()
    }

    #[test]
    fn twenty_entries_reproducible() {
        let (m1, c1) = generate_synthetic_corpus(&small(), 7).unwrap();
        let (m2, c2) = generate_synthetic_corpus(&small(), 7).unwrap();
        assert_eq!(m1.entries.len(), 20);
        assert_eq!(m1, m2);
        for (a, b) in c1.iter().zip(&c2) {
            assert_eq!(encode_wav_pcm16(&a.samples, 32000), encode_wav_pcm16(&b.samples, 32000));
        }
        assert_eq!(m1.speakers().len(), 5);
    }

    #[test]
    fn seeds_differ() {
        let (_, a) = generate_synthetic_corpus(&small(), 7).unwrap();
        let (_, b) = generate_synthetic_corpus(&small(), 8).unwrap();
        assert_ne!(a[0].samples, b[0].samples);
    }

    #[test]
    fn argument_errors() {
        let mut cfg = small();
        cfg.clips_per_speaker = 0;
        assert!(matches!(generate_synthetic_corpus(&cfg, 1), Err(NsvError::EmptyCorpus(_))));
        let mut cfg = small();
        cfg.min_duration_s = 2.0;
        cfg.max_duration_s = 1.0;
        assert!(matches!(generate_synthetic_corpus(&cfg, 1), Err(NsvError::InvalidArgument(_))));
    }

    #[test]
    fn clips_are_in_range_and_have_voiced_bursts() {
        let (m, clips) = generate_synthetic_corpus(&small(), 3).unwrap();
        for (e, c) in m.entries.iter().zip(&clips) {
            assert_eq!(c.sample_rate_hz, 32000);
            assert!(c.samples.iter().all(|v| v.is_finite() && v.abs() <= 1.0));
            assert!(e.duration_s >= 0.6 && e.duration_s <= 1.6, "{}", e.duration_s);
            // count runs of 10 ms blocks above -30 dBFS
            let voiced: Vec<bool> = c
                .samples
                .chunks(320)
                .map(|b| super::super::rms(b) > 10f64.powf(-30.0 / 20.0))
                .collect();
            let runs = voiced.windows(2).filter(|w| !w[0] && w[1]).count() + usize::from(voiced[0]);
            assert!(runs >= 2, "{} has {runs} loud segments", e.utterance_id);
        }
    }

    #[test]
    fn band_limited_condition_removes_highs() {
        let mut cfg = small();
        cfg.n_speakers = 2;
        cfg.clips_per_speaker = 1;
        cfg.conditions = vec![RecordingCondition { cutoff_hz: Some(4000.0), noise_dbfs: None }, RecordingCondition::default()];
        let (_, clips) = generate_synthetic_corpus(&cfg, 5).unwrap();
        let hf = |x: &[f32]| {
            // energy of the second difference is dominated by high frequencies
            let d: Vec<f32> = x.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect();
            super::super::rms(&d) / super::super::rms(x)
        };
        assert!(hf(&clips[0].samples) < 0.5 * hf(&clips[1].samples));
    }

    #[test]
    fn written_corpus_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let (m, clips) = generate_synthetic_corpus(&small(), 9).unwrap();
        let written = write_corpus(dir.path(), &m, &clips).unwrap();
        let back = read_manifest(&dir.path().join("manifest.tsv")).unwrap();
        assert_eq!(back.entries.len(), 20);
        let first = read_wav(&back.resolve(&back.entries[0])).unwrap();
        assert_eq!(first.samples.len(), clips[0].samples.len());
        assert_eq!(written.root, dir.path());
    }
}
