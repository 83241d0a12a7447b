//! Audio clips, WAV files, resampling, corpus manifests and pruning, and the
//! synthetic vocalization corpus generator.

mod corpus;
mod resample;
mod synth;
mod wav;

use std::fmt;
use std::str::FromStr;

pub use corpus::{
    clip_rms_dbfs, load_clip, prune_corpus, prune_entries, read_manifest, write_manifest, CorpusManifest,
    ManifestEntry, PruneConfig, PruneReason,
};
pub use resample::resample;
pub use synth::{generate_synthetic_corpus, write_corpus, RecordingCondition, SpeakerTimbre, SynthCorpusConfig};
pub use wav::{decode_wav, encode_wav_pcm16, read_wav, write_wav};

use crate::error::{NsvError, Result};

/// Sample rate every pipeline stage after ingestion works at.
pub const PIPELINE_RATE: u32 = 32_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Emotion {
    Amusement,
    Awe,
    Awkwardness,
    Distress,
    Excitement,
    Fear,
    Horror,
    Sadness,
    Surprise,
    Triumph,
    Synthetic,
}

impl Emotion {
    pub const ALL: [Emotion; 11] = [
        Emotion::Amusement,
        Emotion::Awe,
        Emotion::Awkwardness,
        Emotion::Distress,
        Emotion::Excitement,
        Emotion::Fear,
        Emotion::Horror,
        Emotion::Sadness,
        Emotion::Surprise,
        Emotion::Triumph,
        Emotion::Synthetic,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Emotion::Amusement => "Amusement",
            Emotion::Awe => "Awe",
            Emotion::Awkwardness => "Awkwardness",
            Emotion::Distress => "Distress",
            Emotion::Excitement => "Excitement",
            Emotion::Fear => "Fear",
            Emotion::Horror => "Horror",
            Emotion::Sadness => "Sadness",
            Emotion::Surprise => "Surprise",
            Emotion::Triumph => "Triumph",
            Emotion::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Emotion {
    type Err = NsvError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("awkward") {
            return Ok(Emotion::Awkwardness);
        }
        Emotion::ALL
            .iter()
            .find(|e| e.as_str().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| NsvError::invalid(format!("unknown emotion label {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate_hz: u32,
    pub utterance_id: String,
    pub speaker_id: String,
    pub emotion: Emotion,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Self {
        Self {
            samples,
            sample_rate_hz,
            utterance_id: String::new(),
            speaker_id: String::new(),
            emotion: Emotion::Synthetic,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }
}

pub fn rms(samples: &[f32]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>() / samples.len() as f64).sqrt()
}

/// RMS level in dBFS (full-scale sine reference of 1.0 amplitude RMS). Silence maps to -inf.
pub fn to_dbfs(rms: f64) -> f64 {
    20.0 * rms.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emotion_labels() {
        assert_eq!("triumph".parse::<Emotion>().unwrap(), Emotion::Triumph);
        assert_eq!("Awkward".parse::<Emotion>().unwrap(), Emotion::Awkwardness);
        assert_eq!("synthetic".parse::<Emotion>().unwrap(), Emotion::Synthetic);
        assert!("joy".parse::<Emotion>().is_err());
        for e in Emotion::ALL {
            assert_eq!(e.to_string().parse::<Emotion>().unwrap(), e);
        }
    }

    #[test]
    fn dbfs() {
        assert!((to_dbfs(0.01) + 40.0).abs() < 1e-9);
        assert_eq!(to_dbfs(0.0), f64::NEG_INFINITY);
    }
}
