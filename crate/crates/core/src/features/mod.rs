//! Frame-level analysis at 10 ms hop / 25 ms window: STFT, 256-band log-mel,
//! YIN pitch, and the [0, 1] pitch scaling used by the acoustic model.

mod formats;
mod mel;
mod pitch;
mod stft;

pub use formats::{
    decode_mel, decode_pitch, encode_mel, encode_pitch, read_mel, read_pitch, write_mel, write_pitch,
};
pub use mel::{hz_to_mel, log_mel, mel_to_hz, MelFilterbank, MelSpectrogram, LOG_FLOOR, MEL_FLOOR, N_MELS};
pub use pitch::{
    estimate_pitch, scale_pitch, unscale_pitch, PitchContour, F0_MAX_HZ, F0_MIN_HZ, VOICING_THRESHOLD,
};
pub use stft::{hann, stft, Spectrogram};

use crate::audioio::AudioClip;
use crate::error::{NsvError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameConfig {
    pub sample_rate_hz: u32,
    pub hop_samples: usize,
    pub win_samples: usize,
    pub fft_size: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 32_000,
            hop_samples: 320,
            win_samples: 800,
            fft_size: 1024,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop_samples == 0 || self.hop_samples > self.win_samples || self.win_samples > self.fft_size {
            return Err(NsvError::invalid(format!(
                "need 0 < hop ({}) <= win ({}) <= fft ({})",
                self.hop_samples, self.win_samples, self.fft_size
            )));
        }
        if self.hop_samples * 100 != self.sample_rate_hz as usize {
            return Err(NsvError::invalid(format!(
                "hop of {} samples is not 10 ms at {} Hz",
                self.hop_samples, self.sample_rate_hz
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frames produced for a signal of `n` samples under center padding.
    pub fn n_frames(&self, n: usize) -> usize {
        n.div_ceil(self.hop_samples)
    }

    pub fn frame_rate_hz(&self) -> u32 {
        self.sample_rate_hz / self.hop_samples as u32
    }
}

/// Mel spectrogram and pitch contour of one clip, frame aligned.
pub fn analyze(clip: &AudioClip, cfg: &FrameConfig) -> Result<(MelSpectrogram, PitchContour)> {
    if clip.sample_rate_hz != cfg.sample_rate_hz {
        return Err(NsvError::invalid(format!(
            "clip {} is at {} Hz, analysis expects {} Hz",
            clip.utterance_id, clip.sample_rate_hz, cfg.sample_rate_hz
        )));
    }
    let spec = stft(&clip.samples, cfg)?;
    let mel = log_mel(&spec, N_MELS, 0.0, cfg.sample_rate_hz as f64 / 2.0)?;
    let pitch = estimate_pitch(&clip.samples, cfg, F0_MIN_HZ, F0_MAX_HZ);
    Ok((mel, pitch))
}

/// Reflect an index into `[0, n)` (numpy "reflect" mode, without edge repeat).
pub(crate) fn reflect(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let mut j = i.rem_euclid(period);
    if j >= n as i64 {
        j = period - j;
    }
    j as usize
}
