//! Harmonic-plus-noise vocoder: an oscillator bank on the pitch contour plus
//! noise shaped by the mel envelope, both driven from the same log-mel frames.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audioio::AudioClip;
use crate::error::{NsvError, Result};
use crate::features::{hann, FrameConfig, MelFilterbank, MelSpectrogram, PitchContour};

/// Output peak after normalization; quieter output is left untouched.
pub const PEAK_LIMIT: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct HnmConfig {
    pub frame: FrameConfig,
    pub max_harmonics: usize,
    pub harmonic_gain: f64,
    pub noise_gain: f64,
    /// Noise attenuation in voiced frames, in dB (negative attenuates).
    pub voiced_noise_db: f64,
    /// Linear fade length at voicing boundaries.
    pub fade_ms: f64,
}

impl Default for HnmConfig {
    fn default() -> Self {
        Self {
            frame: FrameConfig::default(),
            max_harmonics: 60,
            harmonic_gain: 1.0,
            noise_gain: 1.0,
            voiced_noise_db: -12.0,
            fade_ms: 5.0,
        }
    }
}

impl HnmConfig {
    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        if self.max_harmonics == 0 {
            return Err(NsvError::invalid("max_harmonics must be positive"));
        }
        for (name, v) in [
            ("harmonic_gain", self.harmonic_gain),
            ("noise_gain", self.noise_gain),
            ("fade_ms", self.fade_ms),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(NsvError::invalid(format!("{name} must be finite and nonnegative")));
            }
        }
        if !self.voiced_noise_db.is_finite() {
            return Err(NsvError::invalid("voiced_noise_db must be finite"));
        }
        Ok(())
    }

    fn fade_samples(&self) -> usize {
        (self.fade_ms * 1e-3 * self.frame.sample_rate_hz as f64).round() as usize
    }
}

/// Vocoder with its mel-inversion matrix precomputed.
#[derive(Debug, Clone)]
pub struct Vocoder {
    pub config: HnmConfig,
    n_mels: usize,
    n_bins: usize,
    /// Pseudo-inverse of the filterbank, n_bins x n_mels row-major.
    pinv: Vec<f64>,
    window: Vec<f64>,
}

impl Vocoder {
    pub fn new(config: HnmConfig, n_mels: usize) -> Result<Self> {
        config.validate()?;
        let f = &config.frame;
        let fb = MelFilterbank::new(f, n_mels, 0.0, f.sample_rate_hz as f64 / 2.0)?;
        let w = DMatrix::from_row_slice(n_mels, fb.n_bins, &fb.weights);
        let pinv = w
            .pseudo_inverse(1e-9)
            .map_err(|e| NsvError::invalid(format!("mel filterbank inversion failed: {e}")))?;
        let mut flat = Vec::with_capacity(fb.n_bins * n_mels);
        for r in 0..fb.n_bins {
            flat.extend((0..n_mels).map(|c| pinv[(r, c)]));
        }
        Ok(Self {
            n_mels,
            n_bins: fb.n_bins,
            pinv: flat,
            window: hann(f.win_samples),
            config,
        })
    }

    fn check(&self, mel: &MelSpectrogram, pitch: &PitchContour) -> Result<()> {
        if mel.frames != pitch.len() {
            return Err(NsvError::invalid(format!(
                "mel has {} frames but pitch has {}",
                mel.frames,
                pitch.len()
            )));
        }
        if mel.n_mels != self.n_mels {
            return Err(NsvError::invalid(format!(
                "mel has {} bands, vocoder expects {}",
                mel.n_mels, self.n_mels
            )));
        }
        if mel.values.iter().any(|v| !v.is_finite()) || pitch.f0_hz.iter().any(|v| !v.is_finite()) {
            return Err(NsvError::invalid("non-finite mel or pitch values"));
        }
        Ok(())
    }

    /// Linear-frequency magnitude envelope of one log-mel frame.
    pub fn envelope(&self, log_mel: &[f64]) -> Vec<f64> {
        let mags: Vec<f64> = log_mel.iter().map(|v| v.exp()).collect();
        self.pinv
            .chunks_exact(self.n_mels)
            .map(|row| row.iter().zip(&mags).map(|(a, b)| a * b).sum::<f64>().max(0.0))
            .collect()
    }

    fn envelopes(&self, mel: &MelSpectrogram) -> Vec<Vec<f64>> {
        mel.rows().map(|r| self.envelope(r)).collect()
    }

    /// One-sided STFT power of a unit-amplitude sinusoid under the analysis window.
    fn sinusoid_power(&self) -> f64 {
        let sum_sq: f64 = self.window.iter().map(|w| w * w).sum();
        self.config.frame.fft_size as f64 * sum_sq / 4.0
    }

    pub fn harmonic_component(&self, mel: &MelSpectrogram, pitch: &PitchContour) -> Result<Vec<f64>> {
        self.check(mel, pitch)?;
        Ok(self.harmonics(&self.envelopes(mel), pitch))
    }

    pub fn noise_component(&self, mel: &MelSpectrogram, pitch: &PitchContour, seed: u64) -> Result<Vec<f64>> {
        self.check(mel, pitch)?;
        Ok(self.noise(&self.envelopes(mel), pitch, seed))
    }

    /// Harmonic plus noise, peak-limited to [`PEAK_LIMIT`].
    pub fn synthesize(&self, mel: &MelSpectrogram, pitch: &PitchContour, seed: u64, utterance_id: &str) -> Result<AudioClip> {
        self.check(mel, pitch)?;
        if mel.frames == 0 {
            return Err(NsvError::EmptyClip(utterance_id.to_string()));
        }
        let env = self.envelopes(mel);
        let h = self.harmonics(&env, pitch);
        let n = self.noise(&env, pitch, seed);
        let mut out: Vec<f64> = h.iter().zip(&n).map(|(a, b)| a + b).collect();
        let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > PEAK_LIMIT {
            let g = PEAK_LIMIT / peak;
            out.iter_mut().for_each(|v| *v *= g);
        }
        let samples = out.iter().map(|&v| v as f32).collect();
        let mut clip = AudioClip::new(samples, self.config.frame.sample_rate_hz);
        clip.utterance_id = utterance_id.to_string();
        Ok(clip)
    }

    fn harmonics(&self, env: &[Vec<f64>], pitch: &PitchContour) -> Vec<f64> {
        let cfg = &self.config;
        let hop = cfg.frame.hop_samples;
        let fs = cfg.frame.sample_rate_hz as f64;
        let nyquist = fs / 2.0;
        let frames = env.len();
        let len = frames * hop;
        let mut out = vec![0.0; len];
        if !pitch.voiced.iter().any(|&v| v) {
            return out;
        }
        let bin_hz = fs / cfg.frame.fft_size as f64;
        let power_unit = self.sinusoid_power();

        // f0 per frame with unvoiced gaps bridged by the nearest voiced value,
        // so the oscillator never jumps while a fade is in progress.
        let mut f0 = vec![0.0; frames];
        let mut last = None;
        for f in 0..frames {
            if pitch.voiced[f] && pitch.f0_hz[f] > 0.0 {
                last = Some(pitch.f0_hz[f]);
            }
            f0[f] = last.unwrap_or(0.0);
        }
        let first = f0.iter().copied().find(|&v| v > 0.0).unwrap_or(0.0);
        for v in f0.iter_mut().take_while(|v| **v == 0.0) {
            *v = first;
        }

        // Harmonic amplitudes at frame centres: band power around k*f0 divided
        // by the power a unit sinusoid leaves in the spectrum.
        let amps: Vec<Vec<f64>> = (0..frames)
            .map(|f| {
                let base = f0[f];
                let e = &env[f];
                (1..=cfg.max_harmonics)
                    .map(|k| {
                        let fk = k as f64 * base;
                        if fk >= nyquist {
                            return 0.0;
                        }
                        let lo = ((fk - base / 2.0) / bin_hz).ceil().max(0.0) as usize;
                        let hi = (((fk + base / 2.0) / bin_hz).floor() as usize).min(self.n_bins - 1);
                        let band_power = if hi >= lo {
                            (lo..=hi).map(|b| e[b] * e[b]).sum::<f64>()
                        } else {
                            let m = e[((fk / bin_hz).round() as usize).min(self.n_bins - 1)];
                            m * m * base / bin_hz
                        };
                        cfg.harmonic_gain * (band_power / power_unit).sqrt()
                    })
                    .collect()
            })
            .collect();

        let fade = cfg.fade_samples().max(1);
        let step = 1.0 / fade as f64;
        let mut gain: f64 = 0.0;
        let mut phase: f64 = 0.0;
        for (n, o) in out.iter_mut().enumerate() {
            let pos = n as f64 / hop as f64;
            let f_a = (pos.floor() as usize).min(frames - 1);
            let f_b = (f_a + 1).min(frames - 1);
            let frac = pos - f_a as f64;
            let nearest = (pos.round() as usize).min(frames - 1);
            let target = if pitch.voiced[nearest] { 1.0 } else { 0.0 };
            gain = if target > gain { (gain + step).min(target) } else { (gain - step).max(target) };

            let freq = f0[f_a] + (f0[f_b] - f0[f_a]) * frac;
            if gain > 0.0 && freq > 0.0 {
                let mut s = 0.0;
                for k in 1..=cfg.max_harmonics {
                    if k as f64 * freq >= nyquist {
                        break;
                    }
                    let a = amps[f_a][k - 1] + (amps[f_b][k - 1] - amps[f_a][k - 1]) * frac;
                    s += a * (k as f64 * phase).sin();
                }
                *o = gain * s;
            }
            phase = (phase + 2.0 * PI * freq / fs) % (2.0 * PI);
        }
        out
    }

    fn noise(&self, env: &[Vec<f64>], pitch: &PitchContour, seed: u64) -> Vec<f64> {
        let cfg = &self.config;
        let hop = cfg.frame.hop_samples;
        let win = cfg.frame.win_samples;
        let n_fft = cfg.frame.fft_size;
        let frames = env.len();
        let len = frames * hop;
        let half = win / 2;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // One continuous white stream, padded so every frame has a full window.
        let white: Vec<f64> = (0..len + win).map(|_| StandardNormal.sample(&mut rng)).collect();
        let sum_sq: f64 = self.window.iter().map(|w| w * w).sum();
        let voiced_gain = 10f64.powf(cfg.voiced_noise_db / 20.0);

        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n_fft);
        let inv = planner.plan_fft_inverse(n_fft);
        let mut acc = vec![0.0; len + win];
        let mut norm = vec![0.0; len + win];
        let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
        for f in 0..frames {
            // Frame f is centred on sample f * hop, i.e. index f * hop + half in `acc`.
            let start = f * hop;
            for (i, b) in buf.iter_mut().enumerate() {
                *b = if i < win {
                    Complex::new(white[start + i] * self.window[i], 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                };
            }
            fwd.process(&mut buf);
            let g = cfg.noise_gain * if pitch.voiced[f] { voiced_gain } else { 1.0 } / sum_sq.sqrt();
            for k in 0..n_fft {
                let bin = if k <= n_fft / 2 { k } else { n_fft - k };
                buf[k] *= g * env[f][bin];
            }
            inv.process(&mut buf);
            for i in 0..win {
                let w = self.window[i];
                acc[start + i] += buf[i].re / n_fft as f64 * w;
                norm[start + i] += w * w;
            }
        }
        (0..len)
            .map(|n| {
                let d = norm[n + half];
                if d > 1e-8 {
                    acc[n + half] / d
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// One-shot synthesis with a freshly built [`Vocoder`].
pub fn synthesize_hnm(mel: &MelSpectrogram, pitch: &PitchContour, cfg: &HnmConfig, seed: u64) -> Result<AudioClip> {
    Vocoder::new(cfg.clone(), mel.n_mels)?.synthesize(mel, pitch, seed, "hnm")
}
