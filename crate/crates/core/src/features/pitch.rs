use super::{reflect, FrameConfig};
use crate::error::{NsvError, Result};

pub const F0_MIN_HZ: f64 = 60.0;
pub const F0_MAX_HZ: f64 = 600.0;
/// Scaled pitch below this value is decoded as unvoiced.
pub const VOICING_THRESHOLD: f64 = 0.05;

const YIN_THRESHOLD: f64 = 0.15;
/// Frames with mean power below this are treated as silence.
const SILENCE_POWER: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PitchContour {
    /// Per-frame f0 in Hz, 0 where unvoiced.
    pub f0_hz: Vec<f64>,
    pub voiced: Vec<bool>,
    pub frame_config: FrameConfig,
}

impl PitchContour {
    /// Builds a contour from raw f0 values, voicing wherever f0 > 0.
    pub fn from_f0(f0_hz: Vec<f64>, frame_config: FrameConfig) -> Self {
        let voiced = f0_hz.iter().map(|&f| f > 0.0).collect();
        Self {
            f0_hz,
            voiced,
            frame_config,
        }
    }

    pub fn unvoiced(frames: usize, frame_config: FrameConfig) -> Self {
        Self::from_f0(vec![0.0; frames], frame_config)
    }

    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }
}

/// YIN pitch tracker: cumulative-mean-normalized difference with an absolute
/// threshold of 0.15 and parabolic refinement. One estimate per STFT frame.
pub fn estimate_pitch(samples: &[f32], cfg: &FrameConfig, f_min: f64, f_max: f64) -> PitchContour {
    let n = samples.len();
    let frames = cfg.n_frames(n);
    let fs = cfg.sample_rate_hz as f64;
    let tau_max = (fs / f_min).ceil() as usize + 1;
    let tau_min = ((fs / f_max).floor() as usize).max(2);
    let w = cfg.win_samples;
    let mut f0 = vec![0.0; frames];
    if n < 2 || tau_min + 1 >= tau_max {
        return PitchContour::from_f0(f0, *cfg);
    }
    let span = w + tau_max;
    let mut buf = vec![0.0f64; span];
    let mut diff = vec![0.0f64; tau_max + 1];
    let mut cmnd = vec![1.0f64; tau_max + 1];
    for (f, out) in f0.iter_mut().enumerate() {
        let start = (f * cfg.hop_samples) as i64 - (span / 2) as i64;
        for (j, b) in buf.iter_mut().enumerate() {
            *b = samples[reflect(start + j as i64, n)] as f64;
        }
        let power = buf[..w].iter().map(|v| v * v).sum::<f64>() / w as f64;
        if power < SILENCE_POWER {
            continue;
        }
        for tau in 1..=tau_max {
            let mut acc = 0.0;
            for j in 0..w {
                let d = buf[j] - buf[j + tau];
                acc += d * d;
            }
            diff[tau] = acc;
        }
        let mut running = 0.0;
        for tau in 1..=tau_max {
            running += diff[tau];
            cmnd[tau] = if running > 0.0 { diff[tau] * tau as f64 / running } else { 1.0 };
        }
        let mut tau = tau_min;
        let mut found = None;
        while tau < tau_max {
            if cmnd[tau] < YIN_THRESHOLD {
                while tau + 1 < tau_max && cmnd[tau + 1] < cmnd[tau] {
                    tau += 1;
                }
                found = Some(tau);
                break;
            }
            tau += 1;
        }
        let Some(t) = found else { continue };
        let (a, b, c) = (cmnd[t - 1], cmnd[t], cmnd[t + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom.abs() > 1e-12 { 0.5 * (a - c) / denom } else { 0.0 };
        let period = t as f64 + shift.clamp(-1.0, 1.0);
        let hz = fs / period;
        if (f_min..=f_max).contains(&hz) {
            *out = hz;
        }
    }
    PitchContour::from_f0(f0, *cfg)
}

fn check_range(f_min: f64, f_max: f64) -> Result<()> {
    if !(f_min < f_max) || !f_min.is_finite() || !f_max.is_finite() {
        return Err(NsvError::invalid(format!("pitch range [{f_min}, {f_max}] is inverted or empty")));
    }
    Ok(())
}

/// Voiced f0 mapped linearly onto [0, 1] (clamped); unvoiced frames map to 0.
pub fn scale_pitch(contour: &PitchContour, f_min: f64, f_max: f64) -> Result<Vec<f64>> {
    check_range(f_min, f_max)?;
    Ok(contour
        .f0_hz
        .iter()
        .zip(&contour.voiced)
        .map(|(&f, &v)| if v { ((f - f_min) / (f_max - f_min)).clamp(0.0, 1.0) } else { 0.0 })
        .collect())
}

/// Inverse of [`scale_pitch`]; values below `voicing_threshold` become unvoiced.
pub fn unscale_pitch(
    scaled: &[f64],
    f_min: f64,
    f_max: f64,
    voicing_threshold: f64,
    frame_config: FrameConfig,
) -> Result<PitchContour> {
    check_range(f_min, f_max)?;
    let f0 = scaled
        .iter()
        .map(|&s| if s < voicing_threshold { 0.0 } else { f_min + s * (f_max - f_min) })
        .collect();
    Ok(PitchContour::from_f0(f0, frame_config))
}
