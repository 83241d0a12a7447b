//! Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel.

use super::AudioClip;
use crate::error::{NsvError, Result};

/// Stopband attenuation the kernel is designed for, in dB.
const STOPBAND_DB: f64 = 90.0;
/// Passband edge as a fraction of the lower Nyquist frequency; the stopband starts at Nyquist.
const PASSBAND_FRACTION: f64 = 0.9;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

struct Kernel {
    /// Cutoff in cycles per input sample.
    cutoff: f64,
    half_width: f64,
    beta: f64,
    i0_beta: f64,
}

impl Kernel {
    fn design(src: u32, dst: u32) -> Self {
        let nyq_ratio = (dst as f64 / src as f64).min(1.0) * 0.5;
        let pass = PASSBAND_FRACTION * nyq_ratio;
        let stop = nyq_ratio;
        let transition = 2.0 * std::f64::consts::PI * (stop - pass);
        // Kaiser's design formulas.
        let taps = (STOPBAND_DB - 7.95) / (2.285 * transition);
        let beta = 0.1102 * (STOPBAND_DB - 8.7);
        Self {
            cutoff: 0.5 * (pass + stop),
            half_width: (taps / 2.0).ceil(),
            beta,
            i0_beta: bessel_i0(beta),
        }
    }

    fn eval(&self, tau: f64) -> f64 {
        let r = tau / self.half_width;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let w = bessel_i0(self.beta * (1.0 - r * r).sqrt()) / self.i0_beta;
        2.0 * self.cutoff * sinc(2.0 * self.cutoff * tau) * w
    }
}

/// Resamples a clip to `target_rate_hz`. Output length is
/// `round(len * target / source)`; equal rates return the samples unchanged.
pub fn resample(clip: &AudioClip, target_rate_hz: u32) -> Result<AudioClip> {
    let src = clip.sample_rate_hz;
    if src == 0 || target_rate_hz == 0 {
        return Err(NsvError::invalid(format!(
            "sample rates must be positive (source {src}, target {target_rate_hz})"
        )));
    }
    if src == target_rate_hz {
        return Ok(clip.clone());
    }
    let g = gcd(src as u64, target_rate_hz as u64);
    let up = target_rate_hz as u64 / g;
    let down = src as u64 / g;
    let n = clip.samples.len() as u64;
    let out_len = ((n * target_rate_hz as u64 + src as u64 / 2) / src as u64) as usize;

    let kernel = Kernel::design(src, target_rate_hz);
    let hw = kernel.half_width as i64;
    // One tap table per output phase: output m sits at input time m*down/up,
    // whose fractional part takes `up` distinct values.
    let taps_per_phase = (2 * hw) as usize;
    let phases: Vec<Vec<f64>> = (0..up)
        .map(|p| {
            let frac = p as f64 / up as f64;
            (0..taps_per_phase)
                .map(|j| {
                    let k = j as i64 - hw + 1;
                    kernel.eval(frac - k as f64)
                })
                .collect()
        })
        .collect();

    let x = &clip.samples;
    let mut out = Vec::with_capacity(out_len);
    for m in 0..out_len as u64 {
        let pos = m * down;
        let base = (pos / up) as i64;
        let taps = &phases[(pos % up) as usize];
        let mut acc = 0.0f64;
        for (j, &h) in taps.iter().enumerate() {
            let k = base + j as i64 - hw + 1;
            if k >= 0 && (k as usize) < x.len() {
                acc += h * x[k as usize] as f64;
            }
        }
        out.push(acc.clamp(-1.0, 1.0) as f32);
    }
    Ok(AudioClip {
        samples: out,
        sample_rate_hz: target_rate_hz,
        ..clip.clone()
    })
}
