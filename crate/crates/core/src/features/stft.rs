use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{reflect, FrameConfig};
use crate::error::{NsvError, Result};

/// Complex STFT, frames x (fft_size / 2 + 1), row-major.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub bins: Vec<Complex<f64>>,
    pub frames: usize,
    pub n_bins: usize,
    pub config: FrameConfig,
}

impl Spectrogram {
    pub fn frame(&self, i: usize) -> &[Complex<f64>] {
        &self.bins[i * self.n_bins..(i + 1) * self.n_bins]
    }

    pub fn magnitudes(&self, i: usize) -> Vec<f64> {
        self.frame(i).iter().map(|c| c.norm()).collect()
    }
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / len as f64).cos())
        .collect()
}

/// Frame `i` is centred on sample `i * hop`; the signal is reflect-padded at both ends.
pub fn stft(samples: &[f32], cfg: &FrameConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(NsvError::invalid("stft of an empty signal"));
    }
    let n = samples.len();
    let frames = cfg.n_frames(n);
    let n_bins = cfg.n_bins();
    let window = hann(cfg.win_samples);
    let fft = FftPlanner::new().plan_fft_forward(cfg.fft_size);
    let half = (cfg.win_samples / 2) as i64;
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    let mut bins = Vec::with_capacity(frames * n_bins);
    for f in 0..frames {
        let start = (f * cfg.hop_samples) as i64 - half;
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (j, w) in window.iter().enumerate() {
            let s = samples[reflect(start + j as i64, n)] as f64;
            buf[j] = Complex::new(s * w, 0.0);
        }
        fft.process(&mut buf);
        bins.extend_from_slice(&buf[..n_bins]);
    }
    Ok(Spectrogram {
        bins,
        frames,
        n_bins,
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count_and_zeros() {
        let cfg = FrameConfig::default();
        let s = stft(&vec![0.0; 32000], &cfg).unwrap();
        assert_eq!(s.frames, 100);
        assert_eq!(s.n_bins, 513);
        assert!(s.bins.iter().all(|c| c.norm() == 0.0));
        assert_eq!(stft(&[0.5], &cfg).unwrap().frames, 1);
        assert!(stft(&[], &cfg).is_err());
    }

    #[test]
    fn sinusoid_peaks_at_closed_form_bin() {
        let cfg = FrameConfig::default();
        let x: Vec<f32> = (0..32000)
            .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 32000.0).sin() as f32)
            .collect();
        let s = stft(&x, &cfg).unwrap();
        let expected = (1000.0f64 * 1024.0 / 32000.0).round() as usize;
        assert_eq!(expected, 32);
        // Edge frames see the reflected (phase-flipped) padding.
        for f in 1..s.frames - 1 {
            let mags = s.magnitudes(f);
            let arg = (0..mags.len()).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).unwrap();
            assert_eq!(arg, expected, "frame {f}");
        }
    }
}
