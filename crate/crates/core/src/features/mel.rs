use super::{FrameConfig, Spectrogram};
use crate::error::{NsvError, Result};

pub const N_MELS: usize = 256;
/// Magnitude floor applied before the logarithm.
pub const MEL_FLOOR: f64 = 1e-5;
/// `ln(MEL_FLOOR)`, the smallest value a log-mel entry can take.
pub const LOG_FLOOR: f64 = -11.512925464970229;

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters on the HTK mel scale with unit peak.
///
/// With 256 bands over 513 bins the lowest filters are narrower than one bin.
/// Each triangle's half-widths are therefore widened to at least one bin
/// spacing; a filter that would capture no bin degrades to linear
/// interpolation of the spectrum at its centre frequency.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub n_bins: usize,
    /// Dense weights, n_mels x n_bins row-major.
    pub weights: Vec<f64>,
    /// First and one-past-last nonzero bin per filter.
    spans: Vec<(usize, usize)>,
    pub center_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(cfg: &FrameConfig, n_mels: usize, f_lo: f64, f_hi: f64) -> Result<Self> {
        let n_bins = cfg.n_bins();
        if n_mels == 0 || n_mels > n_bins {
            return Err(NsvError::invalid(format!(
                "n_mels {n_mels} must be in 1..={n_bins} (number of FFT bins)"
            )));
        }
        let nyquist = cfg.sample_rate_hz as f64 / 2.0;
        if !(f_lo >= 0.0 && f_lo < f_hi && f_hi <= nyquist) {
            return Err(NsvError::invalid(format!("mel range [{f_lo}, {f_hi}] invalid")));
        }
        let bin_hz = cfg.sample_rate_hz as f64 / cfg.fft_size as f64;
        let (m_lo, m_hi) = (hz_to_mel(f_lo), hz_to_mel(f_hi));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let mut weights = vec![0.0; n_mels * n_bins];
        let mut spans = Vec::with_capacity(n_mels);
        for m in 0..n_mels {
            let c = edges[m + 1];
            let left = (c - edges[m]).max(bin_hz);
            let right = (edges[m + 2] - c).max(bin_hz);
            let row = &mut weights[m * n_bins..(m + 1) * n_bins];
            let mut span = (n_bins, 0);
            for (k, w) in row.iter_mut().enumerate() {
                let f = k as f64 * bin_hz;
                let v = if f <= c { 1.0 - (c - f) / left } else { 1.0 - (f - c) / right };
                if v > 0.0 {
                    *w = v;
                    span.0 = span.0.min(k);
                    span.1 = k + 1;
                }
            }
            spans.push(span);
        }
        Ok(Self {
            n_mels,
            n_bins,
            weights,
            spans,
            center_hz: edges[1..=n_mels].to_vec(),
        })
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    /// Applies the filters to one frame of magnitudes.
    pub fn apply(&self, mags: &[f64], out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate() {
            let (a, b) = self.spans[m];
            let row = self.row(m);
            *o = (a..b).map(|k| row[k] * mags[k]).sum();
        }
    }
}

/// Log-magnitude mel spectrogram, frames x n_mels row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub values: Vec<f64>,
    pub frames: usize,
    pub n_mels: usize,
    pub frame_config: FrameConfig,
}

impl MelSpectrogram {
    pub fn new(values: Vec<f64>, frames: usize, n_mels: usize, frame_config: FrameConfig) -> Result<Self> {
        if values.len() != frames * n_mels {
            return Err(NsvError::invalid(format!(
                "{} values for a {frames}x{n_mels} mel matrix",
                values.len()
            )));
        }
        Ok(Self {
            values,
            frames,
            n_mels,
            frame_config,
        })
    }

    /// A spectrogram at the log floor everywhere.
    pub fn silence(frames: usize, frame_config: FrameConfig) -> Self {
        Self {
            values: vec![LOG_FLOOR; frames * N_MELS],
            frames,
            n_mels: N_MELS,
            frame_config,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_mels..(i + 1) * self.n_mels]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_mels)
    }
}

pub fn log_mel(spec: &Spectrogram, n_mels: usize, f_lo: f64, f_hi: f64) -> Result<MelSpectrogram> {
    let fb = MelFilterbank::new(&spec.config, n_mels, f_lo, f_hi)?;
    let mut values = vec![0.0; spec.frames * n_mels];
    let mut mags = vec![0.0; spec.n_bins];
    for (f, out) in values.chunks_exact_mut(n_mels).enumerate() {
        for (m, c) in mags.iter_mut().zip(spec.frame(f)) {
            *m = c.norm();
        }
        fb.apply(&mags, out);
        for v in out.iter_mut() {
            *v = v.max(MEL_FLOOR).ln();
        }
    }
    MelSpectrogram::new(values, spec.frames, n_mels, spec.config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::stft;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn floor_constant() {
        assert!((LOG_FLOOR - MEL_FLOOR.ln()).abs() < 1e-15);
        assert!((mel_to_hz(hz_to_mel(1234.5)) - 1234.5).abs() < 1e-9);
    }

    #[test]
    fn every_filter_covers_a_bin() {
        let fb = MelFilterbank::new(&FrameConfig::default(), 256, 0.0, 16000.0).unwrap();
        for m in 0..256 {
            assert!(fb.row(m).iter().any(|&w| w > 0.0), "filter {m} empty");
        }
        assert!(MelFilterbank::new(&FrameConfig::default(), 600, 0.0, 16000.0).is_err());
    }

    #[test]
    fn zero_signal_hits_floor() {
        let cfg = FrameConfig::default();
        let mel = log_mel(&stft(&vec![0.0; 4000], &cfg).unwrap(), 256, 0.0, 16000.0).unwrap();
        assert_eq!(mel.n_mels, 256);
        assert_eq!(mel.frames, 13);
        assert!(mel.values.iter().all(|&v| v == LOG_FLOOR));
    }

    #[test]
    fn white_noise_is_above_floor() {
        let cfg = FrameConfig::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f32> = (0..3200)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                (0.1 * v) as f32
            })
            .collect();
        let mel = log_mel(&stft(&x, &cfg).unwrap(), 256, 0.0, 16000.0).unwrap();
        assert!(mel.values.iter().all(|v| v.is_finite() && *v > LOG_FLOOR));
    }

    #[test]
    fn doubling_amplitude_adds_ln2() {
        let cfg = FrameConfig::default();
        let x: Vec<f32> = (0..6400)
            .map(|i| (0.2 * (i as f64 * 0.05).sin() + 0.1 * (i as f64 * 0.61).cos()) as f32)
            .collect();
        let x2: Vec<f32> = x.iter().map(|v| v * 2.0).collect();
        let a = log_mel(&stft(&x, &cfg).unwrap(), 256, 0.0, 16000.0).unwrap();
        let b = log_mel(&stft(&x2, &cfg).unwrap(), 256, 0.0, 16000.0).unwrap();
        let mut checked = 0;
        for (va, vb) in a.values.iter().zip(&b.values) {
            if *va > LOG_FLOOR {
                assert!((vb - va - 2f64.ln()).abs() < 1e-6);
                checked += 1;
            }
        }
        assert!(checked > 1000);
    }
}
