use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{NsvError, Result};
use crate::features::MelSpectrogram;
use crate::io::{read_bytes, write_bytes, ByteReader};

pub const STATS_MAGIC: &[u8; 4] = b"FIDS";

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: Vec<f64>,
    /// dim x dim, row-major, symmetric.
    pub cov: Vec<f64>,
    pub n: u64,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || self.cov.len() != d * d {
            return Err(NsvError::invalid(format!(
                "stats of dimension {d} carry {} covariance entries",
                self.cov.len()
            )));
        }
        if self.mean.iter().chain(&self.cov).any(|v| !v.is_finite()) {
            return Err(NsvError::invalid("stats contain non-finite values"));
        }
        Ok(())
    }

    fn cov_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim(), self.dim(), &self.cov)
    }
}

/// Mean and unbiased, symmetrized covariance.
pub fn gaussian_stats<R: AsRef<[f64]>>(features: &[R]) -> Result<GaussianStats> {
    let n = features.len();
    if n < 2 {
        return Err(NsvError::InsufficientData { required: 2, available: n });
    }
    let d = features[0].as_ref().len();
    if d == 0 || features.iter().any(|f| f.as_ref().len() != d) {
        return Err(NsvError::invalid("feature vectors must share a nonzero dimension"));
    }
    let mut mean = vec![0.0; d];
    for f in features {
        for (m, v) in mean.iter_mut().zip(f.as_ref()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut centred = DMatrix::zeros(n, d);
    for (i, f) in features.iter().enumerate() {
        for (j, (v, m)) in f.as_ref().iter().zip(&mean).enumerate() {
            centred[(i, j)] = v - m;
        }
    }
    let c = centred.transpose() * &centred / (n - 1) as f64;
    let c = (&c + c.transpose()) * 0.5;
    let mut cov = Vec::with_capacity(d * d);
    for i in 0..d {
        cov.extend((0..d).map(|j| c[(i, j)]));
    }
    Ok(GaussianStats { mean, cov, n: n as u64 })
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Reference statistics with their matrix square root cached, for scoring
/// many sample sets against one reference.
#[derive(Debug, Clone)]
pub struct FidReference {
    pub stats: GaussianStats,
    sqrt_cov: DMatrix<f64>,
    trace: f64,
}

impl FidReference {
    pub fn new(stats: GaussianStats) -> Result<Self> {
        stats.validate()?;
        let c = stats.cov_matrix();
        let trace = c.trace();
        Ok(Self {
            sqrt_cov: sym_sqrt(&c),
            trace,
            stats,
        })
    }

    /// `|mu_r - mu_s|^2 + Tr(S_r) + Tr(S_s) - 2 Tr((S_r^1/2 S_s S_r^1/2)^1/2)`, clamped at 0.
    pub fn fid(&self, other: &GaussianStats) -> Result<f64> {
        other.validate()?;
        if other.dim() != self.stats.dim() {
            return Err(NsvError::invalid(format!(
                "dimension mismatch: {} vs {}",
                self.stats.dim(),
                other.dim()
            )));
        }
        let mu = DVector::from_column_slice(&self.stats.mean) - DVector::from_column_slice(&other.mean);
        let cs = other.cov_matrix();
        let inner = &self.sqrt_cov * &cs * &self.sqrt_cov;
        let inner = (&inner + inner.transpose()) * 0.5;
        let cross: f64 = SymmetricEigen::new(inner)
            .eigenvalues
            .iter()
            .map(|&v| v.max(0.0).sqrt())
            .sum();
        let d = mu.norm_squared() + self.trace + cs.trace() - 2.0 * cross;
        Ok(d.max(0.0))
    }
}

pub fn fid(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    FidReference::new(a.clone())?.fid(b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedFid {
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n - 1); 0 when undefined.
    pub std: f64,
    /// False when a single repeat leaves the deviation undefined.
    pub std_defined: bool,
    pub n_per_eval: usize,
}

/// FID of `repeats` independent draws of `n_per_eval` features against the
/// reference. Draw `r` gets its own RNG stream derived from `seed`.
pub fn repeated_fid<F>(
    mut source: F,
    reference: &FidReference,
    n_per_eval: usize,
    repeats: usize,
    seed: u64,
) -> Result<RepeatedFid>
where
    F: FnMut(usize, usize, &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>>,
{
    if repeats == 0 {
        return Err(NsvError::invalid("repeats must be positive"));
    }
    let mut values = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let feats = source(r, n_per_eval, &mut rng)?;
        if feats.len() < n_per_eval {
            return Err(NsvError::InsufficientData {
                required: n_per_eval,
                available: feats.len(),
            });
        }
        values.push(reference.fid(&gaussian_stats(&feats[..n_per_eval])?)?);
    }
    let mean = values.iter().sum::<f64>() / repeats as f64;
    let (std, std_defined) = if repeats > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (repeats - 1) as f64;
        (var.sqrt(), true)
    } else {
        (0.0, false)
    };
    Ok(RepeatedFid {
        values,
        mean,
        std,
        std_defined,
        n_per_eval,
    })
}

/// A source drawing without replacement from a fixed pool.
pub fn pool_source(pool: &[Vec<f64>]) -> impl FnMut(usize, usize, &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> + '_ {
    move |_, n, rng| {
        if pool.len() < n {
            return Err(NsvError::InsufficientData {
                required: n,
                available: pool.len(),
            });
        }
        Ok(sample(rng, pool.len(), n).into_iter().map(|i| pool[i].clone()).collect())
    }
}

/// Time mean followed by time standard deviation (population) of each band.
pub fn utterance_feature(mel: &MelSpectrogram) -> Result<Vec<f64>> {
    if mel.frames == 0 {
        return Err(NsvError::EmptyClip("mel with no frames".into()));
    }
    let d = mel.n_mels;
    let t = mel.frames as f64;
    let mut mean = vec![0.0; d];
    for row in mel.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / t;
        }
    }
    let mut var = vec![0.0; d];
    for row in mel.rows() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m).powi(2) / t;
        }
    }
    mean.extend(var.into_iter().map(f64::sqrt));
    Ok(mean)
}

pub fn encode_stats(stats: &GaussianStats) -> Result<Vec<u8>> {
    stats.validate()?;
    let mut out = Vec::with_capacity(16 + 8 * (stats.mean.len() + stats.cov.len()));
    out.extend_from_slice(STATS_MAGIC);
    out.extend_from_slice(&(stats.dim() as u32).to_le_bytes());
    for v in stats.mean.iter().chain(&stats.cov) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&stats.n.to_le_bytes());
    Ok(out)
}

pub fn decode_stats(bytes: &[u8]) -> Result<GaussianStats> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(STATS_MAGIC)?;
    let d = r.u32()? as usize;
    let need = (d + d * d) * 8 + 8;
    if need != r.remaining() {
        return Err(NsvError::Decode {
            offset: r.offset() as u64,
            message: format!("dimension {d} needs {need} bytes, {} present", r.remaining()),
        });
    }
    let mean = (0..d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let cov = (0..d * d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let n = r.u64()?;
    r.finish()?;
    let stats = GaussianStats { mean, cov, n };
    stats.validate()?;
    Ok(stats)
}

pub fn write_stats(path: &Path, stats: &GaussianStats) -> Result<()> {
    write_bytes(path, &encode_stats(stats)?)
}

pub fn read_stats(path: &Path) -> Result<GaussianStats> {
    decode_stats(&read_bytes(path)?)
}
