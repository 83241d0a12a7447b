//! Frame features to discrete unit indices: K-means codebooks and the
//! Units TSV interchange format.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{NsvError, Result};
use crate::io::{read_bytes, read_text, write_bytes, ByteReader};

/// Size of the unit alphabet.
pub const N_UNITS: usize = 100;

const MAX_LLOYD_ITERS: usize = 300;
const REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitSequence {
    pub indices: Vec<u16>,
    pub frame_rate_hz: u32,
    pub utterance_id: String,
}

/// K centroids of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub centroids: Vec<f64>,
    pub k: usize,
    pub dim: usize,
    pub frame_rate_hz: u32,
}

impl Codebook {
    pub fn centroid(&self, i: usize) -> &[f64] {
        &self.centroids[i * self.dim..(i + 1) * self.dim]
    }

    /// Index of the nearest centroid; ties go to the lowest index.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.centroids.chunks_exact(self.dim).enumerate() {
            let d = sq_dist(x, c);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(16 + self.centroids.len() * 8);
        out.extend_from_slice(b"CDBK");
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&self.frame_rate_hz.to_le_bytes());
        for v in &self.centroids {
            out.extend_from_slice(&v.to_le_bytes());
        }
        write_bytes(path, &out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_bytes(path)?;
        let mut r = ByteReader::new(&bytes);
        r.expect_magic(b"CDBK")?;
        let k = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let frame_rate_hz = r.u32()?;
        let centroids = (0..k * dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Ok(Self {
            centroids,
            k,
            dim,
            frame_rate_hz,
        })
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Trains a codebook with k-means++ seeding and Lloyd iterations.
pub fn train_kmeans<R: AsRef<[f64]>>(features: &[R], k: usize, frame_rate_hz: u32, seed: u64) -> Result<Codebook> {
    fit_kmeans(features, k, frame_rate_hz, seed).map(|(cb, _)| cb)
}

/// Like [`train_kmeans`] but also returns the inertia after every assignment step.
pub fn fit_kmeans<R: AsRef<[f64]>>(
    features: &[R],
    k: usize,
    frame_rate_hz: u32,
    seed: u64,
) -> Result<(Codebook, Vec<f64>)> {
    if k == 0 {
        return Err(NsvError::invalid("k must be positive"));
    }
    let dim = features.first().map(|f| f.as_ref().len()).unwrap_or(0);
    if features.iter().any(|f| f.as_ref().len() != dim) {
        return Err(NsvError::invalid("feature vectors have differing dimensions"));
    }
    let distinct = features
        .iter()
        .map(|f| f.as_ref().iter().map(|v| v.to_bits()).collect::<Vec<u64>>())
        .collect::<HashSet<_>>()
        .len();
    if distinct < k {
        return Err(NsvError::InsufficientData {
            required: k,
            available: distinct,
        });
    }
    let n = features.len();
    let rows: Vec<&[f64]> = features.iter().map(|f| f.as_ref()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding
    let mut centroids = Vec::with_capacity(k * dim);
    centroids.extend_from_slice(rows[rng.random_range(0..n)]);
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centroids[..dim])).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    chosen = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            chosen.expect("positive total weight")
        } else {
            unreachable!("fewer distinct points than k")
        };
        let start = centroids.len();
        centroids.extend_from_slice(rows[pick]);
        for (i, r) in rows.iter().enumerate() {
            let d = sq_dist(r, &centroids[start..start + dim]);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }

    let mut cb = Codebook {
        centroids,
        k,
        dim,
        frame_rate_hz,
    };
    let mut assign = vec![0usize; n];
    let mut dists = vec![0f64; n];
    let mut history = Vec::new();
    for _ in 0..MAX_LLOYD_ITERS {
        let mut inertia = 0.0;
        for (i, r) in rows.iter().enumerate() {
            let (j, d) = cb.nearest(r);
            assign[i] = j;
            dists[i] = d;
            inertia += d;
        }
        let converged = match history.last() {
            Some(&prev) => prev - inertia <= REL_TOL * prev,
            None => false,
        };
        history.push(inertia);
        if converged || inertia == 0.0 {
            break;
        }

        let mut sums = vec![0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (i, r) in rows.iter().enumerate() {
            counts[assign[i]] += 1;
            for (s, v) in sums[assign[i] * dim..(assign[i] + 1) * dim].iter_mut().zip(r.iter()) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                for (c, s) in cb.centroids[j * dim..(j + 1) * dim]
                    .iter_mut()
                    .zip(&sums[j * dim..(j + 1) * dim])
                {
                    *c = s / counts[j] as f64;
                }
            } else {
                // Empty cluster: move it onto the worst-served point.
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .unwrap();
                cb.centroids[j * dim..(j + 1) * dim].copy_from_slice(rows[far]);
                dists[far] = 0.0;
            }
        }
    }
    Ok((cb, history))
}

pub fn quantize<R: AsRef<[f64]>>(frames: &[R], codebook: &Codebook, utterance_id: &str) -> Result<UnitSequence> {
    let indices = frames
        .iter()
        .enumerate()
        .map(|(t, f)| {
            let f = f.as_ref();
            if f.len() != codebook.dim {
                return Err(NsvError::invalid(format!(
                    "frame {t} has dimension {} but codebook expects {}",
                    f.len(),
                    codebook.dim
                )));
            }
            Ok(codebook.nearest(f).0 as u16)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UnitSequence {
        indices,
        frame_rate_hz: codebook.frame_rate_hz,
        utterance_id: utterance_id.to_string(),
    })
}

/// Parses a Units TSV file.
pub fn import_units(path: &Path) -> Result<BTreeMap<String, UnitSequence>> {
    parse_units_tsv(&read_text(path)?)
}

pub fn parse_units_tsv(text: &str) -> Result<BTreeMap<String, UnitSequence>> {
    let mut frame_rate: Option<u32> = None;
    let mut rows: Vec<(usize, &str, &str)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let (key, value) = header.split_once('=').ok_or_else(|| NsvError::Parse {
                line: line_no,
                message: format!("header line {line:?} is not #key=value"),
            })?;
            if key.trim() == "frame_rate_hz" {
                let rate = value.trim().parse::<u32>().ok().filter(|&r| r > 0).ok_or_else(|| NsvError::Parse {
                    line: line_no,
                    message: format!("invalid frame_rate_hz {value:?}"),
                })?;
                frame_rate = Some(rate);
            }
            continue;
        }
        let (utt, idx) = line.split_once('\t').ok_or_else(|| NsvError::Parse {
            line: line_no,
            message: "expected utterance_id<TAB>indices".into(),
        })?;
        rows.push((line_no, utt, idx));
    }
    if rows.is_empty() {
        return Ok(BTreeMap::new());
    }
    let frame_rate_hz = frame_rate.ok_or_else(|| NsvError::Parse {
        line: 1,
        message: "missing #frame_rate_hz header".into(),
    })?;
    let mut out = BTreeMap::new();
    for (line_no, utt, idx) in rows {
        let indices = idx
            .split(',')
            .map(|tok| {
                let v: usize = tok.trim().parse().map_err(|_| NsvError::Parse {
                    line: line_no,
                    message: format!("row {utt}: invalid index {tok:?}"),
                })?;
                if v >= N_UNITS {
                    return Err(NsvError::Parse {
                        line: line_no,
                        message: format!("row {utt}: index {v} outside [0,{N_UNITS})"),
                    });
                }
                Ok(v as u16)
            })
            .collect::<Result<Vec<_>>>()?;
        let seq = UnitSequence {
            indices,
            frame_rate_hz,
            utterance_id: utt.to_string(),
        };
        if out.insert(utt.to_string(), seq).is_some() {
            return Err(NsvError::Parse {
                line: line_no,
                message: format!("duplicate utterance_id {utt}"),
            });
        }
    }
    Ok(out)
}

/// Serializes sequences as Units TSV. All sequences must share one frame rate.
pub fn format_units_tsv<'a>(seqs: impl IntoIterator<Item = &'a UnitSequence>, frame_rate_hz: u32) -> String {
    let mut s = format!("#frame_rate_hz={frame_rate_hz}\n");
    for seq in seqs {
        let idx: Vec<String> = seq.indices.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(s, "{}\t{}", seq.utterance_id, idx.join(","));
    }
    s
}
