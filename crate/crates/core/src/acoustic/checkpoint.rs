//! `NSVM` checkpoint files: magic, u32 version, u32-length UTF-8 config blob
//! of `key=value` lines, u32 tensor count, then per tensor a u32-length name,
//! u32 rank, u32 dims and an f32 little-endian payload.

use std::collections::BTreeMap;
use std::path::Path;

use super::model::{AcousticModel, ModelConfig};
use super::tensor::{ParamSet, Tensor};
use crate::error::{NsvError, Result, ResultExt};
use crate::io::{read_bytes, write_bytes, ByteReader};

pub const MAGIC: &[u8; 4] = b"NSVM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: AcousticModel,
    /// Speaker ids in embedding-row order.
    pub speakers: Vec<String>,
    pub seed: u64,
    /// Free-form settings stored alongside the model config.
    pub extra: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn speaker_index(&self, speaker: &str) -> Result<usize> {
        self.speakers
            .iter()
            .position(|s| s == speaker)
            .ok_or_else(|| NsvError::UnknownSpeaker {
                speaker: speaker.to_string(),
                valid: self.speakers.clone(),
            })
    }
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    if ckpt.speakers.len() != ckpt.model.config.n_speakers {
        return Err(NsvError::invalid(format!(
            "{} speaker ids for {} embedding rows",
            ckpt.speakers.len(),
            ckpt.model.config.n_speakers
        )));
    }
    if let Some(s) = ckpt.speakers.iter().find(|s| s.is_empty() || s.contains([',', '\n', '='])) {
        return Err(NsvError::invalid(format!("speaker id {s:?} cannot be stored")));
    }
    let mut kv = ckpt.model.config.to_kv();
    kv.insert("speakers".into(), ckpt.speakers.join(","));
    kv.insert("seed".into(), ckpt.seed.to_string());
    for (k, v) in &ckpt.extra {
        if kv.contains_key(k) {
            return Err(NsvError::invalid(format!("extra key {k:?} collides with a model key")));
        }
        if k.contains(['=', '\n']) || v.contains('\n') {
            return Err(NsvError::invalid(format!("extra entry {k:?} cannot be stored")));
        }
        kv.insert(k.clone(), v.clone());
    }
    let blob: String = kv.iter().map(|(k, v)| format!("{k}={v}\n")).collect();

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(blob.len() as u32).to_le_bytes());
    out.extend_from_slice(blob.as_bytes());
    let params = &ckpt.model.params;
    out.extend_from_slice(&(params.tensors.len() as u32).to_le_bytes());
    for (name, t) in params.names.iter().zip(&params.tensors) {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &t.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(NsvError::UnsupportedFormat(format!("checkpoint version {version}")));
    }
    let blob_len = r.u32()? as usize;
    let blob_offset = r.offset();
    let blob = std::str::from_utf8(r.take(blob_len)?).map_err(|e| NsvError::Decode {
        offset: (blob_offset + e.valid_up_to()) as u64,
        message: "config blob is not UTF-8".into(),
    })?;
    let mut config = ModelConfig::default();
    let mut speakers = None;
    let mut seed = None;
    let mut extra = BTreeMap::new();
    for (i, line) in blob.lines().enumerate() {
        let (k, v) = line.split_once('=').ok_or_else(|| NsvError::Parse {
            line: i + 1,
            message: format!("config line {line:?} is not key=value"),
        })?;
        match k {
            "speakers" => speakers = Some(v.split(',').map(str::to_string).collect::<Vec<_>>()),
            "seed" => {
                seed = Some(v.parse::<u64>().map_err(|_| NsvError::Parse {
                    line: i + 1,
                    message: format!("bad seed {v:?}"),
                })?)
            }
            _ => {
                if !config.set(k, v)? {
                    extra.insert(k.to_string(), v.to_string());
                }
            }
        }
    }
    let speakers = speakers.ok_or_else(|| NsvError::Validation("checkpoint lacks speakers".into()))?;
    let seed = seed.ok_or_else(|| NsvError::Validation("checkpoint lacks seed".into()))?;

    let count = r.u32()? as usize;
    let mut params = ParamSet::default();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name_offset = r.offset();
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| NsvError::Decode {
                offset: name_offset as u64,
                message: "tensor name is not UTF-8".into(),
            })?
            .to_string();
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        if n * 4 > r.remaining() {
            return Err(NsvError::Decode {
                offset: r.offset() as u64,
                message: format!("tensor {name} needs {} bytes, {} remain", n * 4, r.remaining()),
            });
        }
        let data = (0..n).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
        params.add(name, Tensor { shape, data });
    }
    r.finish()?;
    if !params.all_finite() {
        return Err(NsvError::Validation("checkpoint holds non-finite parameters".into()));
    }
    let model = AcousticModel::from_params(config, params)?;
    let ckpt = Checkpoint {
        model,
        speakers,
        seed,
        extra,
    };
    if ckpt.speakers.len() != ckpt.model.config.n_speakers {
        return Err(NsvError::Validation(format!(
            "{} speaker ids for {} embedding rows",
            ckpt.speakers.len(),
            ckpt.model.config.n_speakers
        )));
    }
    Ok(ckpt)
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_bytes(path, &encode_checkpoint(ckpt)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&read_bytes(path)?).context(|| format!("loading {}", path.display()))
}
