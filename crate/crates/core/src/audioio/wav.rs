use std::path::Path;

use super::{AudioClip, Emotion};
use crate::error::{NsvError, Result};
use crate::io::{read_bytes, write_bytes, ByteReader};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Reads a mono or multi-channel WAV file; channels are averaged.
///
/// The utterance id is taken from the file stem. Speaker and emotion come
/// from the manifest, see [`super::load_clip`].
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let bytes = read_bytes(path)?;
    let (samples, rate) = decode_wav(&bytes).map_err(|e| e.context(path.display().to_string()))?;
    let mut clip = AudioClip::new(samples, rate);
    clip.utterance_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    clip.speaker_id = "unknown".into();
    clip.emotion = Emotion::Synthetic;
    Ok(clip)
}

/// Decodes RIFF/WAVE bytes into mono samples in [-1, 1] and the sample rate.
pub fn decode_wav(bytes: &[u8]) -> Result<(Vec<f32>, u32)> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(b"RIFF")?;
    let _riff_len = r.u32()?;
    r.expect_magic(b"WAVE")?;

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<(usize, &[u8])> = None;
    while r.remaining() >= 8 {
        let chunk_at = r.offset();
        let id = r.take(4)?;
        let len = r.u32()? as usize;
        if r.remaining() < len {
            return Err(NsvError::Decode {
                offset: chunk_at as u64,
                message: format!(
                    "chunk {:?} declares {len} bytes but only {} remain",
                    String::from_utf8_lossy(id),
                    r.remaining()
                ),
            });
        }
        let body_at = r.offset();
        let body = r.take(len)?;
        if len % 2 == 1 && r.remaining() > 0 {
            r.take(1)?;
        }
        match id {
            b"fmt " => {
                if len < 16 {
                    return Err(NsvError::Decode {
                        offset: body_at as u64,
                        message: format!("fmt chunk too short ({len} bytes)"),
                    });
                }
                let mut f = ByteReader::new(body);
                let mut tag = f.u16()?;
                let channels = f.u16()?;
                let rate = f.u32()?;
                let _byte_rate = f.u32()?;
                let _align = f.u16()?;
                let bits = f.u16()?;
                if tag == FORMAT_EXTENSIBLE {
                    if len < 40 {
                        return Err(NsvError::Decode {
                            offset: body_at as u64,
                            message: "extensible fmt chunk too short".into(),
                        });
                    }
                    // cbSize, valid bits, channel mask, then the sub-format GUID whose
                    // first two bytes carry the real format tag.
                    tag = u16::from_le_bytes([body[24], body[25]]);
                }
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => data = Some((body_at, body)),
            _ => {}
        }
    }
    let (tag, channels, rate, bits) = fmt.ok_or_else(|| NsvError::Decode {
        offset: 12,
        message: "missing fmt chunk".into(),
    })?;
    let (data_at, data) = data.ok_or_else(|| NsvError::Decode {
        offset: r.offset() as u64,
        message: "missing data chunk".into(),
    })?;
    if channels == 0 {
        return Err(NsvError::Decode {
            offset: 22,
            message: "zero channels".into(),
        });
    }
    if rate == 0 {
        return Err(NsvError::Decode {
            offset: 24,
            message: "zero sample rate".into(),
        });
    }
    let frame_values: Vec<f32> = match (tag, bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]) as f32 / 32768.0)
            .collect(),
        (FORMAT_FLOAT, 32) => {
            let mut out = Vec::with_capacity(data.len() / 4);
            for (i, b) in data.chunks_exact(4).enumerate() {
                let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
                if !v.is_finite() {
                    return Err(NsvError::Decode {
                        offset: (data_at + 4 * i) as u64,
                        message: "non-finite float sample".into(),
                    });
                }
                out.push(v.clamp(-1.0, 1.0));
            }
            out
        }
        (tag, bits) => {
            return Err(NsvError::UnsupportedFormat(format!(
                "format tag {tag} with {bits} bits per sample (need PCM16 or float32)"
            )))
        }
    };
    let ch = channels as usize;
    let samples: Vec<f32> = frame_values
        .chunks_exact(ch)
        .map(|frame| frame.iter().sum::<f32>() / ch as f32)
        .collect();
    if samples.is_empty() {
        return Err(NsvError::EmptyClip("data chunk holds no samples".into()));
    }
    Ok((samples, rate))
}

/// Encodes mono samples as 16-bit PCM WAV bytes.
pub fn encode_wav_pcm16(samples: &[f32], sample_rate: u32) -> Vec<u8> {
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_wav(path: &Path, samples: &[f32], sample_rate: u32) -> Result<()> {
    write_bytes(path, &encode_wav_pcm16(samples, sample_rate))
}
