//! MELF and PITF binary containers.

use std::path::Path;

use super::{FrameConfig, MelSpectrogram, PitchContour};
use crate::error::Result;
use crate::io::{read_bytes, write_bytes, ByteReader};

pub fn encode_mel(mel: &MelSpectrogram) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + mel.values.len() * 4);
    out.extend_from_slice(b"MELF");
    out.extend_from_slice(&(mel.frames as u32).to_le_bytes());
    out.extend_from_slice(&(mel.n_mels as u32).to_le_bytes());
    for &v in &mel.values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_mel(bytes: &[u8], frame_config: FrameConfig) -> Result<MelSpectrogram> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(b"MELF")?;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let values = (0..rows * cols).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    MelSpectrogram::new(values, rows, cols, frame_config)
}

pub fn encode_pitch(pitch: &PitchContour) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + pitch.len() * 4);
    out.extend_from_slice(b"PITF");
    out.extend_from_slice(&(pitch.len() as u32).to_le_bytes());
    for (&f, &v) in pitch.f0_hz.iter().zip(&pitch.voiced) {
        let f = if v { f as f32 } else { 0.0 };
        out.extend_from_slice(&f.to_le_bytes());
    }
    out
}

pub fn decode_pitch(bytes: &[u8], frame_config: FrameConfig) -> Result<PitchContour> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(b"PITF")?;
    let frames = r.u32()? as usize;
    let f0 = (0..frames).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Ok(PitchContour::from_f0(f0, frame_config))
}

pub fn write_mel(path: &Path, mel: &MelSpectrogram) -> Result<()> {
    write_bytes(path, &encode_mel(mel))
}

pub fn read_mel(path: &Path) -> Result<MelSpectrogram> {
    decode_mel(&read_bytes(path)?, FrameConfig::default())
}

pub fn write_pitch(path: &Path, pitch: &PitchContour) -> Result<()> {
    write_bytes(path, &encode_pitch(pitch))
}

pub fn read_pitch(path: &Path) -> Result<PitchContour> {
    decode_pitch(&read_bytes(path)?, FrameConfig::default())
}
