//! Run-length pseudo-phoneme codec.
//!
//! A frame-level unit sequence such as `[5,5,5,2,2,9]` is split into the
//! non-repeating units `[5,2,9]` and their run lengths `[3,2,1]`. Units are
//! rendered as one character each from a contiguous block of printable
//! letters starting at U+0100; durations travel separately.

use crate::error::{NsvError, Result};
use crate::units::{UnitSequence, N_UNITS};

/// First code point of the pseudo-phoneme alphabet (`Ā`).
pub const ALPHABET_START: u32 = 0x0100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoPhonemeSequence {
    pub units: Vec<u16>,
    pub durations: Vec<u32>,
    pub frame_rate_hz: u32,
}

impl PseudoPhonemeSequence {
    /// Builds a sequence after checking every invariant.
    pub fn new(units: Vec<u16>, durations: Vec<u32>, frame_rate_hz: u32) -> Result<Self> {
        let pp = Self {
            units,
            durations,
            frame_rate_hz,
        };
        pp.validate()?;
        Ok(pp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.units.len() != self.durations.len() {
            return Err(NsvError::Validation(format!(
                "{} units but {} durations",
                self.units.len(),
                self.durations.len()
            )));
        }
        if let Some(i) = self.durations.iter().position(|&d| d == 0) {
            return Err(NsvError::Validation(format!("zero duration at position {i}")));
        }
        if let Some(&u) = self.units.iter().find(|&&u| u as usize >= N_UNITS) {
            return Err(NsvError::Range {
                index: u as usize,
                limit: N_UNITS,
            });
        }
        if let Some(i) = self.units.windows(2).position(|w| w[0] == w[1]) {
            return Err(NsvError::Validation(format!(
                "consecutive repeat of unit {} at position {}",
                self.units[i],
                i + 1
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Total number of frames covered, i.e. the length of the decoded sequence.
    pub fn total_frames(&self) -> usize {
        self.durations.iter().map(|&d| d as usize).sum()
    }
}

pub fn rle_encode(seq: &UnitSequence) -> PseudoPhonemeSequence {
    let mut units: Vec<u16> = Vec::new();
    let mut durations: Vec<u32> = Vec::new();
    for &u in &seq.indices {
        match units.last() {
            Some(&last) if last == u => *durations.last_mut().unwrap() += 1,
            _ => {
                units.push(u);
                durations.push(1);
            }
        }
    }
    PseudoPhonemeSequence {
        units,
        durations,
        frame_rate_hz: seq.frame_rate_hz,
    }
}

pub fn rle_decode(pp: &PseudoPhonemeSequence, utterance_id: &str) -> Result<UnitSequence> {
    pp.validate()?;
    let mut indices = Vec::with_capacity(pp.total_frames());
    for (&u, &d) in pp.units.iter().zip(&pp.durations) {
        indices.extend(std::iter::repeat_n(u, d as usize));
    }
    Ok(UnitSequence {
        indices,
        frame_rate_hz: pp.frame_rate_hz,
        utterance_id: utterance_id.to_string(),
    })
}

/// Maps unit indices to their one-character text form.
pub fn units_to_text(units: &[u16]) -> Result<String> {
    units
        .iter()
        .map(|&u| {
            if (u as usize) < N_UNITS {
                Ok(char::from_u32(ALPHABET_START + u as u32).expect("alphabet is valid scalar values"))
            } else {
                Err(NsvError::Range {
                    index: u as usize,
                    limit: N_UNITS,
                })
            }
        })
        .collect()
}

pub fn to_text(pp: &PseudoPhonemeSequence) -> Result<String> {
    units_to_text(&pp.units)
}

/// Inverse of [`to_text`]. Positions in errors count characters, not bytes.
pub fn from_text(s: &str) -> Result<Vec<u16>> {
    s.chars()
        .enumerate()
        .map(|(position, c)| {
            let cp = c as u32;
            if (ALPHABET_START..ALPHABET_START + N_UNITS as u32).contains(&cp) {
                Ok((cp - ALPHABET_START) as u16)
            } else {
                Err(NsvError::TextParse {
                    position,
                    message: format!("character {c:?} (U+{cp:04X}) is outside the pseudo-phoneme alphabet"),
                })
            }
        })
        .collect()
}
