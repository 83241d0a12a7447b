//! Non-speech vocalization synthesis from discrete speech units.
//!
//! Audio is transcribed into pseudo-phonemes (K-means unit indices,
//! run-length encoded and rendered as letters), an acoustic model predicts
//! durations, a [0, 1]-scaled pitch contour and a 256-band log-mel
//! spectrogram per speaker, and a harmonic-plus-noise vocoder renders audio.
//! [`eval`] provides Fréchet distances and speaker-space projections.

pub mod acoustic;
pub mod audioio;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod pipeline;
pub mod ppcodec;
pub mod units;
pub mod vocoder;

pub use error::{NsvError, Result};
