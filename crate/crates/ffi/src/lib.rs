//! C ABI over `nsv-core`.
//!
//! Every fallible call returns an [`NsvStatus`]; on failure the message is
//! available from [`nsv_last_error`] on the same thread. Handles are opaque
//! and must be released with their matching `*_free` function. Panics are
//! caught at the boundary and reported as [`NsvStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use nsv_core::acoustic::load_checkpoint;
use nsv_core::audioio::{write_wav, AudioClip};
use nsv_core::pipeline::{gen_corpus, prepare, synthesize, train_model, PipelineConfig, PpSource, Synthesizer};
use nsv_core::ppcodec::{from_text, units_to_text};
use nsv_core::NsvError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotFound = 3,
    Io = 4,
    Parse = 5,
    Format = 6,
    UnknownSpeaker = 7,
    Validation = 8,
    InsufficientData = 9,
    Divergence = 10,
    Panic = 99,
}

impl From<&NsvError> for NsvStatus {
    fn from(e: &NsvError) -> Self {
        match e.root() {
            NsvError::NotFound(_) => NsvStatus::NotFound,
            NsvError::Io { .. } => NsvStatus::Io,
            NsvError::Parse { .. } | NsvError::TextParse { .. } => NsvStatus::Parse,
            NsvError::Decode { .. } | NsvError::UnsupportedFormat(_) | NsvError::EmptyClip(_) => NsvStatus::Format,
            NsvError::UnknownSpeaker { .. } => NsvStatus::UnknownSpeaker,
            NsvError::Validation(_) | NsvError::Range { .. } => NsvStatus::Validation,
            NsvError::InsufficientData { .. } | NsvError::EmptyCorpus(_) => NsvStatus::InsufficientData,
            NsvError::Divergence { .. } => NsvStatus::Divergence,
            _ => NsvStatus::InvalidArgument,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(NsvStatus, String);

impl From<NsvError> for Fail {
    fn from(e: NsvError) -> Self {
        Fail(NsvStatus::from(&e), e.to_string())
    }
}

type FfiResult<T> = std::result::Result<T, Fail>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> NsvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            NsvStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside nsv");
            NsvStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(NsvStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(NsvStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Pipeline configuration handle.
pub struct NsvConfig(PipelineConfig);

/// A loaded checkpoint ready to synthesize.
pub struct NsvSynthesizer {
    synth: Synthesizer,
    cfg: PipelineConfig,
    speaker_ids: Vec<CString>,
}

/// Synthesized mono audio.
pub struct NsvAudio(AudioClip);

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn nsv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread ("" after a success).
/// Valid until the next nsv call on the same thread.
#[no_mangle]
pub extern "C" fn nsv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Default configuration. Never null.
#[no_mangle]
pub extern "C" fn nsv_config_new() -> *mut NsvConfig {
    Box::into_raw(Box::new(NsvConfig(PipelineConfig::default())))
}

/// Loads a key=value config file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsv_config_load(path: *const c_char, out: *mut *mut NsvConfig) -> NsvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = PipelineConfig::load(&PathBuf::from(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(NsvConfig(cfg)));
        Ok(())
    })
}

/// Sets one config key; unknown keys fail with `NSV_STATUS_INVALID_ARGUMENT`.
///
/// # Safety
/// `cfg` must come from this library; strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn nsv_config_set(cfg: *mut NsvConfig, key: *const c_char, value: *const c_char) -> NsvStatus {
    guard(|| {
        let cfg = out_arg(cfg, "cfg")?;
        cfg.0.set(str_arg(key, "key")?, str_arg(value, "value")?)?;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nsv_config_free(cfg: *mut NsvConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Writes the synthetic corpus into the configured corpus directory.
///
/// # Safety
/// `cfg` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn nsv_gen_corpus(cfg: *const NsvConfig) -> NsvStatus {
    guard(|| {
        gen_corpus(&handle(cfg, "cfg")?.0)?;
        Ok(())
    })
}

/// Builds the dataset directory from the corpus.
///
/// # Safety
/// `cfg` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn nsv_prepare(cfg: *const NsvConfig) -> NsvStatus {
    guard(|| {
        prepare(&handle(cfg, "cfg")?.0)?;
        Ok(())
    })
}

/// Trains on the prepared dataset and writes the checkpoint.
///
/// # Safety
/// `cfg` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn nsv_train(cfg: *const NsvConfig) -> NsvStatus {
    guard(|| {
        train_model(&handle(cfg, "cfg")?.0, |_, _| Ok(()))?;
        Ok(())
    })
}

/// Loads a checkpoint (the configured one when `checkpoint` is null).
///
/// # Safety
/// `cfg` must come from this library; `checkpoint` null or NUL-terminated;
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nsv_synthesizer_open(
    cfg: *const NsvConfig,
    checkpoint: *const c_char,
    out: *mut *mut NsvSynthesizer,
) -> NsvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = handle(cfg, "cfg")?.0.clone();
        let path = if checkpoint.is_null() {
            cfg.checkpoint_path()
        } else {
            PathBuf::from(str_arg(checkpoint, "checkpoint")?)
        };
        let ckpt = load_checkpoint(&path)?;
        let speaker_ids = ckpt
            .speakers
            .iter()
            .map(|s| CString::new(s.as_str()).unwrap_or_default())
            .collect();
        let synth = Synthesizer::new(ckpt, &cfg)?;
        *out = Box::into_raw(Box::new(NsvSynthesizer { synth, cfg, speaker_ids }));
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library. Returns 0 for null.
#[no_mangle]
pub unsafe extern "C" fn nsv_synthesizer_speaker_count(s: *const NsvSynthesizer) -> usize {
    s.as_ref().map_or(0, |s| s.speaker_ids.len())
}

/// Speaker id `index`, owned by the handle; null when out of range.
///
/// # Safety
/// `s` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn nsv_synthesizer_speaker_id(s: *const NsvSynthesizer, index: usize) -> *const c_char {
    s.as_ref()
        .and_then(|s| s.speaker_ids.get(index))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// Renders pseudo-phoneme `text` under `speaker` with predicted durations.
///
/// # Safety
/// `s` must come from this library; strings NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nsv_synthesize_text(
    s: *const NsvSynthesizer,
    text: *const c_char,
    speaker: *const c_char,
    noise_seed: u64,
    out: *mut *mut NsvAudio,
) -> NsvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let s = handle(s, "synthesizer")?;
        let source = PpSource::Text {
            text: str_arg(text, "text")?.to_string(),
            durations: None,
            frame_rate_hz: s.cfg.frame.frame_rate_hz(),
        };
        let (clip, _) = synthesize(&s.synth, None, &source, str_arg(speaker, "speaker")?, noise_seed, false)?;
        *out = Box::into_raw(Box::new(NsvAudio(clip)));
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nsv_synthesizer_free(s: *mut NsvSynthesizer) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `a` must come from this library. Returns 0 for null.
#[no_mangle]
pub unsafe extern "C" fn nsv_audio_len(a: *const NsvAudio) -> usize {
    a.as_ref().map_or(0, |a| a.0.samples.len())
}

/// # Safety
/// `a` must come from this library. Returns 0 for null.
#[no_mangle]
pub unsafe extern "C" fn nsv_audio_sample_rate(a: *const NsvAudio) -> u32 {
    a.as_ref().map_or(0, |a| a.0.sample_rate_hz)
}

/// Samples in [-1, 1], `nsv_audio_len` of them, owned by the handle.
///
/// # Safety
/// `a` must come from this library. Returns null for null.
#[no_mangle]
pub unsafe extern "C" fn nsv_audio_samples(a: *const NsvAudio) -> *const f32 {
    a.as_ref().map_or(ptr::null(), |a| a.0.samples.as_ptr())
}

/// Writes 16-bit PCM WAV.
///
/// # Safety
/// `a` must come from this library; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn nsv_audio_write_wav(a: *const NsvAudio, path: *const c_char) -> NsvStatus {
    guard(|| {
        let a = handle(a, "audio")?;
        write_wav(&PathBuf::from(str_arg(path, "path")?), &a.0.samples, a.0.sample_rate_hz)?;
        Ok(())
    })
}

/// # Safety
/// `a` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nsv_audio_free(a: *mut NsvAudio) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Encodes unit indices as pseudo-phoneme text; free with `nsv_string_free`.
///
/// # Safety
/// `units` must point to `len` values (may be null when `len` is 0); `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nsv_units_to_text(units: *const u16, len: usize, out: *mut *mut c_char) -> NsvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let units = match len {
            0 => &[][..],
            _ if units.is_null() => return Err(null("units")),
            _ => std::slice::from_raw_parts(units, len),
        };
        let text = units_to_text(units)?;
        *out = CString::new(text).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// Decodes pseudo-phoneme text into unit indices; free with `nsv_units_free`.
///
/// # Safety
/// `text` NUL-terminated; `out_units` and `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn nsv_text_to_units(
    text: *const c_char,
    out_units: *mut *mut u16,
    out_len: *mut usize,
) -> NsvStatus {
    guard(|| {
        let out_units = out_arg(out_units, "out_units")?;
        let out_len = out_arg(out_len, "out_len")?;
        *out_units = ptr::null_mut();
        *out_len = 0;
        let units = from_text(str_arg(text, "text")?)?.into_boxed_slice();
        *out_len = units.len();
        *out_units = Box::into_raw(units).cast();
        Ok(())
    })
}

/// # Safety
/// `s` must come from `nsv_units_to_text`. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nsv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `units`/`len` must come from `nsv_text_to_units`. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nsv_units_free(units: *mut u16, len: usize) {
    if !units.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(units, len)));
    }
}
