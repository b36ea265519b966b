//! C ABI for loading trained checkpoints and running inference.
//!
//! Every fallible function returns an [`AffectStatus`]. On failure a
//! message describing the error is stored per thread and can be read with
//! [`affect_last_error`]. Models are opaque heap handles released with
//! [`affect_model_free`]. Panics never cross the boundary; they surface as
//! [`AffectStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use affect_core::audio::{mfcc, utterance_features, AudioSegment};
use affect_core::checkpoint::{AnyModel, ModelKind};
use affect_core::error::Error;
use affect_core::humor::HumorInput;
use affect_core::nn::Classifier;
use affect_core::persona::{classify_challenge, ChallengeLabel};
use affect_core::sentiment::SentimentInput;
use affect_core::text::tokenize;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffectStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Config = 5,
    Checkpoint = 6,
    KindMismatch = 7,
    Internal = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffectModelKind {
    Emotion = 0,
    Sentiment = 1,
    Humor = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffectChallenge {
    None = 0,
    DisclosureReciprocity = 1,
    Clarification = 2,
    Avoidance = 3,
    DeliberateChallenge = 4,
    Abusive = 5,
    Garbage = 6,
}

/// Number of coefficients written by [`affect_mfcc`].
pub const AFFECT_MFCC_COEFFS: usize = 13;

/// A loaded model. Opaque to C callers.
pub struct AffectModel {
    inner: AnyModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(AffectStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io(_) | Error::Path { .. } => AffectStatus::Io,
            Error::Parse { .. } | Error::UnsupportedFormat(_) => AffectStatus::Parse,
            Error::Config(_) => AffectStatus::Config,
            Error::Checkpoint(_) => AffectStatus::Checkpoint,
            Error::Dimension { .. } | Error::EmptyInput(_) | Error::Index { .. } | Error::UnsupportedDirection { .. } => {
                AffectStatus::InvalidArgument
            }
            Error::State(_) => AffectStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: AffectStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

/// Runs `f`, records any error or panic, and returns its status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AffectStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AffectStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            AffectStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(AffectStatus::NullPointer, format!("{name} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(AffectStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return if len == 0 { Ok(&[]) } else { fail(AffectStatus::NullPointer, format!("{name} is null")) };
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn audio_arg(p: *const f64, len: usize, sample_rate: u32) -> Result<AudioSegment, Failure> {
    Ok(AudioSegment::new(slice_arg(p, len, "samples")?.to_vec(), sample_rate)?)
}

unsafe fn model_arg<'a>(m: *const AffectModel) -> Result<&'a AnyModel, Failure> {
    m.as_ref().map(|m| &m.inner).ok_or(Failure(AffectStatus::NullPointer, "model is null".into()))
}

fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return fail(AffectStatus::NullPointer, "output pointer is null");
    }
    unsafe { out.write(value) };
    Ok(())
}

fn kind_mismatch(m: &AnyModel, want: ModelKind) -> Failure {
    Failure(AffectStatus::KindMismatch, format!("expected a {want} model, got {}", m.kind()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn affect_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn affect_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a checkpoint file into a new handle stored in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn affect_model_load(path: *const c_char, out: *mut *mut AffectModel) -> AffectStatus {
    guard(|| {
        if out.is_null() {
            return fail(AffectStatus::NullPointer, "output pointer is null");
        }
        let inner = AnyModel::load(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(AffectModel { inner }));
        Ok(())
    })
}

/// Releases a handle. Passing NULL is a no-op.
///
/// # Safety
/// `model` must come from [`affect_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn affect_model_free(model: *mut AffectModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn affect_model_kind(model: *const AffectModel, out: *mut AffectModelKind) -> AffectStatus {
    guard(|| {
        let kind = match model_arg(model)?.kind() {
            ModelKind::Emotion => AffectModelKind::Emotion,
            ModelKind::Sentiment => AffectModelKind::Sentiment,
            ModelKind::Humor => AffectModelKind::Humor,
        };
        write_out(out, kind)
    })
}

/// Positive-class probability of an emotion model for mono samples.
///
/// # Safety
/// `samples` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn affect_emotion_predict(
    model: *const AffectModel,
    samples: *const f64,
    len: usize,
    sample_rate: u32,
    out: *mut f64,
) -> AffectStatus {
    guard(|| {
        let AnyModel::Emotion(m) = model_arg(model)? else {
            return Err(kind_mismatch(model_arg(model)?, ModelKind::Emotion));
        };
        write_out(out, m.predict(&audio_arg(samples, len, sample_rate)?)?)
    })
}

/// Positive-sentiment probability of `text`. Audio is required only by
/// models trained with the audio channel; otherwise pass NULL and 0.
///
/// # Safety
/// `text` must be NUL-terminated; `samples` must point to `len` doubles
/// when non-null; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn affect_sentiment_predict(
    model: *const AffectModel,
    text: *const c_char,
    samples: *const f64,
    len: usize,
    sample_rate: u32,
    out: *mut f64,
) -> AffectStatus {
    guard(|| {
        let AnyModel::Sentiment(m) = model_arg(model)? else {
            return Err(kind_mismatch(model_arg(model)?, ModelKind::Sentiment));
        };
        let tokens = tokenize(str_arg(text, "text")?);
        let input = if m.cfg.use_audio {
            if samples.is_null() {
                return fail(AffectStatus::InvalidArgument, "this sentiment model needs audio");
            }
            SentimentInput::with_audio(tokens, &audio_arg(samples, len, sample_rate)?)?
        } else {
            SentimentInput::text(tokens)
        };
        write_out(out, m.positive_probability(&input)?)
    })
}

/// Punchline probability of the last of `k` utterances. `context[i]` is
/// the text of utterance `i` (oldest first) or NULL for turns before the
/// dialog began; `k` must equal the model's window. The audio belongs to
/// the last utterance and may be NULL for silence.
///
/// # Safety
/// `context` must point to `k` pointers, each NULL or NUL-terminated;
/// `speaker` must be NUL-terminated; `samples` must point to `len` doubles
/// when non-null; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn affect_humor_predict(
    model: *const AffectModel,
    context: *const *const c_char,
    k: usize,
    samples: *const f64,
    len: usize,
    sample_rate: u32,
    speaker: *const c_char,
    duration_s: f64,
    out: *mut f64,
) -> AffectStatus {
    guard(|| {
        let AnyModel::Humor(m) = model_arg(model)? else {
            return Err(kind_mismatch(model_arg(model)?, ModelKind::Humor));
        };
        if context.is_null() {
            return fail(AffectStatus::NullPointer, "context is null");
        }
        let mut turns = Vec::with_capacity(k);
        for p in std::slice::from_raw_parts(context, k) {
            turns.push(if p.is_null() { None } else { Some(tokenize(str_arg(*p, "context entry")?)) });
        }
        let seg = if samples.is_null() {
            AudioSegment::silence(0.025, 8000)
        } else {
            audio_arg(samples, len, sample_rate)?
        };
        let input = HumorInput {
            context: turns,
            audio: utterance_features(&seg)?,
            speaker: str_arg(speaker, "speaker")?.to_string(),
            duration_s,
        };
        write_out(out, m.positive_probability(&input)?)
    })
}

/// Rule-based challenge category of a user response.
///
/// # Safety
/// `text` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn affect_classify_challenge(text: *const c_char, out: *mut AffectChallenge) -> AffectStatus {
    guard(|| {
        let label = match classify_challenge(str_arg(text, "text")?) {
            ChallengeLabel::None => AffectChallenge::None,
            ChallengeLabel::DisclosureReciprocity => AffectChallenge::DisclosureReciprocity,
            ChallengeLabel::Clarification => AffectChallenge::Clarification,
            ChallengeLabel::Avoidance => AffectChallenge::Avoidance,
            ChallengeLabel::DeliberateChallenge => AffectChallenge::DeliberateChallenge,
            ChallengeLabel::Abusive => AffectChallenge::Abusive,
            ChallengeLabel::Garbage => AffectChallenge::Garbage,
        };
        write_out(out, label)
    })
}

/// MFCCs of one frame: writes [`AFFECT_MFCC_COEFFS`] values to `out`,
/// which must hold `out_len >= AFFECT_MFCC_COEFFS` doubles.
///
/// # Safety
/// `frame` must point to `len` doubles and `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn affect_mfcc(
    frame: *const f64,
    len: usize,
    sample_rate: u32,
    out: *mut f64,
    out_len: usize,
) -> AffectStatus {
    guard(|| {
        if out.is_null() {
            return fail(AffectStatus::NullPointer, "output pointer is null");
        }
        if out_len < AFFECT_MFCC_COEFFS {
            return fail(AffectStatus::InvalidArgument, format!("output holds {out_len} values, need {AFFECT_MFCC_COEFFS}"));
        }
        let coeffs = mfcc(slice_arg(frame, len, "frame")?, sample_rate)?;
        std::slice::from_raw_parts_mut(out, coeffs.len()).copy_from_slice(&coeffs);
        Ok(())
    })
}
