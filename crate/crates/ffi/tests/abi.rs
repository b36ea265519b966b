use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use affect_core::checkpoint::AnyModel;
use affect_core::emotion::{build_emotion_model, EmotionCnnConfig};
use affect_core::humor::{ContextMode, HumorNet, HumorNetConfig};
use affect_core::math::Rng;
use affect_core::sentiment::{SentimentCnn, SentimentCnnConfig};
use affect_core::text::EmbeddingTable;
use affect_ffi::*;

fn last_error() -> String {
    let p = affect_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(path: &Path) -> *mut AffectModel {
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { affect_model_load(c.as_ptr(), &mut m) }, AffectStatus::Ok);
    m
}

fn table() -> EmbeddingTable {
    EmbeddingTable::random(&["good", "bad", "plot", "movie"], 4, 0.5, &mut Rng::new(1)).unwrap()
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(affect_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn emotion_handle_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let model = build_emotion_model(&EmotionCnnConfig { hidden: 4, ..Default::default() }, &mut Rng::new(2)).unwrap();
    let path = dir.path().join("e.ckpt");
    AnyModel::Emotion(model.clone()).save(&path).unwrap();
    let h = load(&path);
    let mut kind = AffectModelKind::Humor;
    assert_eq!(unsafe { affect_model_kind(h, &mut kind) }, AffectStatus::Ok);
    assert_eq!(kind, AffectModelKind::Emotion);

    let samples: Vec<f64> = (0..4000).map(|i| (i as f64 * 0.07).sin()).collect();
    let mut p = -1.0;
    let s = unsafe { affect_emotion_predict(h, samples.as_ptr(), samples.len(), 8000, &mut p) };
    assert_eq!(s, AffectStatus::Ok);
    let seg = affect_core::audio::AudioSegment::new(samples.clone(), 8000).unwrap();
    assert_eq!(p, model.predict(&seg).unwrap());

    let text = CString::new("good").unwrap();
    let s = unsafe { affect_sentiment_predict(h, text.as_ptr(), ptr::null(), 0, 0, &mut p) };
    assert_eq!(s, AffectStatus::KindMismatch);
    assert!(last_error().contains("sentiment"));
    let s = unsafe { affect_emotion_predict(h, ptr::null(), 0, 8000, &mut p) };
    assert_eq!(s, AffectStatus::InvalidArgument);
    unsafe { affect_model_free(h) };
}

#[test]
fn sentiment_and_humor_handles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SentimentCnnConfig { heights: vec![2, 3], maps: 3, ..Default::default() };
    let s = SentimentCnn::new(&cfg, &table(), [], &mut Rng::new(3)).unwrap();
    AnyModel::Sentiment(s).save(dir.path().join("s.ckpt")).unwrap();
    let h = load(&dir.path().join("s.ckpt"));
    let text = CString::new("good movie").unwrap();
    let mut p = -1.0;
    assert_eq!(unsafe { affect_sentiment_predict(h, text.as_ptr(), ptr::null(), 0, 0, &mut p) }, AffectStatus::Ok);
    assert!(p > 0.0 && p < 1.0);
    unsafe { affect_model_free(h) };

    let hcfg = HumorNetConfig {
        lang_hidden: 4,
        lang_window: 3,
        audio_hidden: 3,
        audio_window: 3,
        lstm_hidden: 4,
        dropout: 0.5,
        k: 2,
        mode: ContextMode::Lstm,
        use_audio: true,
        use_speaker: false,
    };
    let m = HumorNet::new(&hcfg, &table(), &[], &mut Rng::new(4)).unwrap();
    AnyModel::Humor(m).save(dir.path().join("h.ckpt")).unwrap();
    let h = load(&dir.path().join("h.ckpt"));
    let last = CString::new("bad plot").unwrap();
    let speaker = CString::new("ANY").unwrap();
    let context = [ptr::null(), last.as_ptr()];
    let status = unsafe { affect_humor_predict(h, context.as_ptr(), 2, ptr::null(), 0, 0, speaker.as_ptr(), 1.5, &mut p) };
    assert_eq!(status, AffectStatus::Ok);
    assert!(p > 0.0 && p < 1.0);
    let status = unsafe { affect_humor_predict(h, context.as_ptr(), 1, ptr::null(), 0, 0, speaker.as_ptr(), 1.5, &mut p) };
    assert_eq!(status, AffectStatus::Config);
    unsafe { affect_model_free(h) };
}

#[test]
fn load_errors_and_nulls() {
    let mut m = ptr::null_mut();
    let missing = CString::new("/nonexistent/model.ckpt").unwrap();
    assert_eq!(unsafe { affect_model_load(missing.as_ptr(), &mut m) }, AffectStatus::Io);
    assert!(m.is_null());
    assert!(last_error().contains("nonexistent"));
    assert_eq!(unsafe { affect_model_load(ptr::null(), &mut m) }, AffectStatus::NullPointer);

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"AFCK\x07\x00\x00\x00").unwrap();
    let c = CString::new(junk.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { affect_model_load(c.as_ptr(), &mut m) }, AffectStatus::Checkpoint);
    unsafe { affect_model_free(ptr::null_mut()) };
}

#[test]
fn challenge_and_mfcc() {
    let mut label = AffectChallenge::None;
    let text = CString::new("Can you repeat?").unwrap();
    assert_eq!(unsafe { affect_classify_challenge(text.as_ptr(), &mut label) }, AffectStatus::Ok);
    assert_eq!(label, AffectChallenge::Clarification);

    let frame: Vec<f64> = (0..200).map(|i| (i as f64 * 0.3).sin()).collect();
    let mut out = [0.0; AFFECT_MFCC_COEFFS];
    assert_eq!(unsafe { affect_mfcc(frame.as_ptr(), 200, 8000, out.as_mut_ptr(), out.len()) }, AffectStatus::Ok);
    assert_eq!(out.to_vec(), affect_core::audio::mfcc(&frame, 8000).unwrap());
    assert_eq!(unsafe { affect_mfcc(frame.as_ptr(), 200, 8000, out.as_mut_ptr(), 5) }, AffectStatus::InvalidArgument);
}

fn staticlib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("libaffect_ffi.a");
    lib.is_file().then_some(lib)
}

/// Compiles a C program against the generated header and links it with
/// the static library. Skipped when no C compiler or archive is present.
#[test]
fn c_program_links_and_runs() {
    let (Some(lib), true) = (staticlib(), Command::new("cc").arg("--version").output().is_ok()) else {
        eprintln!("skipping: no C compiler or static library");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include <string.h>
#include "affect.h"
int main(void) {
    enum AffectChallenge c;
    if (affect_classify_challenge("get lost now", &c) != AFFECT_STATUS_OK || c != AFFECT_CHALLENGE_ABUSIVE) return 1;
    AffectModel *m = NULL;
    if (affect_model_load("/nonexistent.ckpt", &m) != AFFECT_STATUS_IO || m != NULL) return 2;
    if (affect_last_error() == NULL || strstr(affect_last_error(), "nonexistent") == NULL) return 3;
    double frame[200], out[AFFECT_MFCC_COEFFS];
    for (int i = 0; i < 200; i++) frame[i] = (i % 7) / 7.0;
    if (affect_mfcc(frame, 200, 8000, out, AFFECT_MFCC_COEFFS) != AFFECT_STATUS_OK) return 4;
    printf("%s\n", affect_version());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("probe");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C probe failed to build");
    let out = Command::new(&bin).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
