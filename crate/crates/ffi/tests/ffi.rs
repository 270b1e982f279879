use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use affcorr::acpnet::{save_checkpoint, AcpModel, ArchConfig, CheckpointMeta, Modality};
use affcorr::audio::{Analyzer, AudioClip, FeatureConfig, SegmentSpec};
use affcorr_ffi::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_model() -> AcpModel<f32> {
    let arch =
        ArchConfig { image_dim: 20, embed_dim: 12, image_hidden: vec![16], music_hidden: vec![24, 16, 12], fusion_hidden: vec![16, 8, 4] }
            .architecture()
            .unwrap();
    AcpModel::new(&arch, &mut ChaCha8Rng::seed_from_u64(5)).unwrap()
}

fn last_error() -> String {
    let p = affcorr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(path: &Path) -> (AffcorrStatus, *mut AffcorrModel) {
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    let status = unsafe { affcorr_model_load(c.as_ptr(), &mut handle) };
    (status, handle)
}

#[test]
fn tags_and_labels() {
    let cases = [
        ("makes me sad", AffcorrEmotion::Negative),
        ("cool and relaxing music", AffcorrEmotion::Neutral),
        ("so energetic", AffcorrEmotion::Positive),
        ("happysad", AffcorrEmotion::None),
        ("rock", AffcorrEmotion::None),
    ];
    for (tag, want) in cases {
        let c = CString::new(tag).unwrap();
        let mut out = AffcorrEmotion::Positive;
        assert_eq!(unsafe { affcorr_classify_tag(c.as_ptr(), &mut out) }, AffcorrStatus::Ok);
        assert_eq!(out, want, "{tag}");
    }
    let mut out = AffcorrEmotion::None;
    let awe = CString::new("awe").unwrap();
    assert_eq!(unsafe { affcorr_regroup_image_label(awe.as_ptr(), &mut out) }, AffcorrStatus::Ok);
    assert_eq!(out, AffcorrEmotion::Positive);
    let bad = CString::new("boredom").unwrap();
    assert_eq!(unsafe { affcorr_regroup_image_label(bad.as_ptr(), &mut out) }, AffcorrStatus::InvalidInput);
    assert!(last_error().contains("boredom"));
    assert_eq!(unsafe { affcorr_classify_tag(ptr::null(), &mut out) }, AffcorrStatus::NullPointer);
    assert!(last_error().contains("tag"));
}

#[test]
fn model_round_trip_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let model = small_model();
    save_checkpoint(&path, &model, CheckpointMeta::default()).unwrap();
    let (status, handle) = load(&path);
    assert_eq!(status, AffcorrStatus::Ok);
    assert!(!handle.is_null());

    let (mut i, mut m, mut e) = (0, 0, 0);
    assert_eq!(unsafe { affcorr_model_dims(handle, &mut i, &mut m, &mut e) }, AffcorrStatus::Ok);
    assert_eq!((i, m, e), (20, affcorr_feature_dim(), 12));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let img: Vec<f32> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mus: Vec<f32> = (0..193).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut p = 0.0f32;
    assert_eq!(unsafe { affcorr_predict(handle, img.as_ptr(), img.len(), mus.as_ptr(), mus.len(), &mut p) }, AffcorrStatus::Ok);
    assert_eq!(p.to_bits(), model.acp_forward(&img, &mus).unwrap().p_true.to_bits());

    let mut emb = vec![0.0f32; 12];
    assert_eq!(
        unsafe { affcorr_embed(handle, AffcorrModality::Music, mus.as_ptr(), mus.len(), emb.as_mut_ptr(), emb.len()) },
        AffcorrStatus::Ok
    );
    assert_eq!(emb, model.extract_embedding(Modality::Music, &mus).unwrap());
    assert_eq!(
        unsafe { affcorr_embed(handle, AffcorrModality::Image, img.as_ptr(), img.len(), emb.as_mut_ptr(), 11) },
        AffcorrStatus::BufferTooSmall
    );
    assert_eq!(
        unsafe { affcorr_embed(handle, AffcorrModality::Image, mus.as_ptr(), mus.len(), emb.as_mut_ptr(), 12) },
        AffcorrStatus::InvalidInput
    );
    assert_eq!(unsafe { affcorr_predict(handle, img.as_ptr(), 19, mus.as_ptr(), mus.len(), &mut p) }, AffcorrStatus::Shape);
    assert_eq!(unsafe { affcorr_predict(ptr::null(), img.as_ptr(), 20, mus.as_ptr(), 193, &mut p) }, AffcorrStatus::NullPointer);
    unsafe { affcorr_model_free(handle) };
    unsafe { affcorr_model_free(ptr::null_mut()) };
}

#[test]
fn load_failures() {
    let dir = tempfile::tempdir().unwrap();
    let (status, handle) = load(&dir.path().join("missing.ckpt"));
    assert_eq!(status, AffcorrStatus::Io);
    assert!(handle.is_null());
    let bad = dir.path().join("bad.ckpt");
    std::fs::write(&bad, b"NOPE").unwrap();
    assert_eq!(load(&bad).0, AffcorrStatus::Format);
    assert!(last_error().contains("magic"));
}

#[test]
fn segment_features_match_library() {
    let rate = 22050u32;
    let samples: Vec<f32> = (0..60 * rate as usize).map(|n| 0.3 * (n as f32 * 0.05).sin()).collect();
    let mut out = vec![0.0f32; 193];
    assert_eq!(unsafe { affcorr_segment_features(samples.as_ptr(), samples.len(), rate, out.as_mut_ptr(), out.len()) }, AffcorrStatus::Ok);
    let analyzer = Analyzer::new(FeatureConfig::default()).unwrap();
    let clip = AudioClip::new("x", samples.clone(), rate).unwrap();
    assert_eq!(out, analyzer.segment_features(&clip, &SegmentSpec::default()).unwrap().to_f32());
    assert_eq!(unsafe { affcorr_segment_features(samples.as_ptr(), 1000, rate, out.as_mut_ptr(), out.len()) }, AffcorrStatus::InvalidInput);
    assert_eq!(
        unsafe { affcorr_segment_features(samples.as_ptr(), samples.len(), rate, out.as_mut_ptr(), 10) },
        AffcorrStatus::BufferTooSmall
    );
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("affcorr.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "affcorr_last_error",
        "affcorr_feature_dim",
        "affcorr_model_load",
        "affcorr_model_free",
        "affcorr_model_dims",
        "affcorr_predict",
        "affcorr_embed",
        "affcorr_segment_features",
        "affcorr_regroup_image_label",
        "affcorr_classify_tag",
        "typedef struct AffcorrModel AffcorrModel;",
        "AFFCORR_STATUS_OK = 0",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

/// Compiles a small C program against the header and shared library, then
/// runs it.
#[test]
fn c_program_links_and_runs() {
    let target = Path::new(env!("CARGO_TARGET_TMPDIR")).parent().unwrap().to_path_buf();
    let lib_dir = ["debug", "release"]
        .iter()
        .map(|p| target.join(p))
        .find(|d| d.join("libaffcorr_ffi.so").exists() || d.join("libaffcorr_ffi.dylib").exists());
    let lib_dir = lib_dir.expect("shared library not built");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "affcorr.h"
int main(void) {
    AffcorrEmotion e;
    if (affcorr_classify_tag("for the painfully alone", &e) != AFFCORR_STATUS_OK || e != AFFCORR_EMOTION_NEGATIVE) return 1;
    AffcorrModel *m = NULL;
    if (affcorr_model_load("/nonexistent.ckpt", &m) != AFFCORR_STATUS_IO || m != NULL) return 2;
    if (affcorr_last_error() == NULL) return 3;
    printf("%zu\n", affcorr_feature_dim());
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg("-L")
        .arg(&lib_dir)
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-laffcorr_ffi")
        .arg("-o")
        .arg(&exe)
        .status()
        .expect("a C compiler named cc");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "193");
}
