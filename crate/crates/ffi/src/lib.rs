//! C interface to `affcorr`.
//!
//! Every function returns an [`AffcorrStatus`]; on failure a description
//! is available from [`affcorr_last_error`] on the same thread. Models are
//! opaque handles that must be released with [`affcorr_model_free`]. A
//! loaded model is immutable, so one handle may be used from several
//! threads at once.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use affcorr::acpnet::{load_checkpoint, AcpModel, Modality};
use affcorr::audio::{resample_mono, Analyzer, AudioClip, FeatureConfig, SegmentSpec, FEATURE_DIM};
use affcorr::dataset::{classify_tag, regroup_image_label, Blocklist, EmotionClass};
use affcorr::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffcorrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Shape = 3,
    Format = 4,
    Io = 5,
    Data = 6,
    NoLabel = 7,
    BufferTooSmall = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffcorrModality {
    Image = 0,
    Music = 1,
}

/// Broad emotion classes. `None` marks a tag that maps to no class.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffcorrEmotion {
    None = -1,
    Positive = 0,
    Neutral = 1,
    Negative = 2,
}

/// A loaded correspondence model.
pub struct AffcorrModel {
    model: AcpModel<f32>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> AffcorrStatus {
    match err {
        Error::InvalidInput(_) | Error::Config(_) => AffcorrStatus::InvalidInput,
        Error::Shape(_) => AffcorrStatus::Shape,
        Error::Format(_) | Error::Wav(_) | Error::Json(_) | Error::Csv(_) => AffcorrStatus::Format,
        Error::Io(_) => AffcorrStatus::Io,
        Error::NoLabel => AffcorrStatus::NoLabel,
        Error::Data(_) | Error::Divergence { .. } => AffcorrStatus::Data,
        Error::State(_) => AffcorrStatus::Internal,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (AffcorrStatus, String)>) -> AffcorrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            AffcorrStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AffcorrStatus::Internal
        }
    }
}

fn lib(err: Error) -> (AffcorrStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (AffcorrStatus, String) {
    (AffcorrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(p: *const f32, len: usize, what: &str) -> Result<&'a [f32], (AffcorrStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (AffcorrStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (AffcorrStatus::InvalidInput, format!("{what} is not UTF-8")))
}

fn emotion(c: EmotionClass) -> AffcorrEmotion {
    match c {
        EmotionClass::Positive => AffcorrEmotion::Positive,
        EmotionClass::Neutral => AffcorrEmotion::Neutral,
        EmotionClass::Negative => AffcorrEmotion::Negative,
    }
}

/// Message describing the last failed call on this thread, or null. The
/// pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn affcorr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Length of a music feature vector.
#[no_mangle]
pub extern "C" fn affcorr_feature_dim() -> usize {
    FEATURE_DIM
}

/// Loads a checkpoint file into a new handle written to `out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn affcorr_model_load(path: *const c_char, out: *mut *mut AffcorrModel) -> AffcorrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = text(path, "path")?;
        let (model, _) = load_checkpoint(Path::new(path)).map_err(lib)?;
        *out = Box::into_raw(Box::new(AffcorrModel { model }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from `affcorr_model_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn affcorr_model_free(model: *mut AffcorrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input and embedding widths of a model.
///
/// # Safety
/// `model` must be a live handle; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn affcorr_model_dims(
    model: *const AffcorrModel,
    image_dim: *mut usize,
    music_dim: *mut usize,
    embed_dim: *mut usize,
) -> AffcorrStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let arch = m.model.architecture();
        for (p, v) in [(image_dim, arch.image_dim()), (music_dim, FEATURE_DIM), (embed_dim, arch.embed_dim())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Probability that an image embedding and a music feature vector share
/// an emotion class.
///
/// # Safety
/// `model` must be a live handle, the inputs must hold the given lengths
/// and `p_true` must be valid.
#[no_mangle]
pub unsafe extern "C" fn affcorr_predict(
    model: *const AffcorrModel,
    image: *const f32,
    image_len: usize,
    music: *const f32,
    music_len: usize,
    p_true: *mut f32,
) -> AffcorrStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if p_true.is_null() {
            return Err(null("p_true"));
        }
        let img = slice(image, image_len, "image")?;
        let mus = slice(music, music_len, "music")?;
        *p_true = m.model.acp_forward(img, mus).map_err(lib)?.p_true;
        Ok(())
    })
}

/// Embedding of one input in the shared space, written to `out`
/// (`out_len` must be at least the embedding width).
///
/// # Safety
/// `model` must be a live handle; `input` and `out` must hold the given lengths.
#[no_mangle]
pub unsafe extern "C" fn affcorr_embed(
    model: *const AffcorrModel,
    modality: AffcorrModality,
    input: *const f32,
    input_len: usize,
    out: *mut f32,
    out_len: usize,
) -> AffcorrStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let x = slice(input, input_len, "input")?;
        let modality = match modality {
            AffcorrModality::Image => Modality::Image,
            AffcorrModality::Music => Modality::Music,
        };
        let v = m.model.extract_embedding(modality, x).map_err(lib)?;
        if out_len < v.len() {
            return Err((AffcorrStatus::BufferTooSmall, format!("output holds {out_len} values, {} needed", v.len())));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, v.len()).copy_from_slice(&v);
        Ok(())
    })
}

/// Music features of one 60 s mono segment, written to `out` (at least
/// 193 values). Audio at other rates is resampled to 22050 Hz first.
///
/// # Safety
/// `samples` must hold `n_samples` values and `out` `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn affcorr_segment_features(
    samples: *const f32,
    n_samples: usize,
    sample_rate: u32,
    out: *mut f32,
    out_len: usize,
) -> AffcorrStatus {
    guard(|| {
        if out_len < FEATURE_DIM {
            return Err((AffcorrStatus::BufferTooSmall, format!("output holds {out_len} values, {FEATURE_DIM} needed")));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let x = slice(samples, n_samples, "samples")?;
        let cfg = FeatureConfig::default();
        let mut clip = AudioClip::new("segment", x.to_vec(), sample_rate).map_err(lib)?;
        if sample_rate != cfg.sample_rate {
            clip = resample_mono(&clip, cfg.sample_rate).map_err(lib)?;
        }
        let analyzer = Analyzer::new(cfg).map_err(lib)?;
        let v = analyzer.segment_features(&clip, &SegmentSpec::default()).map_err(lib)?.to_f32();
        std::slice::from_raw_parts_mut(out, FEATURE_DIM).copy_from_slice(&v);
        Ok(())
    })
}

/// Broad class of a fine-grained image emotion label such as "awe".
///
/// # Safety
/// `label` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn affcorr_regroup_image_label(label: *const c_char, out: *mut AffcorrEmotion) -> AffcorrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let label = text(label, "label")?;
        *out = emotion(regroup_image_label(label).map_err(lib)?);
        Ok(())
    })
}

/// Emotion class of a user tag, or `None` when it is unrelated or ambiguous.
///
/// # Safety
/// `tag` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn affcorr_classify_tag(tag: *const c_char, out: *mut AffcorrEmotion) -> AffcorrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let tag = text(tag, "tag")?;
        *out = classify_tag(tag, &Blocklist::default()).map_or(AffcorrEmotion::None, emotion);
        Ok(())
    })
}
