//! C ABI over the slicefed detectors and statistics.
//!
//! Every fallible call returns an [`SfStatus`]; on failure a message is
//! available from [`sf_last_error`] on the same thread. Models are opaque
//! [`SfModel`] handles released with [`sf_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use slicefed::analytics::{anova_oneway, cosine_divergence, f_survival, roc_auc, AnalyticsError};
use slicefed::artifact::{ModelArtifact, Predictor, SavedModel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Dimension = 4,
    Degenerate = 5,
    Io = 6,
    Panic = 7,
}

/// A loaded detector.
pub struct SfModel {
    predictor: Predictor,
    schema_hash: CString,
}

/// One-way ANOVA table.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SfAnova {
    pub df_model: usize,
    pub df_error: usize,
    pub ss_model: f64,
    pub ss_error: f64,
    pub ss_total: f64,
    pub ms_model: f64,
    pub ms_error: f64,
    pub f_value: f64,
    pub p_value: f64,
    pub r_square: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn fail(status: SfStatus, msg: impl Into<String>) -> SfStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> SfStatus) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == SfStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(SfStatus::Panic, "internal panic"),
    }
}

fn analytics_status(e: &AnalyticsError) -> SfStatus {
    match e {
        AnalyticsError::LengthMismatch(..) => SfStatus::Dimension,
        AnalyticsError::Invalid(_) => SfStatus::InvalidArgument,
        _ => SfStatus::Degenerate,
    }
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn slice<'a, T>(ptr: *const T, len: usize) -> Option<&'a [T]> {
    if len == 0 {
        return Some(&[]);
    }
    if ptr.is_null() {
        return None;
    }
    // SAFETY: non-null and the caller vouches for `len` elements.
    Some(unsafe { std::slice::from_raw_parts(ptr, len) })
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn sf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn model_from_text(text: &str) -> Result<SfModel, String> {
    // a model file from `slicefed train`, or bare model JSON from the registry
    let (model, schema) = match ModelArtifact::from_json(text) {
        Ok(a) => (a.model, a.schema_hash),
        Err(_) => (SavedModel::from_bytes(text.as_bytes()).map_err(|e| e.to_string())?, String::new()),
    };
    let predictor = model.predictor().map_err(|e| e.to_string())?;
    Ok(SfModel {
        predictor,
        schema_hash: CString::new(schema).map_err(|e| e.to_string())?,
    })
}

/// Parses a model from a NUL-terminated JSON string.
///
/// # Safety
/// `json` must be a valid C string; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn sf_model_from_json(json: *const c_char, out: *mut *mut SfModel) -> SfStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(SfStatus::NullPointer, "null argument");
        }
        // SAFETY: checked non-null; caller guarantees termination.
        let Ok(text) = unsafe { CStr::from_ptr(json) }.to_str() else {
            return fail(SfStatus::Parse, "model JSON is not UTF-8");
        };
        match model_from_text(text) {
            Ok(m) => {
                // SAFETY: checked non-null.
                unsafe { *out = Box::into_raw(Box::new(m)) };
                SfStatus::Ok
            }
            Err(e) => fail(SfStatus::Parse, e),
        }
    })
}

/// Loads a model file.
///
/// # Safety
/// `path` must be a valid C string; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn sf_model_load(path: *const c_char, out: *mut *mut SfModel) -> SfStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(SfStatus::NullPointer, "null argument");
        }
        // SAFETY: checked non-null; caller guarantees termination.
        let Ok(p) = unsafe { CStr::from_ptr(path) }.to_str() else {
            return fail(SfStatus::InvalidArgument, "path is not UTF-8");
        };
        let text = match std::fs::read_to_string(Path::new(p)) {
            Ok(t) => t,
            Err(e) => return fail(SfStatus::Io, format!("{p}: {e}")),
        };
        match model_from_text(&text) {
            Ok(m) => {
                // SAFETY: checked non-null.
                unsafe { *out = Box::into_raw(Box::new(m)) };
                SfStatus::Ok
            }
            Err(e) => fail(SfStatus::Parse, format!("{p}: {e}")),
        }
    })
}

/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sf_model_free(model: *mut SfModel) {
    if !model.is_null() {
        // SAFETY: the handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Feature count the model expects; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_model_n_features(model: *const SfModel) -> usize {
    // SAFETY: caller guarantees a live handle or null.
    unsafe { model.as_ref() }.map_or(0, |m| m.predictor.n_features())
}

/// Schema digest the model was trained against; empty when unknown.
/// Owned by the handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_model_schema_hash(model: *const SfModel) -> *const c_char {
    // SAFETY: caller guarantees a live handle or null.
    unsafe { model.as_ref() }.map_or(std::ptr::null(), |m| m.schema_hash.as_ptr())
}

/// Scores one feature vector. `label` is 1 (malignant) when the score is
/// at least 0.5. Either output may be null.
///
/// # Safety
/// `model` must be a live handle, `features` valid for `n` reads, and
/// non-null outputs valid for a write.
#[no_mangle]
pub unsafe extern "C" fn sf_model_predict(
    model: *const SfModel,
    features: *const f64,
    n: usize,
    score: *mut f64,
    label: *mut u8,
) -> SfStatus {
    guard(|| {
        // SAFETY: caller guarantees a live handle or null.
        let Some(m) = (unsafe { model.as_ref() }) else {
            return fail(SfStatus::NullPointer, "null model");
        };
        // SAFETY: caller guarantees `n` readable values.
        let Some(x) = (unsafe { slice(features, n) }) else {
            return fail(SfStatus::NullPointer, "null features");
        };
        if x.len() != m.predictor.n_features() {
            return fail(
                SfStatus::Dimension,
                format!("expected {} features, got {}", m.predictor.n_features(), x.len()),
            );
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return fail(SfStatus::InvalidArgument, format!("feature {i} is not finite"));
        }
        let s = m.predictor.score_unchecked(x);
        // SAFETY: outputs are null or writable.
        unsafe {
            if !score.is_null() {
                *score = s;
            }
            if !label.is_null() {
                *label = u8::from(s >= 0.5);
            }
        }
        SfStatus::Ok
    })
}

/// One-way ANOVA. `values` holds the groups back to back; `group_sizes`
/// gives each group's length.
///
/// # Safety
/// `group_sizes` valid for `n_groups` reads, `values` for their sum, `out` for a write.
#[no_mangle]
pub unsafe extern "C" fn sf_anova_oneway(
    values: *const f64,
    group_sizes: *const usize,
    n_groups: usize,
    out: *mut SfAnova,
) -> SfStatus {
    guard(|| {
        if out.is_null() {
            return fail(SfStatus::NullPointer, "null output");
        }
        // SAFETY: caller guarantees `n_groups` sizes.
        let Some(sizes) = (unsafe { slice(group_sizes, n_groups) }) else {
            return fail(SfStatus::NullPointer, "null group sizes");
        };
        let Some(total) = sizes.iter().try_fold(0usize, |a, &b| a.checked_add(b)) else {
            return fail(SfStatus::InvalidArgument, "group sizes overflow");
        };
        // SAFETY: caller guarantees `total` values.
        let Some(flat) = (unsafe { slice(values, total) }) else {
            return fail(SfStatus::NullPointer, "null values");
        };
        let mut groups = Vec::with_capacity(n_groups);
        let mut at = 0;
        for &s in sizes {
            groups.push(flat[at..at + s].to_vec());
            at += s;
        }
        match anova_oneway(&groups) {
            Ok(r) => {
                // SAFETY: checked non-null.
                unsafe {
                    *out = SfAnova {
                        df_model: r.df_model,
                        df_error: r.df_error,
                        ss_model: r.ss_model,
                        ss_error: r.ss_error,
                        ss_total: r.ss_total,
                        ms_model: r.ms_model,
                        ms_error: r.ms_error,
                        f_value: r.f_value,
                        p_value: r.p_value,
                        r_square: r.r_square,
                    }
                };
                SfStatus::Ok
            }
            Err(e) => fail(analytics_status(&e), e.to_string()),
        }
    })
}

/// Upper-tail probability of the F distribution; NaN for non-positive degrees of freedom.
#[no_mangle]
pub extern "C" fn sf_f_survival(f: f64, df1: f64, df2: f64) -> f64 {
    if !(df1 > 0.0 && df2 > 0.0) || f.is_nan() {
        return f64::NAN;
    }
    f_survival(f, df1, df2)
}

/// Area under the ROC curve; labels are 0 or 1.
///
/// # Safety
/// `scores` and `labels` valid for `n` reads, `auc` for a write.
#[no_mangle]
pub unsafe extern "C" fn sf_roc_auc(scores: *const f64, labels: *const u8, n: usize, auc: *mut f64) -> SfStatus {
    guard(|| {
        // SAFETY: caller guarantees `n` readable values in each array.
        let (Some(s), Some(l)) = (unsafe { slice(scores, n) }, unsafe { slice(labels, n) }) else {
            return fail(SfStatus::NullPointer, "null input");
        };
        if auc.is_null() {
            return fail(SfStatus::NullPointer, "null output");
        }
        if l.iter().any(|&x| x > 1) {
            return fail(SfStatus::InvalidArgument, "labels must be 0 or 1");
        }
        match roc_auc(s, l) {
            Ok(r) => {
                // SAFETY: checked non-null.
                unsafe { *auc = r.auc };
                SfStatus::Ok
            }
            Err(e) => fail(analytics_status(&e), e.to_string()),
        }
    })
}

/// `1 - cos(u, v)`.
///
/// # Safety
/// `u` and `v` valid for `n` reads, `out` for a write.
#[no_mangle]
pub unsafe extern "C" fn sf_cosine_divergence(u: *const f64, v: *const f64, n: usize, out: *mut f64) -> SfStatus {
    guard(|| {
        // SAFETY: caller guarantees `n` readable values in each array.
        let (Some(a), Some(b)) = (unsafe { slice(u, n) }, unsafe { slice(v, n) }) else {
            return fail(SfStatus::NullPointer, "null input");
        };
        if out.is_null() {
            return fail(SfStatus::NullPointer, "null output");
        }
        match cosine_divergence(a, b) {
            Ok(d) => {
                // SAFETY: checked non-null.
                unsafe { *out = d };
                SfStatus::Ok
            }
            Err(e) => fail(analytics_status(&e), e.to_string()),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> String {
        // SAFETY: sf_last_error always returns a live C string.
        unsafe { CStr::from_ptr(sf_last_error()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn f_survival_rejects_bad_df() {
        assert!(sf_f_survival(1.0, 0.0, 3.0).is_nan());
        assert_eq!(sf_f_survival(0.0, 3.0, 24.0), 1.0);
    }

    #[test]
    fn errors_set_and_clear_message() {
        let mut auc = 0.0;
        let s = unsafe { sf_roc_auc([0.1, 0.2].as_ptr(), [1u8, 1].as_ptr(), 2, &mut auc) };
        assert_eq!(s, SfStatus::Degenerate);
        assert!(last_error().contains("single class"));
        let s = unsafe { sf_roc_auc([0.1, 0.2].as_ptr(), [0u8, 1].as_ptr(), 2, &mut auc) };
        assert_eq!((s, auc), (SfStatus::Ok, 1.0));
        assert_eq!(last_error(), "");
    }

    #[test]
    fn null_pointers_are_reported() {
        let mut out = std::ptr::null_mut();
        assert_eq!(unsafe { sf_model_from_json(std::ptr::null(), &mut out) }, SfStatus::NullPointer);
        assert_eq!(unsafe { sf_model_n_features(std::ptr::null()) }, 0);
        unsafe { sf_model_free(std::ptr::null_mut()) };
    }
}
