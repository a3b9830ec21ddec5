//! C ABI over the correlation engine: opaque model/engine handles, status
//! codes mirroring the library's two error families, and a thread-local
//! last-error message. The header `include/qcorr.h` is generated from this
//! file by cbindgen at build time.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use qcorr_core::amplitude::DriveTone;
use qcorr_core::correlator::{self, CorrelatorResult};
use qcorr_core::engine::Engine;
use qcorr_core::error::Error;
use qcorr_core::model::SystemModel;
use qcorr_core::models;

/// Result of every fallible call. Non-zero codes leave a human-readable
/// message retrievable through `qcorr_last_error`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QcorrStatus {
    /// Success.
    Ok = 0,
    /// Malformed input: bad JSON, unknown identifiers, invalid requests.
    InvalidInput = 2,
    /// A numerical guard tripped during an otherwise valid computation.
    NumericalGuard = 3,
    /// A required pointer argument was null.
    NullArgument = 4,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 5,
    /// An internal invariant failed; the process state is still sound.
    Internal = 6,
}

/// Opaque validated system model.
pub struct QcorrModel {
    inner: Arc<SystemModel>,
}

/// Opaque correlation engine holding cached factorizations.
pub struct QcorrEngine {
    inner: Engine,
}

/// One coherent drive tone for the multi-tone entry points.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QcorrTone {
    /// Channel index the tone enters through.
    pub channel: usize,
    /// Real part of the relative coherent amplitude.
    pub amplitude_re: f64,
    /// Imaginary part of the relative coherent amplitude.
    pub amplitude_im: f64,
    /// Drive frequency.
    pub frequency: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn remember(message: &str) {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(err: &Error) -> QcorrStatus {
    remember(&err.to_string());
    match err.exit_code() {
        2 => QcorrStatus::InvalidInput,
        _ => QcorrStatus::NumericalGuard,
    }
}

fn guarded<F: FnOnce() -> QcorrStatus>(f: F) -> QcorrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            remember("internal panic");
            QcorrStatus::Internal
        }
    }
}

/// # Safety contract of the helpers below: pointers were null-checked by the
/// caller inside this module.
unsafe fn utf8<'a>(ptr: *const c_char) -> Result<&'a str, QcorrStatus> {
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        remember("string argument is not valid UTF-8");
        QcorrStatus::InvalidUtf8
    })
}

fn copy_out(text: &str, buf: *mut c_char, cap: usize) -> usize {
    let bytes = text.as_bytes();
    if !buf.is_null() && cap > 0 {
        let n = bytes.len().min(cap - 1);
        unsafe {
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
    }
    bytes.len()
}

macro_rules! require {
    ($($ptr:expr),+ $(,)?) => {
        $(
            if $ptr.is_null() {
                remember(concat!("null argument: ", stringify!($ptr)));
                return QcorrStatus::NullArgument;
            }
        )+
    };
}

fn store_result(result: CorrelatorResult, value: *mut f64, undefined: *mut bool) -> QcorrStatus {
    unsafe {
        *value = result.value;
        if !undefined.is_null() {
            *undefined = result.undefined;
        }
    }
    QcorrStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qcorr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the last error message of this thread into `buf` (truncating to
/// `cap - 1` bytes plus NUL) and return the full message length.
#[no_mangle]
pub extern "C" fn qcorr_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        copy_out(msg.to_str().unwrap_or(""), buf, cap)
    })
}

/// Parse and validate a model from its JSON description.
#[no_mangle]
pub extern "C" fn qcorr_model_from_json(
    json: *const c_char,
    out: *mut *mut QcorrModel,
) -> QcorrStatus {
    guarded(|| {
        require!(json, out);
        let text = match unsafe { utf8(json) } {
            Ok(t) => t,
            Err(status) => return status,
        };
        match SystemModel::from_json_str(text) {
            Ok(model) => {
                unsafe { *out = Box::into_raw(Box::new(QcorrModel { inner: model })) };
                QcorrStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Construct a named builtin model (see the library documentation for names).
#[no_mangle]
pub extern "C" fn qcorr_model_builtin(
    name: *const c_char,
    out: *mut *mut QcorrModel,
) -> QcorrStatus {
    guarded(|| {
        require!(name, out);
        let name = match unsafe { utf8(name) } {
            Ok(t) => t,
            Err(status) => return status,
        };
        match models::builtin_model(name) {
            Ok(model) => {
                unsafe { *out = Box::into_raw(Box::new(QcorrModel { inner: model })) };
                QcorrStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Release a model handle. Passing null is a no-op.
#[no_mangle]
pub extern "C" fn qcorr_model_free(model: *mut QcorrModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Resolve a channel id to its index.
#[no_mangle]
pub extern "C" fn qcorr_model_channel_index(
    model: *const QcorrModel,
    id: *const c_char,
    out: *mut usize,
) -> QcorrStatus {
    guarded(|| {
        require!(model, id, out);
        let id = match unsafe { utf8(id) } {
            Ok(t) => t,
            Err(status) => return status,
        };
        let model = unsafe { &*model };
        match model.inner.channel_id_to_index(id) {
            Ok(idx) => {
                unsafe { *out = idx };
                QcorrStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Copy the model's canonical SHA-256 hex digest into `buf` (65 bytes are
/// sufficient) and return the digest length.
#[no_mangle]
pub extern "C" fn qcorr_model_sha256(
    model: *const QcorrModel,
    buf: *mut c_char,
    cap: usize,
) -> usize {
    if model.is_null() {
        return 0;
    }
    let model = unsafe { &*model };
    copy_out(&model.inner.sha256_hex(), buf, cap)
}

/// Create a correlation engine for a model. The engine keeps its own
/// reference; the model handle may be freed independently.
#[no_mangle]
pub extern "C" fn qcorr_engine_new(
    model: *const QcorrModel,
    out: *mut *mut QcorrEngine,
) -> QcorrStatus {
    guarded(|| {
        require!(model, out);
        let model = unsafe { &*model };
        let engine = Engine::new(Arc::clone(&model.inner));
        unsafe { *out = Box::into_raw(Box::new(QcorrEngine { inner: engine })) };
        QcorrStatus::Ok
    })
}

/// Release an engine handle. Passing null is a no-op.
#[no_mangle]
pub extern "C" fn qcorr_engine_free(engine: *mut QcorrEngine) {
    if !engine.is_null() {
        drop(unsafe { Box::from_raw(engine) });
    }
}

/// Equal-time correlation `g⁽ⁿ⁾(0)` between distinct input and output
/// channels under a single weak tone at `omega_d`. `undefined` (optional)
/// reports dark points where the defining ratio degenerates; the value is
/// NaN there.
#[no_mangle]
pub extern "C" fn qcorr_etcf(
    engine: *const QcorrEngine,
    order: usize,
    omega_d: f64,
    in_channel: usize,
    out_channel: usize,
    value: *mut f64,
    undefined: *mut bool,
) -> QcorrStatus {
    guarded(|| {
        require!(engine, value);
        let engine = unsafe { &*engine };
        match correlator::etcf(&engine.inner, order, omega_d, in_channel, out_channel) {
            Ok(result) => store_result(result, value, undefined),
            Err(err) => fail(&err),
        }
    })
}

/// Single-photon transmission between distinct channels.
#[no_mangle]
pub extern "C" fn qcorr_transmission(
    engine: *const QcorrEngine,
    omega_d: f64,
    in_channel: usize,
    out_channel: usize,
    value: *mut f64,
) -> QcorrStatus {
    guarded(|| {
        require!(engine, value);
        let engine = unsafe { &*engine };
        match correlator::transmission(&engine.inner, omega_d, in_channel, out_channel) {
            Ok(result) => store_result(result, value, std::ptr::null_mut()),
            Err(err) => fail(&err),
        }
    })
}

/// Equal-time correlation of the driven channel itself (transmitted drive
/// interfering with the re-emitted field).
#[no_mangle]
pub extern "C" fn qcorr_etcf_same_channel(
    engine: *const QcorrEngine,
    order: usize,
    omega_d: f64,
    channel: usize,
    value: *mut f64,
    undefined: *mut bool,
) -> QcorrStatus {
    guarded(|| {
        require!(engine, value);
        let engine = unsafe { &*engine };
        match correlator::etcf_same_channel(&engine.inner, order, omega_d, channel) {
            Ok(result) => store_result(result, value, undefined),
            Err(err) => fail(&err),
        }
    })
}

/// Transmission of the driven channel itself.
#[no_mangle]
pub extern "C" fn qcorr_transmission_same_channel(
    engine: *const QcorrEngine,
    omega_d: f64,
    channel: usize,
    value: *mut f64,
) -> QcorrStatus {
    guarded(|| {
        require!(engine, value);
        let engine = unsafe { &*engine };
        match correlator::transmission_same_channel(&engine.inner, omega_d, channel) {
            Ok(result) => store_result(result, value, std::ptr::null_mut()),
            Err(err) => fail(&err),
        }
    })
}

fn collect_tones(tones: *const QcorrTone, n_tones: usize) -> Vec<DriveTone> {
    if n_tones == 0 {
        return Vec::new();
    }
    unsafe { std::slice::from_raw_parts(tones, n_tones) }
        .iter()
        .map(|t| DriveTone {
            channel: t.channel,
            amplitude: C64::new(t.amplitude_re, t.amplitude_im),
            frequency: t.frequency,
        })
        .collect()
}

/// Equal-time correlation under several simultaneous tones, observed at time
/// `t` (the value is `t`-independent when all tone frequencies agree).
#[no_mangle]
pub extern "C" fn qcorr_etcf_multi(
    engine: *const QcorrEngine,
    order: usize,
    tones: *const QcorrTone,
    n_tones: usize,
    out_channel: usize,
    t: f64,
    value: *mut f64,
    undefined: *mut bool,
) -> QcorrStatus {
    guarded(|| {
        require!(engine, tones, value);
        let engine = unsafe { &*engine };
        let tones = collect_tones(tones, n_tones);
        match correlator::etcf_multi(&engine.inner, order, &tones, out_channel, t) {
            Ok(result) => store_result(result, value, undefined),
            Err(err) => fail(&err),
        }
    })
}

/// Transmission under several equal-frequency tones.
#[no_mangle]
pub extern "C" fn qcorr_transmission_multi(
    engine: *const QcorrEngine,
    tones: *const QcorrTone,
    n_tones: usize,
    out_channel: usize,
    value: *mut f64,
    undefined: *mut bool,
) -> QcorrStatus {
    guarded(|| {
        require!(engine, tones, value);
        let engine = unsafe { &*engine };
        let tones = collect_tones(tones, n_tones);
        match correlator::transmission_multi(&engine.inner, &tones, out_channel) {
            Ok(result) => store_result(result, value, undefined),
            Err(err) => fail(&err),
        }
    })
}

/// Cross-correlation across `n_outputs` readout channels under a single tone
/// entering `in_channel` (which must not be among the outputs).
#[no_mangle]
pub extern "C" fn qcorr_cross_correlation(
    engine: *const QcorrEngine,
    outputs: *const usize,
    n_outputs: usize,
    omega_d: f64,
    in_channel: usize,
    value: *mut f64,
    undefined: *mut bool,
) -> QcorrStatus {
    guarded(|| {
        require!(engine, outputs, value);
        let engine = unsafe { &*engine };
        let outputs = unsafe { std::slice::from_raw_parts(outputs, n_outputs) };
        match correlator::cross_correlation(&engine.inner, outputs, omega_d, in_channel) {
            Ok(result) => store_result(result, value, undefined),
            Err(err) => fail(&err),
        }
    })
}
