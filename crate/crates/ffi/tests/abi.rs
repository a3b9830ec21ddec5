//! Exercises the C ABI end to end from Rust: handle lifecycle, status codes,
//! error-message retrieval, and agreement with the core library.

use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::ptr;
use std::sync::Arc;

use qcorr_core::correlator;
use qcorr_core::engine::Engine;
use qcorr_core::models;
use qcorr_ffi::*;

fn last_error_string() -> String {
    let mut buf = vec![0u8; 256];
    let len = qcorr_last_error(buf.as_mut_ptr().cast::<c_char>(), buf.len());
    buf.truncate(len.min(buf.len() - 1));
    String::from_utf8(buf).unwrap()
}

fn builtin(name: &str) -> *mut QcorrModel {
    let name = CString::new(name).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(
        qcorr_model_builtin(name.as_ptr(), &mut model),
        QcorrStatus::Ok
    );
    assert!(!model.is_null());
    model
}

fn engine_for(model: *const QcorrModel) -> *mut QcorrEngine {
    let mut engine = ptr::null_mut();
    assert_eq!(qcorr_engine_new(model, &mut engine), QcorrStatus::Ok);
    assert!(!engine.is_null());
    engine
}

#[test]
fn version_is_a_static_string() {
    let version = unsafe { CStr::from_ptr(qcorr_version()) };
    let version = version.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_lifecycle_and_digest() {
    let model = builtin("jc");

    let mut buf = vec![0u8; 65];
    let len = qcorr_model_sha256(model, buf.as_mut_ptr().cast::<c_char>(), buf.len());
    assert_eq!(len, 64);
    let digest = std::str::from_utf8(&buf[..64]).unwrap();
    assert!(digest.chars().all(|c| c.is_ascii_hexdigit()));

    let reference = models::builtin_model("jc").unwrap();
    assert_eq!(digest, reference.sha256_hex());

    // Length query without copying.
    assert_eq!(qcorr_model_sha256(model, ptr::null_mut(), 0), 64);

    qcorr_model_free(model);
    qcorr_model_free(ptr::null_mut());
}

#[test]
fn channel_index_resolves_ids() {
    let model = builtin("jc");
    let id = CString::new("c1").unwrap();
    let mut index = usize::MAX;
    assert_eq!(
        qcorr_model_channel_index(model, id.as_ptr(), &mut index),
        QcorrStatus::Ok
    );
    assert_eq!(index, 1);

    let bogus = CString::new("nope").unwrap();
    assert_eq!(
        qcorr_model_channel_index(model, bogus.as_ptr(), &mut index),
        QcorrStatus::InvalidInput
    );
    assert!(last_error_string().contains("nope"));
    qcorr_model_free(model);
}

#[test]
fn correlators_match_the_core_library() {
    let model = builtin("jc");
    let engine = engine_for(model);
    // The engine holds its own reference; the model handle can go first.
    qcorr_model_free(model);

    let core_model = models::builtin_model("jc").unwrap();
    let core_engine = Engine::new(Arc::clone(&core_model));

    let mut value = f64::NAN;
    let mut undefined = true;
    assert_eq!(
        qcorr_etcf(engine, 2, 0.25, 0, 1, &mut value, &mut undefined),
        QcorrStatus::Ok
    );
    let expected = correlator::etcf(&core_engine, 2, 0.25, 0, 1).unwrap();
    assert_eq!(value, expected.value);
    assert!(!undefined);

    // The undefined flag is optional.
    assert_eq!(
        qcorr_etcf(engine, 3, 0.25, 0, 1, &mut value, ptr::null_mut()),
        QcorrStatus::Ok
    );
    let expected = correlator::etcf(&core_engine, 3, 0.25, 0, 1).unwrap();
    assert_eq!(value, expected.value);

    assert_eq!(
        qcorr_transmission(engine, 0.0, 0, 1, &mut value),
        QcorrStatus::Ok
    );
    let expected = correlator::transmission(&core_engine, 0.0, 0, 1).unwrap();
    assert_eq!(value, expected.value);

    assert_eq!(
        qcorr_etcf_same_channel(engine, 2, 0.1, 0, &mut value, &mut undefined),
        QcorrStatus::Ok
    );
    let expected = correlator::etcf_same_channel(&core_engine, 2, 0.1, 0).unwrap();
    assert_eq!(value, expected.value);

    assert_eq!(
        qcorr_transmission_same_channel(engine, 0.1, 0, &mut value),
        QcorrStatus::Ok
    );
    let expected = correlator::transmission_same_channel(&core_engine, 0.1, 0).unwrap();
    assert_eq!(value, expected.value);

    qcorr_engine_free(engine);
}

#[test]
fn multi_tone_and_cross_match_the_core_library() {
    let model = builtin("jc");
    let engine = engine_for(model);
    let core_model = models::builtin_model("jc").unwrap();
    let core_engine = Engine::new(Arc::clone(&core_model));

    let tones = [
        QcorrTone {
            channel: 0,
            amplitude_re: 1.0,
            amplitude_im: 0.0,
            frequency: 0.3,
        },
        QcorrTone {
            channel: 2,
            amplitude_re: 0.5,
            amplitude_im: 0.5,
            frequency: 0.3,
        },
    ];
    let mut value = f64::NAN;
    let mut undefined = true;
    assert_eq!(
        qcorr_etcf_multi(
            engine,
            2,
            tones.as_ptr(),
            tones.len(),
            1,
            0.0,
            &mut value,
            &mut undefined
        ),
        QcorrStatus::Ok
    );
    let expected = {
        use num_complex::Complex64 as C64;
        use qcorr_core::amplitude::DriveTone;
        let tones = [
            DriveTone {
                channel: 0,
                amplitude: C64::new(1.0, 0.0),
                frequency: 0.3,
            },
            DriveTone {
                channel: 2,
                amplitude: C64::new(0.5, 0.5),
                frequency: 0.3,
            },
        ];
        correlator::etcf_multi(&core_engine, 2, &tones, 1, 0.0).unwrap()
    };
    assert_eq!(value, expected.value);
    assert!(!undefined);

    assert_eq!(
        qcorr_transmission_multi(engine, tones.as_ptr(), 1, 1, &mut value, &mut undefined),
        QcorrStatus::Ok
    );
    let expected = correlator::transmission(&core_engine, 0.3, 0, 1).unwrap();
    assert!((value - expected.value).abs() <= 1e-12 * expected.value.abs());

    let outputs = [1usize, 3usize];
    assert_eq!(
        qcorr_cross_correlation(
            engine,
            outputs.as_ptr(),
            outputs.len(),
            0.2,
            0,
            &mut value,
            &mut undefined
        ),
        QcorrStatus::Ok
    );
    let expected = correlator::cross_correlation(&core_engine, &outputs, 0.2, 0).unwrap();
    assert_eq!(value, expected.value);

    qcorr_engine_free(engine);
}

#[test]
fn invalid_inputs_report_status_and_message() {
    let json = CString::new("{ not json").unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(
        qcorr_model_from_json(json.as_ptr(), &mut model),
        QcorrStatus::InvalidInput
    );
    assert!(model.is_null());
    assert!(!last_error_string().is_empty());

    let name = CString::new("no-such-model").unwrap();
    assert_eq!(
        qcorr_model_builtin(name.as_ptr(), &mut model),
        QcorrStatus::InvalidInput
    );
    assert!(last_error_string().contains("no-such-model"));

    // Null arguments are rejected rather than dereferenced.
    assert_eq!(
        qcorr_model_from_json(ptr::null(), &mut model),
        QcorrStatus::NullArgument
    );
    let mut value = 0.0;
    assert_eq!(
        qcorr_etcf(ptr::null(), 2, 0.0, 0, 1, &mut value, ptr::null_mut()),
        QcorrStatus::NullArgument
    );
    assert!(last_error_string().contains("null"));
}

#[test]
fn numerical_guards_surface_as_their_own_status() {
    let model = builtin("jc");
    let engine = engine_for(model);
    qcorr_model_free(model);

    // Order 1 is not a correlation order; distinct-channel misuse is input.
    let mut value = 0.0;
    assert_eq!(
        qcorr_etcf(engine, 1, 0.0, 0, 1, &mut value, ptr::null_mut()),
        QcorrStatus::InvalidInput
    );
    // Same channel on both ports of the distinct-channel entry point.
    assert_eq!(
        qcorr_etcf(engine, 2, 0.0, 0, 0, &mut value, ptr::null_mut()),
        QcorrStatus::InvalidInput
    );

    qcorr_engine_free(engine);
}
