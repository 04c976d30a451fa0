//! Exercises the C ABI surface through the Rust side of the boundary.

use std::ffi::CString;

use varqnn::output::{write_model, SavedModel};
use varqnn::qnn::{self, CircuitLayout, CostKind, Entangling, EvalMode, ModelParams};
use varqnn_ffi::*;

fn sample_model_file(dir: &std::path::Path) -> (std::path::PathBuf, SavedModel) {
    let layout = CircuitLayout::new(3, 2, Entangling::Circular, 1).unwrap();
    let model = SavedModel {
        beta_encoding: 2.0,
        params: ModelParams::init(&layout, CostKind::SumZ, 2.0, 5),
        layout,
    };
    let path = dir.join("model.txt");
    write_model(&path, &model).unwrap();
    (path, model)
}

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let len = unsafe { varqnn_last_error(buf.as_mut_ptr().cast(), buf.len()) };
    buf.truncate(len.min(buf.len() - 1));
    String::from_utf8_lossy(&buf).into_owned()
}

#[test]
fn load_evaluate_free_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let (path, model) = sample_model_file(tmp.path());
    let c_path = CString::new(path.to_str().unwrap()).unwrap();

    let handle = unsafe { varqnn_model_load(c_path.as_ptr()) };
    assert!(!handle.is_null(), "load failed: {}", last_error());
    assert_eq!(unsafe { varqnn_model_n_features(handle) }, 1);

    let x = [0.3f64];
    let (mut value, mut variance) = (f64::NAN, f64::NAN);
    let code =
        unsafe { varqnn_model_evaluate(handle, x.as_ptr(), 1, &mut value, &mut variance) };
    assert_eq!(code, VARQNN_OK);

    let expected = qnn::evaluate(&model.layout, &model.params, &x, EvalMode::Exact).unwrap();
    approx::assert_abs_diff_eq!(value, expected.value, epsilon = 1e-12);
    approx::assert_abs_diff_eq!(variance, expected.variance, epsilon = 1e-12);

    unsafe { varqnn_model_free(handle) };
}

#[test]
fn shot_evaluation_is_seed_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (path, _) = sample_model_file(tmp.path());
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let handle = unsafe { varqnn_model_load(c_path.as_ptr()) };
    assert!(!handle.is_null());

    let x = [0.1f64];
    let run = |seed: u64| {
        let (mut v, mut s2) = (0.0, 0.0);
        let code = unsafe {
            varqnn_model_evaluate_shots(handle, x.as_ptr(), 1, 500, seed, &mut v, &mut s2)
        };
        assert_eq!(code, VARQNN_OK);
        (v, s2)
    };
    assert_eq!(run(7), run(7));
    assert_ne!(run(7), run(8));
    unsafe { varqnn_model_free(handle) };
}

#[test]
fn errors_set_codes_and_messages() {
    let c_path = CString::new("/nonexistent/model.txt").unwrap();
    let handle = unsafe { varqnn_model_load(c_path.as_ptr()) };
    assert!(handle.is_null());
    assert!(last_error().contains("nonexistent"));

    let null_handle = unsafe { varqnn_model_load(std::ptr::null()) };
    assert!(null_handle.is_null());

    let (mut v, mut s2) = (0.0, 0.0);
    let code = unsafe {
        varqnn_model_evaluate(std::ptr::null(), std::ptr::null(), 0, &mut v, &mut s2)
    };
    assert_eq!(code, VARQNN_ERR_ARGUMENT);
}

#[test]
fn input_outside_domain_is_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (path, _) = sample_model_file(tmp.path());
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let handle = unsafe { varqnn_model_load(c_path.as_ptr()) };
    let x = [1.5f64];
    let (mut v, mut s2) = (0.0, 0.0);
    let code = unsafe { varqnn_model_evaluate(handle, x.as_ptr(), 1, &mut v, &mut s2) };
    assert_eq!(code, VARQNN_ERR_VALIDATION);
    unsafe { varqnn_model_free(handle) };
}

#[test]
fn chebyshev_matches_library_curve() {
    let grid: Vec<f64> = (0..50).map(|i| -0.98 + i as f64 * 0.04).collect();
    let mut out = vec![0.0f64; grid.len()];
    let code = unsafe { varqnn_chebyshev(2.5, grid.as_ptr(), grid.len(), out.as_mut_ptr()) };
    assert_eq!(code, VARQNN_OK);
    let expected = qnn::chebyshev_curve(2.5, &grid).unwrap();
    for (a, b) in out.iter().zip(&expected) {
        approx::assert_abs_diff_eq!(a, b, epsilon = 1e-14);
    }
}
