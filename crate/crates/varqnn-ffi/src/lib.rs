//! C ABI over the model loader and evaluator.
//!
//! Handles are opaque pointers owned by the caller and released with
//! `varqnn_model_free`. Every fallible call returns a status code; the
//! message for the most recent failure on the current thread is available
//! through `varqnn_last_error`. The matching declarations live in
//! `include/varqnn.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use varqnn::output::{read_model, SavedModel};
use varqnn::qnn::{self, EvalMode};
use varqnn::rng::RngStream;
use varqnn::Error;

/// Status codes mirroring the CLI exit codes.
pub const VARQNN_OK: i32 = 0;
pub const VARQNN_ERR_VALIDATION: i32 = 1;
pub const VARQNN_ERR_NUMERIC: i32 = 2;
pub const VARQNN_ERR_IO: i32 = 3;
/// Null pointer or malformed string argument.
pub const VARQNN_ERR_ARGUMENT: i32 = 4;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn code_of(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => VARQNN_ERR_IO,
        Error::NonFinite { .. } => VARQNN_ERR_NUMERIC,
        _ => VARQNN_ERR_VALIDATION,
    }
}

fn fail(err: Error) -> i32 {
    let code = code_of(&err);
    set_error(&err.to_string());
    code
}

fn fail_argument(message: &str) -> i32 {
    set_error(message);
    VARQNN_ERR_ARGUMENT
}

/// Opaque handle to a loaded model.
pub struct VarqnnModel {
    model: SavedModel,
}

/// Copy the message for the current thread's most recent error into `buf`
/// (NUL-terminated, truncated to `cap` bytes). Returns the full message
/// length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null (length query).
#[no_mangle]
pub unsafe extern "C" fn varqnn_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Load a model file written by the `train` command. Returns null on
/// failure; inspect `varqnn_last_error` for the reason.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn varqnn_model_load(path: *const c_char) -> *mut VarqnnModel {
    if path.is_null() {
        fail_argument("path is null");
        return ptr::null_mut();
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => s,
        Err(_) => {
            fail_argument("path is not valid UTF-8");
            return ptr::null_mut();
        }
    };
    match read_model(Path::new(path)) {
        Ok(model) => Box::into_raw(Box::new(VarqnnModel { model })),
        Err(err) => {
            fail(err);
            ptr::null_mut()
        }
    }
}

/// Release a handle returned by `varqnn_model_load`. Null is a no-op.
///
/// # Safety
/// `handle` must be a pointer from `varqnn_model_load`, freed once.
#[no_mangle]
pub unsafe extern "C" fn varqnn_model_free(handle: *mut VarqnnModel) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of input features the model expects, or -1 for a null handle.
///
/// # Safety
/// `handle` must be a live pointer from `varqnn_model_load` or null.
#[no_mangle]
pub unsafe extern "C" fn varqnn_model_n_features(handle: *const VarqnnModel) -> i32 {
    match handle.as_ref() {
        Some(h) => h.model.layout.n_features as i32,
        None => -1,
    }
}

unsafe fn evaluate_impl(
    handle: *const VarqnnModel,
    x: *const f64,
    x_len: usize,
    mode: EvalMode,
    out_value: *mut f64,
    out_variance: *mut f64,
) -> i32 {
    let Some(h) = handle.as_ref() else {
        return fail_argument("model handle is null");
    };
    if x.is_null() && x_len > 0 {
        return fail_argument("x is null");
    }
    if out_value.is_null() || out_variance.is_null() {
        return fail_argument("output pointer is null");
    }
    let x = std::slice::from_raw_parts(x, x_len);
    match qnn::evaluate(&h.model.layout, &h.model.params, x, mode) {
        Ok(r) => {
            *out_value = r.value;
            *out_variance = r.variance;
            VARQNN_OK
        }
        Err(err) => fail(err),
    }
}

/// Exact model output and outcome variance at input `x`.
///
/// # Safety
/// `x` must point to `x_len` doubles; `out_value` and `out_variance`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn varqnn_model_evaluate(
    handle: *const VarqnnModel,
    x: *const f64,
    x_len: usize,
    out_value: *mut f64,
    out_variance: *mut f64,
) -> i32 {
    evaluate_impl(handle, x, x_len, EvalMode::Exact, out_value, out_variance)
}

/// Shot-sampled model output; deterministic for a given seed.
///
/// # Safety
/// Same contract as `varqnn_model_evaluate`.
#[no_mangle]
pub unsafe extern "C" fn varqnn_model_evaluate_shots(
    handle: *const VarqnnModel,
    x: *const f64,
    x_len: usize,
    shots: u64,
    seed: u64,
    out_value: *mut f64,
    out_variance: *mut f64,
) -> i32 {
    let mode = EvalMode::Shots {
        shots,
        stream: RngStream::new(seed, (0, 0)),
    };
    evaluate_impl(handle, x, x_len, mode, out_value, out_variance)
}

/// Tabulate the single-qubit encoding curve T_phi over `grid`, writing
/// `len` values to `out`.
///
/// # Safety
/// `grid` and `out` must each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn varqnn_chebyshev(
    phi: f64,
    grid: *const f64,
    len: usize,
    out: *mut f64,
) -> i32 {
    if (grid.is_null() || out.is_null()) && len > 0 {
        return fail_argument("grid or out is null");
    }
    let grid = std::slice::from_raw_parts(grid, len);
    match qnn::chebyshev_curve(phi, grid) {
        Ok(values) => {
            ptr::copy_nonoverlapping(values.as_ptr(), out, len);
            VARQNN_OK
        }
        Err(err) => fail(err),
    }
}
