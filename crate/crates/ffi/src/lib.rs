//! C interface to the structured-null Mapper community test.
//!
//! The surface follows plain C conventions so any language with a C FFI
//! can bind it: datasets and results are opaque handles created and freed
//! here, every fallible call returns a [`cm_status`] code, and the most
//! recent failure message on the calling thread is readable through
//! [`cm_last_error_message`]. The generated header is committed at
//! `include/covmapper.h`.
//!
//! Ownership: every handle produced by `cm_dataset_new`,
//! `cm_dataset_from_csv`, or `cm_run_test` must be released with the
//! matching `*_free`; strings returned through `char **` outputs belong to
//! the caller until passed to `cm_string_free`. Handles carry no locks,
//! so share one across threads only behind the caller's own
//! synchronization.

#![allow(non_camel_case_types)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use covmapper::csvio::read_csv;
use covmapper::report::report_json;
use covmapper::simulation::scenario_pipeline_config;
use covmapper::{run_structured_null_test, DataMatrix, Error, NullTestResult, PipelineConfig};
use nalgebra::DMatrix;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum cm_status {
    CM_OK = 0,
    /// A required pointer argument was null.
    CM_NULL_POINTER = 1,
    /// A parameter or configuration value was malformed.
    CM_INVALID_ARGUMENT = 2,
    /// The data matrix was unusable: too small, non-finite, or ragged.
    CM_INVALID_DATA = 3,
    /// A numeric stage degenerated: covariance, filters, or null spread.
    CM_NUMERIC_ERROR = 4,
    /// Reading an input file failed.
    CM_IO_ERROR = 5,
    /// A string argument was not valid UTF-8.
    CM_UTF8_ERROR = 6,
    /// An internal invariant failed; existing handles remain valid.
    CM_PANIC = 7,
}

/// Opaque handle over an n x p feature matrix.
pub struct cm_dataset(DataMatrix);

/// Opaque handle over one full test outcome.
pub struct cm_result(NullTestResult);

/// Flat numeric summary of a test result. Quantities the run skipped or
/// could not standardize are NaN: `z` when the null samples had no
/// spread, the `_excl` entries when singleton-excluded reporting was off,
/// and the permutation entries when that baseline did not run.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct cm_summary {
    pub n_points: usize,
    pub n_features: usize,
    pub n_vertices: usize,
    pub n_edges: usize,
    pub n_communities: usize,
    pub n_replicates: usize,
    pub d_obs: f64,
    pub z: f64,
    pub p_hat: f64,
    pub d_obs_excl: f64,
    pub z_excl: f64,
    pub p_hat_excl: f64,
    pub z_permutation: f64,
    pub z_permutation_excl: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    // Interior NULs cannot occur in our own messages; replace defensively
    // rather than lose the message.
    let bytes: Vec<u8> = msg
        .bytes()
        .map(|b| if b == 0 { b' ' } else { b })
        .collect();
    let c = CString::new(bytes).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> cm_status {
    match err {
        Error::InvalidData(_) | Error::Dimension(_) => cm_status::CM_INVALID_DATA,
        Error::InvalidParameter(_) | Error::Config(_) | Error::Json(_) => {
            cm_status::CM_INVALID_ARGUMENT
        }
        Error::Io(_) | Error::Csv(_) => cm_status::CM_IO_ERROR,
        _ => cm_status::CM_NUMERIC_ERROR,
    }
}

fn fail(err: &Error) -> cm_status {
    set_error(&err.to_string());
    status_of(err)
}

/// Runs `f`, converting a panic into `CM_PANIC` instead of unwinding
/// across the C boundary.
fn guarded<F: FnOnce() -> cm_status>(f: F) -> cm_status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            cm_status::CM_PANIC
        }
    }
}

fn null_pointer() -> cm_status {
    set_error("null pointer argument");
    cm_status::CM_NULL_POINTER
}

unsafe fn c_str<'a>(ptr: *const c_char) -> Result<&'a str, cm_status> {
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(s),
        Err(_) => {
            set_error("string argument is not valid UTF-8");
            Err(cm_status::CM_UTF8_ERROR)
        }
    }
}

fn string_out(s: String, out: *mut *mut c_char) -> cm_status {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            cm_status::CM_OK
        }
        Err(_) => {
            set_error("produced string contains an interior NUL");
            cm_status::CM_INVALID_DATA
        }
    }
}

/// Returns the library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cm_version() -> *const c_char {
    const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Returns the message from the most recent failure on this thread, or an
/// empty string. The pointer stays valid until the next failing call on
/// the same thread.
#[no_mangle]
pub extern "C" fn cm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a dataset from a row-major buffer of `n * p` finite values.
/// Feature and row labels are generated positionally.
///
/// # Safety
/// `values` must point to at least `n * p` readable doubles and `out` to a
/// writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn cm_dataset_new(
    values: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut cm_dataset,
) -> cm_status {
    guarded(|| {
        if values.is_null() || out.is_null() {
            return null_pointer();
        }
        let Some(len) = n.checked_mul(p) else {
            set_error("n * p overflows");
            return cm_status::CM_INVALID_ARGUMENT;
        };
        let slice = unsafe { std::slice::from_raw_parts(values, len) };
        match DataMatrix::from_values(DMatrix::from_row_slice(n, p, slice)) {
            Ok(m) => {
                unsafe { *out = Box::into_raw(Box::new(cm_dataset(m))) };
                cm_status::CM_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// Loads a dataset from a CSV file. The first row must name the columns,
/// the first column holds row ids, and every other column is a numeric
/// feature with no missing cells.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer
/// slot.
#[no_mangle]
pub unsafe extern "C" fn cm_dataset_from_csv(
    path: *const c_char,
    out: *mut *mut cm_dataset,
) -> cm_status {
    guarded(|| {
        if path.is_null() || out.is_null() {
            return null_pointer();
        }
        let path = match unsafe { c_str(path) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let table = match read_csv(Path::new(path)) {
            Ok(t) => t,
            Err(e) => return fail(&e),
        };
        match table.feature_matrix(&[]) {
            Ok(m) => {
                unsafe { *out = Box::into_raw(Box::new(cm_dataset(m))) };
                cm_status::CM_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// Writes the dataset shape: rows to `n`, features to `p`.
///
/// # Safety
/// `dataset` must be a live handle from this library; `n` and `p` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cm_dataset_shape(
    dataset: *const cm_dataset,
    n: *mut usize,
    p: *mut usize,
) -> cm_status {
    guarded(|| {
        if dataset.is_null() || n.is_null() || p.is_null() {
            return null_pointer();
        }
        let data = unsafe { &(*dataset).0 };
        unsafe {
            *n = data.n();
            *p = data.p();
        }
        cm_status::CM_OK
    })
}

/// Frees a dataset handle. Null is ignored.
///
/// # Safety
/// `dataset` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn cm_dataset_free(dataset: *mut cm_dataset) {
    if !dataset.is_null() {
        drop(unsafe { Box::from_raw(dataset) });
    }
}

/// Writes a ready-to-edit JSON configuration to `out`: two principal
/// coordinate filters on a 15 x 15 equalized cover at gain 2.0, odd/even
/// feature split, ridge covariance repair, the given replicate count and
/// seed, and no permutation baseline. Free the string with
/// `cm_string_free`.
///
/// # Safety
/// `out` must be a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn cm_default_config_json(
    n_replicates: usize,
    base_seed: u64,
    out: *mut *mut c_char,
) -> cm_status {
    guarded(|| {
        if out.is_null() {
            return null_pointer();
        }
        let config = scenario_pipeline_config(n_replicates, base_seed);
        match serde_json::to_string_pretty(&config) {
            Ok(s) => string_out(s, out),
            Err(e) => fail(&Error::from(e)),
        }
    })
}

/// Runs the structured-null community test. `config_json` uses the same
/// schema `cm_default_config_json` emits; external filters must inline
/// their values since no file context exists here.
///
/// # Safety
/// `dataset` must be a live handle, `config_json` a NUL-terminated string,
/// and `out` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn cm_run_test(
    dataset: *const cm_dataset,
    config_json: *const c_char,
    out: *mut *mut cm_result,
) -> cm_status {
    guarded(|| {
        if dataset.is_null() || config_json.is_null() || out.is_null() {
            return null_pointer();
        }
        let json = match unsafe { c_str(config_json) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let config: PipelineConfig = match serde_json::from_str(json) {
            Ok(c) => c,
            Err(e) => {
                set_error(&format!("configuration: {e}"));
                return cm_status::CM_INVALID_ARGUMENT;
            }
        };
        let data = unsafe { &(*dataset).0 };
        match run_structured_null_test(data, &config) {
            Ok(r) => {
                unsafe { *out = Box::into_raw(Box::new(cm_result(r))) };
                cm_status::CM_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// Fills `out` with the flat numeric summary of a result.
///
/// # Safety
/// `result` must be a live handle and `out` a writable summary struct.
#[no_mangle]
pub unsafe extern "C" fn cm_result_summary(
    result: *const cm_result,
    out: *mut cm_summary,
) -> cm_status {
    guarded(|| {
        if result.is_null() || out.is_null() {
            return null_pointer();
        }
        let r = unsafe { &(*result).0 };
        let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
        let summary = cm_summary {
            n_points: r.provenance.n,
            n_features: r.provenance.p,
            n_vertices: r.observed.graph.n_vertices(),
            n_edges: r.observed.graph.n_edges(),
            n_communities: r.observed.communities.n_communities,
            n_replicates: r.replicates.len(),
            d_obs: r.all.d_obs,
            z: opt(r.all.z),
            p_hat: r.all.p_hat,
            d_obs_excl: opt(r.excl_singletons.as_ref().map(|v| v.d_obs)),
            z_excl: opt(r.excl_singletons.as_ref().and_then(|v| v.z)),
            p_hat_excl: opt(r.excl_singletons.as_ref().map(|v| v.p_hat)),
            z_permutation: opt(r.permutation.as_ref().map(|p| p.z)),
            z_permutation_excl: opt(r.permutation_excl_singletons.as_ref().map(|p| p.z)),
        };
        unsafe { *out = summary };
        cm_status::CM_OK
    })
}

/// Serializes the full result to pretty-printed JSON, identical to the
/// command line `report.json`. Free the string with `cm_string_free`.
///
/// # Safety
/// `result` must be a live handle and `out` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn cm_result_to_json(
    result: *const cm_result,
    out: *mut *mut c_char,
) -> cm_status {
    guarded(|| {
        if result.is_null() || out.is_null() {
            return null_pointer();
        }
        let r = unsafe { &(*result).0 };
        match report_json(r) {
            Ok(s) => string_out(s, out),
            Err(e) => fail(&e),
        }
    })
}

/// Frees a result handle. Null is ignored.
///
/// # Safety
/// `result` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn cm_result_free(result: *mut cm_result) {
    if !result.is_null() {
        drop(unsafe { Box::from_raw(result) });
    }
}

/// Frees a string this library allocated. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned by this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn cm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
