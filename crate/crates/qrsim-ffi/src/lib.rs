//! C ABI for embedding the simulator in other languages: opaque handles,
//! integer error codes, and TOML documents as the exchange format.
//!
//! See `include/qrsim.h` for the matching header. Every string returned
//! through an out-parameter is owned by the caller and must be released
//! with [`qrsim_string_free`].

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qrsim::doc::{self, Network};
use qrsim::runner::{run, view, RunConfig};
use qrsim::security::{check_claim, CompareOpts};

/// Success.
pub const QRSIM_OK: i32 = 0;
/// Document parsing or validation failed.
pub const QRSIM_ERR_PARSE: i32 = 1;
/// A run hit a model error (overflow, non-CPTP delta, open network …).
pub const QRSIM_ERR_MODEL: i32 = 2;
/// Null pointers, bad UTF-8 or unknown names.
pub const QRSIM_ERR_ARG: i32 = 4;
/// A panic crossed the boundary (a bug; please report).
pub const QRSIM_ERR_PANIC: i32 = 5;

/// Opaque handle to a parsed, resolved network document.
pub struct QrsimNetwork {
    inner: Network,
}

unsafe fn write_string(out: *mut *mut c_char, text: String) {
    if !out.is_null() {
        let c = CString::new(text).unwrap_or_else(|_| CString::new("<nul in text>").unwrap());
        unsafe { *out = c.into_raw() };
    }
}

unsafe fn clear(out: *mut *mut c_char) {
    if !out.is_null() {
        unsafe { *out = ptr::null_mut() };
    }
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, i32> {
    if ptr.is_null() {
        return Err(QRSIM_ERR_ARG);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| QRSIM_ERR_ARG)
}

fn guarded<F: FnOnce() -> i32>(body: F) -> i32 {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or(QRSIM_ERR_PANIC)
}

/// Returns the library version as a static string (do not free).
#[no_mangle]
pub extern "C" fn qrsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Releases a string returned by any qrsim function.
///
/// # Safety
/// `s` must be a pointer previously returned through an out-parameter of
/// this library, or null.
#[no_mangle]
pub unsafe extern "C" fn qrsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Parses a network-description document (TOML text). On success stores a
/// handle in `out`; on failure stores an error message in `err` (if
/// non-null) and returns a nonzero code.
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `out` must be a valid
/// pointer; `err` may be null.
#[no_mangle]
pub unsafe extern "C" fn qrsim_network_parse(
    text: *const c_char,
    out: *mut *mut QrsimNetwork,
    err: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        unsafe { clear(err) };
        if out.is_null() {
            return QRSIM_ERR_ARG;
        }
        let text = match unsafe { read_str(text) } {
            Ok(t) => t,
            Err(code) => return code,
        };
        match doc::parse_network(text) {
            Ok(network) => {
                unsafe { *out = Box::into_raw(Box::new(QrsimNetwork { inner: network })) };
                QRSIM_OK
            }
            Err(e) => {
                unsafe { write_string(err, e.to_string()) };
                QRSIM_ERR_PARSE
            }
        }
    })
}

/// Releases a network handle.
///
/// # Safety
/// `network` must come from [`qrsim_network_parse`], or be null.
#[no_mangle]
pub unsafe extern "C" fn qrsim_network_free(network: *mut QrsimNetwork) {
    if !network.is_null() {
        drop(unsafe { Box::from_raw(network) });
    }
}

/// Validates every machine of the document. Returns 0 when clean;
/// otherwise stores the violation report in `report`.
///
/// # Safety
/// `network` must be a live handle; `report` may be null.
#[no_mangle]
pub unsafe extern "C" fn qrsim_network_validate(
    network: *const QrsimNetwork,
    report: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        unsafe { clear(report) };
        let Some(network) = (unsafe { network.as_ref() }) else {
            return QRSIM_ERR_ARG;
        };
        let lines = network.inner.validate_all();
        if lines.is_empty() {
            QRSIM_OK
        } else {
            unsafe { write_string(report, lines.join("\n")) };
            QRSIM_ERR_PARSE
        }
    })
}

/// Runs a named collection; on success stores the run document (TOML) in
/// `doc_out`.
///
/// # Safety
/// `network` must be a live handle; `collection` a valid string;
/// `doc_out` a valid pointer; `err` may be null.
#[no_mangle]
pub unsafe extern "C" fn qrsim_run(
    network: *const QrsimNetwork,
    collection: *const c_char,
    k: u32,
    max_activations: u32,
    prune_eps: f64,
    doc_out: *mut *mut c_char,
    err: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        unsafe { clear(err) };
        let Some(network) = (unsafe { network.as_ref() }) else {
            return QRSIM_ERR_ARG;
        };
        if doc_out.is_null() {
            return QRSIM_ERR_ARG;
        }
        let name = match unsafe { read_str(collection) } {
            Ok(n) => n,
            Err(code) => return code,
        };
        let Some(c) = network.inner.collections.get(name) else {
            unsafe { write_string(err, format!("no collection named {name:?}")) };
            return QRSIM_ERR_ARG;
        };
        let cfg = RunConfig {
            k: k as usize,
            max_activations: max_activations as usize,
            prune_eps,
        };
        match run(c, &cfg, &network.inner.defaults) {
            Ok(dist) => {
                let doc = doc::run_to_doc(&dist, name);
                match doc::to_toml(&doc) {
                    Ok(text) => {
                        unsafe { write_string(doc_out, text) };
                        QRSIM_OK
                    }
                    Err(e) => {
                        unsafe { write_string(err, e.to_string()) };
                        QRSIM_ERR_MODEL
                    }
                }
            }
            Err(e) => {
                unsafe { write_string(err, e.to_string()) };
                QRSIM_ERR_MODEL
            }
        }
    })
}

/// Projects a run document (TOML text) onto one machine's view
/// distribution; stores the view document in `doc_out`.
///
/// # Safety
/// `run_doc` and `machine` must be valid strings; `doc_out` a valid
/// pointer; `err` may be null.
#[no_mangle]
pub unsafe extern "C" fn qrsim_view(
    run_doc: *const c_char,
    machine: *const c_char,
    doc_out: *mut *mut c_char,
    err: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        unsafe { clear(err) };
        if doc_out.is_null() {
            return QRSIM_ERR_ARG;
        }
        let (text, machine) =
            match (unsafe { read_str(run_doc) }, unsafe { read_str(machine) }) {
                (Ok(t), Ok(m)) => (t, m),
                _ => return QRSIM_ERR_ARG,
            };
        let run_doc: doc::RunDoc = match doc::from_toml(text) {
            Ok(d) => d,
            Err(e) => {
                unsafe { write_string(err, e.to_string()) };
                return QRSIM_ERR_PARSE;
            }
        };
        let traces = match doc::traces_from_doc(&run_doc) {
            Ok(t) => t,
            Err(e) => {
                unsafe { write_string(err, e.to_string()) };
                return QRSIM_ERR_PARSE;
            }
        };
        let views = view(&traces, machine);
        match doc::to_toml(&doc::view_to_doc(&views, machine)) {
            Ok(text) => {
                unsafe { write_string(doc_out, text) };
                QRSIM_OK
            }
            Err(e) => {
                unsafe { write_string(err, e.to_string()) };
                QRSIM_ERR_MODEL
            }
        }
    })
}

/// Checks a named witnessed claim at the given security parameters;
/// stores the verdict document in `doc_out`. The return code is
/// [`QRSIM_OK`] even for failing claims — consult the document's `pass`.
///
/// # Safety
/// `network` must be a live handle; `claim` a valid string; `ks` must
/// point to `n_ks` readable entries; `doc_out` a valid pointer; `err`
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn qrsim_check_claim(
    network: *const QrsimNetwork,
    claim: *const c_char,
    ks: *const u32,
    n_ks: usize,
    budget: u32,
    doc_out: *mut *mut c_char,
    err: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        unsafe { clear(err) };
        let Some(network) = (unsafe { network.as_ref() }) else {
            return QRSIM_ERR_ARG;
        };
        if doc_out.is_null() || (ks.is_null() && n_ks > 0) {
            return QRSIM_ERR_ARG;
        }
        let name = match unsafe { read_str(claim) } {
            Ok(n) => n,
            Err(code) => return code,
        };
        let Some(c) = network.inner.claims.get(name) else {
            unsafe { write_string(err, format!("no claim named {name:?}")) };
            return QRSIM_ERR_ARG;
        };
        let ks: Vec<usize> = unsafe { std::slice::from_raw_parts(ks, n_ks) }
            .iter()
            .map(|&k| k as usize)
            .collect();
        let mut opts = CompareOpts::new(ks);
        opts.run = opts.run.with_budget(budget as usize);
        match check_claim(c, &opts, &network.inner.defaults) {
            Ok(verdicts) => {
                let doc = doc::verdicts_to_doc(name, c, &verdicts);
                match doc::to_toml(&doc) {
                    Ok(text) => {
                        unsafe { write_string(doc_out, text) };
                        QRSIM_OK
                    }
                    Err(e) => {
                        unsafe { write_string(err, e.to_string()) };
                        QRSIM_ERR_MODEL
                    }
                }
            }
            Err(e) => {
                unsafe { write_string(err, e.to_string()) };
                QRSIM_ERR_MODEL
            }
        }
    })
}
