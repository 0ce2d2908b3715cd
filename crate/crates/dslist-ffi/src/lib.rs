//! C ABI over the decoder. Objects cross the boundary as opaque handles that
//! the caller frees with the matching `*_free`. Every fallible call returns a
//! status code; on failure `ds_last_error` describes the problem.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dslist::bits::BitWord;
use dslist::codes::{corrupt, encode, BaseCode, CodeSpec, CorruptionMode, ReceivedWord};
use dslist::formats::{ReceivedFile, SamplerFile};
use dslist::pipeline::{approx_list_decode, list_decode, DecodeConfig, DecodeReport};
use dslist::sampler::DoubleSampler;
use dslist::Error;

pub const DS_OK: i32 = 0;
pub const DS_ERR_NULL: i32 = 1;
pub const DS_ERR_INVALID: i32 = 2;
pub const DS_ERR_BUDGET: i32 = 3;
pub const DS_ERR_PRECONDITION: i32 = 4;
pub const DS_ERR_NOT_CONVERGED: i32 = 5;
pub const DS_ERR_STAGE: i32 = 6;
pub const DS_ERR_IO: i32 = 7;
pub const DS_ERR_PANIC: i32 = 8;

pub const DS_CORRUPT_RANDOM: i32 = 0;
pub const DS_CORRUPT_ADVERSARIAL: i32 = 1;

pub struct DsSampler {
    inner: DoubleSampler,
}

pub struct DsCode {
    inner: BaseCode,
}

pub struct DsReceived {
    inner: ReceivedWord,
}

pub struct DsReport {
    inner: DecodeReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let text = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn status(e: &Error) -> i32 {
    match e {
        Error::Invalid(_) | Error::Ambiguous(_) => DS_ERR_INVALID,
        Error::Budget(_) => DS_ERR_BUDGET,
        Error::Precondition(_) => DS_ERR_PRECONDITION,
        Error::NotConverged { .. } => DS_ERR_NOT_CONVERGED,
        Error::Stage(_) => DS_ERR_STAGE,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => DS_ERR_IO,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Lib(Error::invalid(e))
    }
}

/// Runs `body`, turning errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DS_OK
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("{what} is null"));
            DS_ERR_NULL
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status(&e)
        }
        Err(panic) => {
            let msg = panic.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| panic.downcast_ref::<String>().cloned());
            set_error(format!("internal panic: {}", msg.unwrap_or_default()));
            DS_ERR_PANIC
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Lib(Error::invalid(format!("{what} is not UTF-8"))))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn bits(p: *const u8, len: usize) -> Result<BitWord, Failure> {
    if p.is_null() && len > 0 {
        return Err(Failure::Null("bit buffer"));
    }
    let slice = if len == 0 { &[][..] } else { std::slice::from_raw_parts(p, len) };
    if slice.iter().any(|&b| b > 1) {
        return Err(Failure::Lib(Error::invalid("bits must be 0 or 1")));
    }
    Ok(BitWord(slice.iter().map(|&b| b == 1).collect()))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn ds_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Frees a string returned by the library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ds_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Complete complex on `n` points with `m1`- and `m2`-subsets.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ds_sampler_complete(n: usize, m1: usize, m2: usize, out: *mut *mut DsSampler) -> i32 {
    guard(|| store(out, DsSampler { inner: DoubleSampler::complete(n, m1, m2, 10_000_000)? }))
}

/// Parses a sampler file.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ds_sampler_from_json(json: *const c_char, out: *mut *mut DsSampler) -> i32 {
    guard(|| {
        let file: SamplerFile = serde_json::from_str(text(json, "json")?)?;
        store(out, DsSampler { inner: file.to_sampler()? })
    })
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ds_sampler_free(s: *mut DsSampler) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of coordinates, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_sampler_n(s: *const DsSampler) -> usize {
    s.as_ref().map_or(0, |s| s.inner.n())
}

/// Number of middle copies, the length of a received word.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_sampler_middle_count(s: *const DsSampler) -> usize {
    s.as_ref().map_or(0, |s| s.inner.middle_sets().len())
}

/// Random linear `[n, k]` code decoding up to `eps0 * n` errors.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ds_code_random_linear(n: usize, k: usize, eps0: f64, seed: u64, out: *mut *mut DsCode) -> i32 {
    guard(|| store(out, DsCode { inner: BaseCode::random_linear(n, k, eps0, seed)? }))
}

/// Parses a code description such as `{"kind": "repetition", "n": 9, "eps0": 0.3}`.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ds_code_from_json(json: *const c_char, out: *mut *mut DsCode) -> i32 {
    guard(|| {
        let spec: CodeSpec = serde_json::from_str(text(json, "json")?)?;
        store(out, DsCode { inner: BaseCode::from_spec(&spec)? })
    })
}

/// # Safety
/// `c` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ds_code_free(c: *mut DsCode) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Message length of the code, or 0 for a null handle.
///
/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_code_k(c: *const DsCode) -> usize {
    c.as_ref().map_or(0, |c| c.inner.k())
}

/// Encodes `len` bits (one byte each, 0 or 1). With a code the bits are a
/// message; with a null code they are the word itself.
///
/// # Safety
/// `bits_ptr` must hold `len` bytes; handles must be live or, for `code`, null.
#[no_mangle]
pub unsafe extern "C" fn ds_encode(
    sampler: *const DsSampler,
    code: *const DsCode,
    bits_ptr: *const u8,
    len: usize,
    out: *mut *mut DsReceived,
) -> i32 {
    guard(|| {
        let ds = borrow(sampler, "sampler")?;
        let mut g = bits(bits_ptr, len)?;
        if let Some(code) = code.as_ref() {
            g = code.inner.encode(&g)?;
        }
        store(out, DsReceived { inner: encode(&ds.inner, &g)? })
    })
}

/// Keeps an `agreement` fraction of copies and corrupts the rest with
/// `DS_CORRUPT_RANDOM` or `DS_CORRUPT_ADVERSARIAL`.
///
/// # Safety
/// `received` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ds_corrupt(received: *const DsReceived, agreement: f64, mode: i32, seed: u64, out: *mut *mut DsReceived) -> i32 {
    guard(|| {
        let w = borrow(received, "received")?;
        let mode = match mode {
            DS_CORRUPT_RANDOM => CorruptionMode::Random,
            DS_CORRUPT_ADVERSARIAL => CorruptionMode::AdversarialPlanted,
            _ => return Err(Error::invalid(format!("unknown corruption mode {mode}")).into()),
        };
        store(out, DsReceived { inner: corrupt(&w.inner, agreement, mode, seed)? })
    })
}

/// Parses a received-word file against the sampler's middle layer.
///
/// # Safety
/// `json` must be a nul-terminated string; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn ds_received_from_json(sampler: *const DsSampler, json: *const c_char, out: *mut *mut DsReceived) -> i32 {
    guard(|| {
        let ds = borrow(sampler, "sampler")?;
        let file: ReceivedFile = serde_json::from_str(text(json, "json")?)?;
        store(out, DsReceived { inner: file.to_word(&ds.inner)? })
    })
}

/// Received word as JSON; free with `ds_string_free`. Null on failure.
///
/// # Safety
/// Handles must be live.
#[no_mangle]
pub unsafe extern "C" fn ds_received_to_json(sampler: *const DsSampler, received: *const DsReceived) -> *mut c_char {
    let mut result = ptr::null_mut();
    guard(|| {
        let ds = borrow(sampler, "sampler")?;
        let w = borrow(received, "received")?;
        result = into_c_string(serde_json::to_string(&ReceivedFile::from_word(&ds.inner, &w.inner))?);
        Ok(())
    });
    result
}

/// # Safety
/// `r` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ds_received_free(r: *mut DsReceived) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Runs the decoder. A null `code` gives approximate decoding. `config_json`
/// holds decoder settings as JSON; when null, `epsilon`, `epsilon0` and
/// `seed` are used with defaults for the rest.
///
/// # Safety
/// Handles must be live or null where allowed; `config_json` null or a
/// nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ds_decode(
    sampler: *const DsSampler,
    code: *const DsCode,
    received: *const DsReceived,
    config_json: *const c_char,
    epsilon: f64,
    epsilon0: f64,
    seed: u64,
    out: *mut *mut DsReport,
) -> i32 {
    guard(|| {
        let ds = borrow(sampler, "sampler")?;
        let w = borrow(received, "received")?;
        let cfg = if config_json.is_null() {
            DecodeConfig { seed, ..DecodeConfig::new(epsilon, epsilon0) }
        } else {
            serde_json::from_str(text(config_json, "config")?)?
        };
        let report = match code.as_ref() {
            Some(code) => list_decode(&ds.inner, &code.inner, &w.inner, &cfg)?,
            None => approx_list_decode(&ds.inner, &w.inner, &cfg)?,
        };
        store(out, DsReport { inner: report })
    })
}

/// # Safety
/// `r` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ds_report_free(r: *mut DsReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Number of output words, or 0 for a null handle.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_report_output_count(r: *const DsReport) -> usize {
    r.as_ref().map_or(0, |r| r.inner.output.len())
}

/// Number of recorded stage failures, or 0 for a null handle.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_report_stage_failures(r: *const DsReport) -> usize {
    r.as_ref().map_or(0, |r| r.inner.stage_failures.len())
}

/// Copies output word `index` into `buf` (one byte per bit) and its
/// agreement into `agreement` when that is non-null.
///
/// # Safety
/// `buf` must hold `len` bytes; `r` must be live.
#[no_mangle]
pub unsafe extern "C" fn ds_report_output(r: *const DsReport, index: usize, buf: *mut u8, len: usize, agreement: *mut f64) -> i32 {
    guard(|| {
        let report = borrow(r, "report")?;
        let entry = report
            .inner
            .output
            .get(index)
            .ok_or_else(|| Error::invalid(format!("output index {index} out of range")))?;
        if buf.is_null() {
            return Err(Failure::Null("buffer"));
        }
        if len < entry.word.len() {
            return Err(Error::invalid(format!("buffer holds {len} bytes, word has {}", entry.word.len())).into());
        }
        for (i, &b) in entry.word.0.iter().enumerate() {
            *buf.add(i) = b as u8;
        }
        if !agreement.is_null() {
            *agreement = entry.agreement;
        }
        Ok(())
    })
}

/// Full report as JSON; free with `ds_string_free`. Null on failure.
///
/// # Safety
/// `r` must be live.
#[no_mangle]
pub unsafe extern "C" fn ds_report_to_json(r: *const DsReport) -> *mut c_char {
    let mut result = ptr::null_mut();
    guard(|| {
        result = into_c_string(serde_json::to_string(&borrow(r, "report")?.inner)?);
        Ok(())
    });
    result
}
