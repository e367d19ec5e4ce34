//! C ABI over `thicklab`.
//!
//! Sets and expressions are opaque handles. Every call returns a status
//! code; on failure `tl_last_error_message` describes the error on the
//! calling thread. Reports are returned as JSON strings owned by the
//! caller and released with `tl_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use thicklab::cantor::{parse_set, CantorSpec};
use thicklab::expr::{default_names, Function};
use thicklab::interval::{Interval, Rational};
use thicklab::presets::{reproduce, PresetError};
use thicklab::theorem::{check_main, CheckOptions};
use thicklab::thickness::thickness;
use thicklab::verify::{find_miss_certificate, image_cover, CertifyOutcome, CoverOptions};

pub const TL_OK: i32 = 0;
pub const TL_ERR_NULL: i32 = -1;
pub const TL_ERR_UTF8: i32 = -2;
pub const TL_ERR_PARSE: i32 = -3;
pub const TL_ERR_INVALID: i32 = -4;
pub const TL_ERR_COMPUTE: i32 = -5;
pub const TL_ERR_PANIC: i32 = -6;

/// A Cantor set description.
pub struct TlSpec(CantorSpec);

/// A parsed expression with fixed arity.
pub struct TlExpr(Function);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Error(i32, String);

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TL_OK
        }
        Ok(Err(Error(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            TL_ERR_PANIC
        }
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Error> {
    if p.is_null() {
        return Err(Error(TL_ERR_NULL, "null string argument".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Error(TL_ERR_UTF8, "argument is not UTF-8".into()))
}

unsafe fn out_ptr<T>(p: *mut T) -> Result<&'static mut T, Error> {
    p.as_mut().ok_or_else(|| Error(TL_ERR_NULL, "null output pointer".into()))
}

fn json_string<T: serde::Serialize>(v: &T) -> *mut c_char {
    let s = serde_json::to_string(v).expect("reports serialize");
    CString::new(s).expect("JSON has no nul").into_raw()
}

unsafe fn specs_from(ptrs: *const *const TlSpec, n: usize) -> Result<Vec<CantorSpec>, Error> {
    if ptrs.is_null() && n > 0 {
        return Err(Error(TL_ERR_NULL, "null set array".into()));
    }
    (0..n)
        .map(|k| {
            (*ptrs.add(k))
                .as_ref()
                .map(|s| s.0.clone())
                .ok_or_else(|| Error(TL_ERR_NULL, format!("set {k} is null")))
        })
        .collect()
}

unsafe fn expr_ref<'a>(p: *const TlExpr) -> Result<&'a Function, Error> {
    p.as_ref().map(|e| &e.0).ok_or_else(|| Error(TL_ERR_NULL, "null expression".into()))
}

fn compute<E: std::fmt::Display>(e: E) -> Error {
    Error(TL_ERR_COMPUTE, e.to_string())
}

/// Parses a set from JSON or an alias such as `C` or `F1(7)`.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tl_spec_from_json(json: *const c_char, out: *mut *mut TlSpec) -> i32 {
    guard(|| {
        let slot = out_ptr(out)?;
        *slot = ptr::null_mut();
        let spec = parse_set(text(json)?).map_err(|e| Error(TL_ERR_PARSE, e.to_string()))?;
        *slot = Box::into_raw(Box::new(TlSpec(spec)));
        Ok(())
    })
}

/// # Safety
/// `spec` must come from `tl_spec_from_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tl_spec_free(spec: *mut TlSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Parses an expression over the default variable names for `arity`.
///
/// # Safety
/// `src` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tl_expr_parse(src: *const c_char, arity: usize, out: *mut *mut TlExpr) -> i32 {
    guard(|| {
        let slot = out_ptr(out)?;
        *slot = ptr::null_mut();
        if arity == 0 {
            return Err(Error(TL_ERR_INVALID, "arity must be at least 1".into()));
        }
        let f = Function::parse(text(src)?, &default_names(arity)).map_err(|e| Error(TL_ERR_PARSE, e.to_string()))?;
        *slot = Box::into_raw(Box::new(TlExpr(f)));
        Ok(())
    })
}

/// # Safety
/// `expr` must come from `tl_expr_parse` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tl_expr_free(expr: *mut TlExpr) {
    if !expr.is_null() {
        drop(Box::from_raw(expr));
    }
}

/// Thickness report as JSON.
///
/// # Safety
/// `spec` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tl_thickness_json(spec: *const TlSpec, depth: u32, out_json: *mut *mut c_char) -> i32 {
    guard(|| {
        let slot = out_ptr(out_json)?;
        *slot = ptr::null_mut();
        let spec = spec.as_ref().ok_or_else(|| Error(TL_ERR_NULL, "null set".into()))?;
        let r = thickness(&spec.0, depth).map_err(compute)?;
        *slot = json_string(&r);
        Ok(())
    })
}

/// Runs the derivative-ratio check. `out_verdict` receives 0 (pass),
/// 1 (fail) or 2 (inconclusive); `out_json` may be null.
///
/// # Safety
/// `specs` must point to `n` live handles.
#[no_mangle]
pub unsafe extern "C" fn tl_check(
    expr: *const TlExpr,
    specs: *const *const TlSpec,
    n: usize,
    out_verdict: *mut i32,
    out_json: *mut *mut c_char,
) -> i32 {
    guard(|| {
        let verdict = out_ptr(out_verdict)?;
        let f = expr_ref(expr)?;
        let specs = specs_from(specs, n)?;
        let r = check_main(f, &specs, &CheckOptions::default()).map_err(|e| Error(TL_ERR_INVALID, e.to_string()))?;
        *verdict = r.verdict.exit_code();
        if let Some(slot) = out_json.as_mut() {
            *slot = json_string(&r);
        }
        Ok(())
    })
}

/// Image enclosure at `depth` as JSON. `budget` 0 means the default.
///
/// # Safety
/// `specs` must point to `n` live handles; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tl_cover_json(
    expr: *const TlExpr,
    specs: *const *const TlSpec,
    n: usize,
    depth: u32,
    budget: u64,
    out_json: *mut *mut c_char,
) -> i32 {
    guard(|| {
        let slot = out_ptr(out_json)?;
        *slot = ptr::null_mut();
        let f = expr_ref(expr)?;
        let specs = specs_from(specs, n)?;
        let mut opts = CoverOptions::default();
        if budget > 0 {
            opts.budget = budget;
        }
        let r = image_cover(f, &specs, depth, &opts).map_err(compute)?;
        *slot = json_string(&r);
        Ok(())
    })
}

/// Searches for a certificate that `z` (a rational or decimal string) is
/// not attained. `out_certified` receives 1 or 0; `out_json` may be null.
///
/// # Safety
/// `specs` must point to `n` live handles; `z` must be a nul-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn tl_certify(
    expr: *const TlExpr,
    specs: *const *const TlSpec,
    n: usize,
    z: *const c_char,
    max_depth: u32,
    out_certified: *mut i32,
    out_json: *mut *mut c_char,
) -> i32 {
    guard(|| {
        let certified = out_ptr(out_certified)?;
        let f = expr_ref(expr)?;
        let specs = specs_from(specs, n)?;
        let z: Rational = text(z)?.trim().parse().map_err(|e| Error(TL_ERR_PARSE, format!("{e}")))?;
        let r = find_miss_certificate(f, &specs, &Interval::point(z), max_depth, &CoverOptions::default())
            .map_err(compute)?;
        *certified = matches!(r, CertifyOutcome::Certified(_)) as i32;
        if let Some(slot) = out_json.as_mut() {
            *slot = json_string(&r);
        }
        Ok(())
    })
}

/// Runs a named preset. `out_passed` receives 1 or 0; `out_json` may be
/// null.
///
/// # Safety
/// `name` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tl_reproduce(name: *const c_char, out_passed: *mut i32, out_json: *mut *mut c_char) -> i32 {
    guard(|| {
        let passed = out_ptr(out_passed)?;
        let r = reproduce(text(name)?).map_err(|e| match e {
            PresetError::UnknownPreset(_) => Error(TL_ERR_INVALID, e.to_string()),
            other => compute(other),
        })?;
        *passed = r.passed as i32;
        if let Some(slot) = out_json.as_mut() {
            *slot = json_string(&r);
        }
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread; empty after success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn tl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn tl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
