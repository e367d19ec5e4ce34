use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use thicklab_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    tl_string_free(s);
    out
}

unsafe fn last_error() -> String {
    CStr::from_ptr(tl_last_error_message()).to_str().unwrap().to_string()
}

unsafe fn spec(text: &str) -> *mut TlSpec {
    let mut out = ptr::null_mut();
    assert_eq!(tl_spec_from_json(cstr(text).as_ptr(), &mut out), TL_OK);
    out
}

unsafe fn expr(text: &str, arity: usize) -> *mut TlExpr {
    let mut out = ptr::null_mut();
    assert_eq!(tl_expr_parse(cstr(text).as_ptr(), arity, &mut out), TL_OK);
    out
}

#[test]
fn thickness_and_check() {
    unsafe {
        let c = spec(r#"{"type":"homogeneous_ifs","lambda":"1/3"}"#);
        let mut json = ptr::null_mut();
        assert_eq!(tl_thickness_json(c, 3, &mut json), TL_OK);
        let text = take(json);
        assert!(text.contains(r#""tau":{"lo":"1","hi":"1"}"#), "{text}");

        let f = expr("x + y", 2);
        let sets = [c as *const TlSpec, c as *const TlSpec];
        let mut verdict = -1;
        assert_eq!(tl_check(f, sets.as_ptr(), 2, &mut verdict, ptr::null_mut()), TL_OK);
        assert_eq!(verdict, 0);
        let g = expr("x*y", 2);
        assert_eq!(tl_check(g, sets.as_ptr(), 2, &mut verdict, ptr::null_mut()), TL_OK);
        assert!(verdict == 1 || verdict == 2);
        assert_eq!(tl_check(f, sets.as_ptr(), 1, &mut verdict, ptr::null_mut()), TL_ERR_INVALID);
        assert!(last_error().contains("arity"));
        tl_expr_free(f);
        tl_expr_free(g);
        tl_spec_free(c);
    }
}

#[test]
fn cover_certify_reproduce() {
    unsafe {
        let c = spec("C");
        let f = expr("x*y", 2);
        let sets = [c as *const TlSpec, c as *const TlSpec];
        let mut json = ptr::null_mut();
        assert_eq!(tl_cover_json(f, sets.as_ptr(), 2, 1, 0, &mut json), TL_OK);
        let text = take(json);
        assert!(text.contains(r#""gaps_in_H":[["1/3","4/9"]]"#), "{text}");
        assert_eq!(tl_cover_json(f, sets.as_ptr(), 2, 6, 10, &mut json), TL_ERR_COMPUTE);
        assert!(json.is_null());
        assert!(last_error().contains("budget"));

        let mut certified = 0;
        assert_eq!(tl_certify(f, sets.as_ptr(), 2, cstr("2/5").as_ptr(), 8, &mut certified, &mut json), TL_OK);
        assert_eq!(certified, 1);
        assert!(take(json).contains(r#""depth":1"#));

        let mut passed = 0;
        assert_eq!(tl_reproduce(cstr("steinhaus_sum").as_ptr(), &mut passed, ptr::null_mut()), TL_OK);
        assert_eq!(passed, 1);
        assert_eq!(tl_reproduce(cstr("nope").as_ptr(), &mut passed, ptr::null_mut()), TL_ERR_INVALID);
        tl_expr_free(f);
        tl_spec_free(c);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(tl_spec_from_json(ptr::null(), &mut s), TL_ERR_NULL);
        assert_eq!(tl_spec_from_json(cstr("{oops").as_ptr(), &mut s), TL_ERR_PARSE);
        assert!(s.is_null());
        assert!(!last_error().is_empty());
        let bad = [0xffu8, 0];
        assert_eq!(tl_spec_from_json(bad.as_ptr().cast(), &mut s), TL_ERR_UTF8);
        let mut e = ptr::null_mut();
        assert_eq!(tl_expr_parse(cstr("x +").as_ptr(), 2, &mut e), TL_ERR_PARSE);
        assert_eq!(tl_expr_parse(cstr("x").as_ptr(), 0, &mut e), TL_ERR_INVALID);
        assert_eq!(tl_expr_parse(cstr("x").as_ptr(), 1, ptr::null_mut()), TL_ERR_NULL);
        let mut json = ptr::null_mut();
        assert_eq!(tl_thickness_json(ptr::null(), 1, &mut json), TL_ERR_NULL);
        let ok = spec("C");
        assert_eq!(tl_thickness_json(ok, 1, &mut json), TL_OK);
        assert!(last_error().is_empty());
        tl_string_free(json);
        tl_spec_free(ok);
        tl_spec_free(ptr::null_mut());
        tl_string_free(ptr::null_mut());
        assert_eq!(CStr::from_ptr(tl_version()).to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn header_declares_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/thicklab.h")).unwrap();
    for name in [
        "tl_spec_from_json",
        "tl_spec_free",
        "tl_expr_parse",
        "tl_expr_free",
        "tl_thickness_json",
        "tl_check",
        "tl_cover_json",
        "tl_certify",
        "tl_reproduce",
        "tl_string_free",
        "tl_last_error_message",
        "tl_version",
        "typedef struct TlSpec TlSpec",
        "#define TL_ERR_PANIC -6",
    ] {
        assert!(header.contains(name), "{name}");
    }
}

/// Links a small C program against the static library.
#[test]
fn c_program_links() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libthicklab_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = dir.join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "thicklab.h"
int main(void) {
    TlSpec *c = NULL;
    TlExpr *f = NULL;
    char *json = NULL;
    int verdict = -1;
    if (tl_spec_from_json("C", &c) != TL_OK) return 10;
    if (tl_expr_parse("x - y", 2, &f) != TL_OK) return 11;
    const TlSpec *sets[2] = { c, c };
    if (tl_check(f, sets, 2, &verdict, &json) != TL_OK) return 12;
    if (verdict != 0 || strstr(json, "\"verdict\":\"pass\"") == NULL) return 13;
    tl_string_free(json);
    if (tl_spec_from_json("{", &c) != TL_ERR_PARSE) return 14;
    if (strlen(tl_last_error_message()) == 0) return 15;
    tl_expr_free(f);
    puts(tl_version());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
