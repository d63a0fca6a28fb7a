use heatmoi_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn last_error() -> String {
    unsafe { CStr::from_ptr(hm_last_error()) }.to_string_lossy().into_owned()
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { hm_string_free(p) };
    s
}

#[test]
fn invariant_round_trips_through_latex() {
    unsafe {
        let mut e = ptr::null_mut();
        assert_eq!(hm_local_invariant(2, &mut e), HmStatus::Ok);
        let mut n = 0usize;
        assert_eq!(hm_expression_term_count(e, &mut n), HmStatus::Ok);
        assert_eq!(n, 13);

        let mut text = ptr::null_mut();
        assert_eq!(hm_expression_emit(e, 0, &mut text), HmStatus::Ok);
        let latex = CString::new(take_string(text)).unwrap();
        let mut back = ptr::null_mut();
        assert_eq!(hm_expression_parse(latex.as_ptr(), &mut back), HmStatus::Ok);
        let mut same = false;
        assert_eq!(hm_expression_equal(e, back, &mut same), HmStatus::Ok);
        assert!(same);

        let mut concrete = ptr::null_mut();
        assert_eq!(hm_expression_emit(e, 2, &mut concrete), HmStatus::Ok);
        assert!(take_string(concrete).contains("F_{2,2}"));

        hm_expression_free(back);
        hm_expression_free(e);
    }
}

#[test]
fn errors_are_reported_with_messages() {
    unsafe {
        let mut e = ptr::null_mut();
        assert_eq!(hm_local_invariant(3, &mut e), HmStatus::InvalidArgument);
        assert!(e.is_null());
        assert!(last_error().contains("even"), "{}", last_error());

        assert_eq!(hm_local_invariant(2, ptr::null_mut()), HmStatus::NullPointer);
        assert_eq!(hm_expression_parse(ptr::null(), &mut e), HmStatus::NullPointer);

        let junk = CString::new("not latex").unwrap();
        assert_eq!(hm_expression_parse(junk.as_ptr(), &mut e), HmStatus::Parse);
        assert!(!last_error().is_empty());

        let bad = [0xffu8, 0];
        assert_eq!(hm_expression_parse(bad.as_ptr().cast(), &mut e), HmStatus::InvalidUtf8);

        let mut n = 0usize;
        assert_eq!(hm_expression_term_count(ptr::null(), &mut n), HmStatus::NullPointer);

        let mut v = 0.0;
        assert!(hm_k0(0.0).is_finite());
        assert_eq!(hm_fkd_divided_difference(2, 3, [1.0, -1.0].as_ptr(), 2, &mut v), HmStatus::Numeric);
        assert_eq!(hm_fkd_divided_difference(2, 0, [1.0].as_ptr(), 1, &mut v), HmStatus::InvalidArgument);

        // success clears the message
        assert_eq!(hm_phi(1.0, 2.0, 3, &mut v), HmStatus::Ok);
        assert_eq!(last_error(), "");

        hm_expression_free(ptr::null_mut());
        hm_string_free(ptr::null_mut());
        hm_config_free(ptr::null_mut());
    }
}

#[test]
fn scalar_entry_points() {
    unsafe {
        let mut v = 0.0;
        // F_{2,3}(a) = -2 a^{-1/2}; first divided difference at (1, 4)
        assert_eq!(hm_fkd_divided_difference(2, 3, [1.0, 4.0].as_ptr(), 2, &mut v), HmStatus::Ok);
        let f = |a: f64| -2.0 / a.sqrt();
        assert!((v - (f(4.0) - f(1.0)) / 3.0).abs() < 1e-12, "{v}");

        let mut psi = 0.0;
        assert_eq!(hm_psi(1.0, 2.0, 3.0, 4, &mut psi), HmStatus::Ok);
        assert!(psi.is_finite());
    }
    assert!((hm_h0(0.3, -0.7) + hm_h0(-0.7, 0.3)).abs() < 1e-12);
    assert!(hm_k0d(0.5, 4.0).abs() < 1e-12);
}

#[test]
fn config_and_verify() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(hm_config_parse(ptr::null(), &mut cfg), HmStatus::Ok);
        let suite = CString::new("symbols").unwrap();
        let mut report = ptr::null_mut();
        assert_eq!(hm_verify(suite.as_ptr(), cfg, &mut report), HmStatus::Ok);
        assert!(take_string(report).lines().any(|l| l.starts_with("symbols\t")));
        hm_config_free(cfg);

        let strict = CString::new("[tolerances]\nsymbols_k0_limit = 1e-30\n").unwrap();
        assert_eq!(hm_config_parse(strict.as_ptr(), &mut cfg), HmStatus::Ok);
        let mut report = ptr::null_mut();
        assert_eq!(hm_verify(suite.as_ptr(), cfg, &mut report), HmStatus::CheckFailed);
        assert!(take_string(report).contains("FAIL"));
        hm_config_free(cfg);

        let bad = CString::new("[run]\nk = 5\n").unwrap();
        assert_eq!(hm_config_parse(bad.as_ptr(), &mut cfg), HmStatus::Config);
        let missing = CString::new("/nonexistent/heatmoi.toml").unwrap();
        assert_eq!(hm_config_load(missing.as_ptr(), &mut cfg), HmStatus::Config);

        let unknown = CString::new("everything").unwrap();
        assert_eq!(hm_verify(unknown.as_ptr(), ptr::null(), ptr::null_mut()), HmStatus::InvalidArgument);
    }
}

#[test]
fn header_is_generated_and_compiles() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/heatmoi.h");
    let text = std::fs::read_to_string(header).expect("header generated by the build script");
    for name in ["hm_local_invariant", "hm_verify", "hm_last_error", "HM_STATUS_CHECK_FAILED", "HEATMOI_H"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(&src, "#include \"heatmoi.h\"\nint main(void) { return hm_k0(0.0) > 0 ? 0 : 1; }\n").unwrap();
    match std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .status()
    {
        Ok(status) => assert!(status.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler found; header syntax not checked"),
    }
}
