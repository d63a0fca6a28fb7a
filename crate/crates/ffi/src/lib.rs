//! C ABI over the heatmoi engine.
//!
//! Objects cross the boundary as opaque handles released by their `_free`
//! function. Every fallible call returns an [`HmStatus`]; on failure the
//! message is available from [`hm_last_error`] on the same thread until the
//! next call. Strings returned to the caller are released with
//! [`hm_string_free`].

use heatmoi::config::RunConfig;
use heatmoi::divdiff::{dd_eval, fkd};
use heatmoi::emit::{emit, emit_at_dimension, parse};
use heatmoi::modular;
use heatmoi::recursion::local_invariant;
use heatmoi::term::MoiExpression;
use heatmoi::verify::{self, Suite};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Parse = 4,
    Config = 5,
    Numeric = 6,
    CheckFailed = 7,
    Panic = 8,
}

/// Symbolic local invariant or any expression read back from LaTeX.
pub struct HmExpression(MoiExpression);

/// Validated run configuration.
pub struct HmConfig(RunConfig);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).expect("nul bytes removed"));
}

/// Runs `body`, records failures and converts panics into [`HmStatus::Panic`].
fn guard(body: impl FnOnce() -> Result<(), (HmStatus, String)>) -> HmStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => HmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HmStatus::Panic
        }
    }
}

fn null(what: &str) -> (HmStatus, String) {
    (HmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (HmStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| (HmStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn hm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds `I_k` for even `k`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hm_local_invariant(k: u32, out: *mut *mut HmExpression) -> HmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let e = local_invariant(k).map_err(|e| (HmStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(HmExpression(e)));
        Ok(())
    })
}

/// Reads an expression from LaTeX in the emitted notation.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hm_expression_parse(text: *const c_char, out: *mut *mut HmExpression) -> HmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(text, "text")?;
        let e = parse(text).map_err(|e| (HmStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(HmExpression(e)));
        Ok(())
    })
}

/// # Safety
/// `e` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hm_expression_free(e: *mut HmExpression) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Number of canonical terms.
///
/// # Safety
/// `e` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hm_expression_term_count(e: *const HmExpression, out: *mut usize) -> HmStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("expression"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = e.0.len();
        Ok(())
    })
}

/// Structural equality of two expressions.
///
/// # Safety
/// Both handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hm_expression_equal(a: *const HmExpression, b: *const HmExpression, out: *mut bool) -> HmStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("a"))?;
        let b = b.as_ref().ok_or_else(|| null("b"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = a.0 == b.0;
        Ok(())
    })
}

/// LaTeX rendering; `d <= 0` keeps the dimension symbolic. Release the
/// result with [`hm_string_free`].
///
/// # Safety
/// `e` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hm_expression_emit(e: *const HmExpression, d: i64, out: *mut *mut c_char) -> HmStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("expression"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = if d <= 0 { emit(&e.0) } else { emit_at_dimension(&e.0, d).map_err(|m| (HmStatus::InvalidArgument, m))? };
        *out = to_c_string(text);
        Ok(())
    })
}

/// Divided difference `F_{k,d}^{[n]}(points)` with `n = len - 1`.
///
/// # Safety
/// `points` must hold `len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hm_fkd_divided_difference(k: u32, d: u32, points: *const f64, len: usize, out: *mut f64) -> HmStatus {
    guard(|| {
        if points.is_null() {
            return Err(null("points"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if d == 0 {
            return Err((HmStatus::InvalidArgument, "d must be positive".into()));
        }
        let pts = std::slice::from_raw_parts(points, len);
        *out = dd_eval(&fkd(k, d), pts).map_err(|e| (HmStatus::Numeric, e.to_string()))?;
        Ok(())
    })
}

/// Second order symbol `Phi(a0, a1)` in dimension `d`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hm_phi(a0: f64, a1: f64, d: u32, out: *mut f64) -> HmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = modular::phi(a0, a1, d).map_err(|e| (HmStatus::Numeric, e.to_string()))?;
        Ok(())
    })
}

/// Second order symbol `Psi(a0, a1, a2)` in dimension `d`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hm_psi(a0: f64, a1: f64, a2: f64, d: u32, out: *mut f64) -> HmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = modular::psi(a0, a1, a2, d).map_err(|e| (HmStatus::Numeric, e.to_string()))?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn hm_k0(s: f64) -> f64 {
    modular::k0(s)
}

#[no_mangle]
pub extern "C" fn hm_h0(s: f64, t: f64) -> f64 {
    modular::h0(s, t)
}

#[no_mangle]
pub extern "C" fn hm_k0d(s: f64, d: f64) -> f64 {
    modular::k0d(s, d)
}

/// Parses a TOML configuration; null `text` gives the defaults.
///
/// # Safety
/// `text` must be null or nul-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hm_config_parse(text: *const c_char, out: *mut *mut HmConfig) -> HmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = if text.is_null() { "" } else { read_str(text, "text")? };
        let cfg = RunConfig::parse(text).map_err(|e| (HmStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(HmConfig(cfg)));
        Ok(())
    })
}

/// Loads a TOML configuration file.
///
/// # Safety
/// `path` must be nul-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hm_config_load(path: *const c_char, out: *mut *mut HmConfig) -> HmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = read_str(path, "path")?;
        let cfg = RunConfig::load(Path::new(path)).map_err(|e| (HmStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(HmConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `c` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hm_config_free(c: *mut HmConfig) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Runs a verification suite (`dd`, `moi`, `symbols`, `conjugation`,
/// `heatfit`). Returns [`HmStatus::CheckFailed`] when a check fails; the
/// tab-separated report is stored in `report` either way if it is non-null.
///
/// # Safety
/// `suite` must be nul-terminated, `config` null (defaults) or live, and
/// `report` null or valid.
#[no_mangle]
pub unsafe extern "C" fn hm_verify(suite: *const c_char, config: *const HmConfig, report: *mut *mut c_char) -> HmStatus {
    guard(|| {
        let name = read_str(suite, "suite")?;
        let suite: Suite = name.parse().map_err(|e: verify::VerifyError| (HmStatus::InvalidArgument, e.to_string()))?;
        let default;
        let cfg = match config.as_ref() {
            Some(c) => &c.0,
            None => {
                default = RunConfig::default();
                &default
            }
        };
        let r = verify::run(suite, cfg).map_err(|e| (HmStatus::Numeric, e.to_string()))?;
        if !report.is_null() {
            *report = to_c_string(r.to_string());
        }
        if r.passed() {
            Ok(())
        } else {
            Err((HmStatus::CheckFailed, format!("suite {suite} failed")))
        }
    })
}
