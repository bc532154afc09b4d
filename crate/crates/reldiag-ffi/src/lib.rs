//! C ABI for the reldiag toolkit. All entry points are panic-free, return an
//! [`RdStatus`] code, and pass results through out-parameters. Strings are
//! UTF-8, NUL-terminated, and owned by the caller once returned; release them
//! with `rd_string_free`. Handles are opaque and released with their `_free`
//! function. Error details for the last failing call on the current thread
//! are available via `rd_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use reldiag::ast::Query;
use reldiag::diagram::{read_diagram, validate, write_diagram, Diagram};
use reldiag::fragment::{remove_disjunction, remove_forall_implies};
use reldiag::parser::{parse_query, pretty};
use reldiag::render::{render, RenderOptions};
use reldiag::safety::check_safety;
use reldiag::translate::{
    diagram_to_trc, to_builtin_form, trc_to_diagram, trc_to_representation_b,
};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RdStatus {
    /// Success.
    RdOk = 0,
    /// A required pointer argument was null.
    RdNullPointer = 1,
    /// An input string was not valid UTF-8.
    RdUtf8Error = 2,
    /// Query text did not parse.
    RdParseError = 3,
    /// The query is outside the fragment the operation needs.
    RdFragmentError = 4,
    /// Translation between query and diagram failed.
    RdTranslateError = 5,
    /// The diagram document is malformed or inconsistent.
    RdInvalidDiagram = 6,
    /// Rendering failed.
    RdRenderError = 7,
    /// An unexpected internal failure.
    RdInternalError = 8,
}

/// Opaque handle to a parsed query.
pub struct RdQuery(Query);

/// Opaque handle to a diagram document.
pub struct RdDiagram(Diagram);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap_or_default());
}

fn guard(status: &mut RdStatus, f: impl FnOnce() -> RdStatus) -> RdStatus {
    *status = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            RdStatus::RdInternalError
        }
    };
    *status
}

/// # Safety
/// `text` must be a valid NUL-terminated string or null.
unsafe fn input_str<'a>(text: *const c_char) -> Result<&'a str, RdStatus> {
    if text.is_null() {
        set_error("null string argument");
        return Err(RdStatus::RdNullPointer);
    }
    CStr::from_ptr(text).to_str().map_err(|e| {
        set_error(&format!("invalid UTF-8: {e}"));
        RdStatus::RdUtf8Error
    })
}

fn output_str(text: String, out: *mut *mut c_char) -> RdStatus {
    if out.is_null() {
        set_error("null output pointer");
        return RdStatus::RdNullPointer;
    }
    match CString::new(text.replace('\0', " ")) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            RdStatus::RdOk
        }
        Err(_) => {
            set_error("output contained an interior NUL");
            RdStatus::RdInternalError
        }
    }
}

unsafe fn query_ref<'a>(q: *const RdQuery) -> Result<&'a Query, RdStatus> {
    q.as_ref().map(|q| &q.0).ok_or_else(|| {
        set_error("null query handle");
        RdStatus::RdNullPointer
    })
}

unsafe fn diagram_ref<'a>(d: *const RdDiagram) -> Result<&'a Diagram, RdStatus> {
    d.as_ref().map(|d| &d.0).ok_or_else(|| {
        set_error("null diagram handle");
        RdStatus::RdNullPointer
    })
}

fn output_query(q: Query, out: *mut *mut RdQuery) -> RdStatus {
    if out.is_null() {
        set_error("null output pointer");
        return RdStatus::RdNullPointer;
    }
    unsafe { *out = Box::into_raw(Box::new(RdQuery(q))) };
    RdStatus::RdOk
}

fn output_diagram(d: Diagram, out: *mut *mut RdDiagram) -> RdStatus {
    if out.is_null() {
        set_error("null output pointer");
        return RdStatus::RdNullPointer;
    }
    unsafe { *out = Box::into_raw(Box::new(RdDiagram(d))) };
    RdStatus::RdOk
}

/// Message describing the most recent failure on this thread. The pointer is
/// valid until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn rd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse query text into a handle.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rd_query_parse(
    text: *const c_char,
    out: *mut *mut RdQuery,
) -> RdStatus {
    let mut status = RdStatus::RdInternalError;
    guard(&mut status, || {
        let text = match input_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_query(text) {
            Ok(p) => output_query(p.query, out),
            Err(e) => {
                set_error(&format!(
                    "parse error at bytes {}..{}: {}",
                    e.span.start, e.span.end, e.message
                ));
                RdStatus::RdParseError
            }
        }
    })
}

/// Release a query handle.
///
/// # Safety
/// `q` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rd_query_free(q: *mut RdQuery) {
    if !q.is_null() {
        drop(Box::from_raw(q));
    }
}

/// Render a query back to normalized text.
///
/// # Safety
/// `q` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rd_query_pretty(
    q: *const RdQuery,
    out: *mut *mut c_char,
) -> RdStatus {
    let mut status = RdStatus::RdInternalError;
    guard(&mut status, || match query_ref(q) {
        Ok(q) => output_str(pretty(q), out),
        Err(s) => s,
    })
}

/// Check the syntactic safety conditions. On success `*out_safe` is 1 for a
/// safe query and 0 otherwise, and `*out_report` (if non-null) receives a
/// human-readable report listing the violated condition numbers.
///
/// # Safety
/// `q` must be a live handle; `out_safe` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rd_query_check_safety(
    q: *const RdQuery,
    out_safe: *mut i32,
    out_report: *mut *mut c_char,
) -> RdStatus {
    let mut status = RdStatus::RdInternalError;
    guard(&mut status, || {
        let q = match query_ref(q) {
            Ok(q) => q,
            Err(s) => return s,
        };
        if out_safe.is_null() {
            set_error("null output pointer");
            return RdStatus::RdNullPointer;
        }
        let report = check_safety(q);
        *out_safe = i32::from(report.is_safe());
        if !out_report.is_null() {
            let text =
                if report.is_safe() { "safe".to_string() } else { report.to_string() };
            return output_str(text, out_report);
        }
        RdStatus::RdOk
    })
}

/// Rewrite `forall` and `->` away (existential fragment, same atoms).
///
/// # Safety
/// `q` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rd_query_remove_forall_implies(
    q: *const RdQuery,
    out: *mut *mut RdQuery,
) -> RdStatus {
    let mut status = RdStatus::RdInternalError;
    guard(&mut status, || match query_ref(q) {
        Ok(q) => output_query(remove_forall_implies(q), out),
        Err(s) => s,
    })
}

/// Rewrite `or` away via De Morgan (conjunctive fragment, same atoms).
///
/// # Safety
/// `q` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rd_query_remove_disjunction(
    q: *const RdQuery,
    out: *mut *mut RdQuery,
) -> RdStatus {
    let mut status = RdStatus::RdInternalError;
    guard(&mut status, || {
        let q = match query_ref(q) {
            Ok(q) => q,
            Err(s) => return s,
        };
        match remove_disjunction(q) {
            Ok(q2) => output_query(q2, out),
            Err(e) => {
                set_error(&e.to_string());
                RdStatus::RdFragmentError
            }
        }
    })
}

/// Rewrite comparison predicates into scope-anchored built-in relations.
///
/// # Safety
/// `q` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rd_query_to_builtin_form(
    q: *const RdQuery,
    out: *mut *mut RdQuery,
) -> RdStatus {
    let mut status = RdStatus::RdInternalError;
    guard(&mut status, || {
        let q = match query_ref(q) {
            Ok(q) => q,
            Err(s) => return s,
        };
        match to_builtin_form(q) {
            Ok(q2) => output_query(q2, out),
            Err(e) => {
                set_error(&e.to_string());
                RdStatus::RdTranslateError
            }
        }
    })
}

/// Translate a query into a diagram. `representation_b` of 0 requires the
/// anchored built-in conjunctive form (apply `rd_query_to_builtin_form`
/// first); any other value enables the fuse-box and shortcut representation,
/// which also accepts disjunction.
///
/// # Safety
/// `q` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rd_query_to_diagram(
    q: *const RdQuery,
    representation_b: i32,
    out: *mut *mut RdDiagram,
) -> RdStatus {
    let mut status = RdStatus::RdInternalError;
    guard(&mut status, || {
        let q = match query_ref(q) {
            Ok(q) => q,
            Err(s) => return s,
        };
        let translated =
            if representation_b != 0 { trc_to_representation_b(q) } else { trc_to_diagram(q) };
        match translated {
            Ok(d) => output_diagram(d, out),
            Err(e) => {
                set_error(&e.to_string());
                RdStatus::RdTranslateError
            }
        }
    })
}

/// Release a diagram handle.
///
/// # Safety
/// `d` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rd_diagram_free(d: *mut RdDiagram) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Serialize a diagram as its JSON document.
///
/// # Safety
/// `d` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rd_diagram_to_json(
    d: *const RdDiagram,
    out: *mut *mut c_char,
) -> RdStatus {
    let mut status = RdStatus::RdInternalError;
    guard(&mut status, || match diagram_ref(d) {
        Ok(d) => output_str(write_diagram(d), out),
        Err(s) => s,
    })
}

/// Parse and validate a diagram JSON document.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rd_diagram_from_json(
    text: *const c_char,
    out: *mut *mut RdDiagram,
) -> RdStatus {
    let mut status = RdStatus::RdInternalError;
    guard(&mut status, || {
        let text = match input_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let d = match read_diagram(text) {
            Ok(d) => d,
            Err(e) => {
                set_error(&e.to_string());
                return RdStatus::RdInvalidDiagram;
            }
        };
        let report = validate(&d);
        if !report.is_valid() {
            set_error(&report.to_string());
            return RdStatus::RdInvalidDiagram;
        }
        output_diagram(d, out)
    })
}

/// Read a diagram back into a query.
///
/// # Safety
/// `d` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rd_diagram_to_query(
    d: *const RdDiagram,
    out: *mut *mut RdQuery,
) -> RdStatus {
    let mut status = RdStatus::RdInternalError;
    guard(&mut status, || {
        let d = match diagram_ref(d) {
            Ok(d) => d,
            Err(s) => return s,
        };
        match diagram_to_trc(d) {
            Ok(q) => output_query(q, out),
            Err(e) => {
                set_error(&e.to_string());
                RdStatus::RdTranslateError
            }
        }
    })
}

/// Render a diagram as a deterministic SVG document. Nonzero `shading`
/// enables Peirce parity shading; nonzero `dotted` draws dotted connectors
/// between fuse-group members.
///
/// # Safety
/// `d` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rd_diagram_render_svg(
    d: *const RdDiagram,
    shading: i32,
    dotted: i32,
    out: *mut *mut c_char,
) -> RdStatus {
    let mut status = RdStatus::RdInternalError;
    guard(&mut status, || {
        let d = match diagram_ref(d) {
            Ok(d) => d,
            Err(s) => return s,
        };
        let opts = RenderOptions {
            peirce_shading: shading != 0,
            dotted_connectors: dotted != 0,
        };
        match render(d, opts) {
            Ok(svg) => output_str(svg, out),
            Err(e) => {
                set_error(&e.to_string());
                RdStatus::RdRenderError
            }
        }
    })
}
