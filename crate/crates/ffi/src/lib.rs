//! C ABI over `ssm-core`. Handles are opaque; every call returns an `SsmStatus`
//! and leaves a message for `ssm_last_error` when it fails.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ssm_core::cli::{Config, Format, FrcDataset, Session, Stability, Stage};
use ssm_core::cont::EventKind;
use ssm_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidInput = 4,
    Numerical = 5,
    Missing = 6,
    Io = 7,
    OutOfRange = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsmStage {
    Equilibrium = 0,
    Po = 1,
    Torus2 = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsmFormat {
    Csv = 0,
    Json = 1,
}

/// One dataset row. Frequencies that do not apply are NaN.
/// `stability`: 1 stable, 0 unstable, -1 unknown. `event`: 0 none, then
/// SN, HB, PD, TR, BP, CP, EP as 1..7.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SsmRow {
    pub omega: f64,
    pub eps: f64,
    pub ts: f64,
    pub om_s: f64,
    pub om1s: f64,
    pub om2s: f64,
    pub rho_rot: f64,
    pub stability: i32,
    pub event: i32,
}

/// Pipeline state: system, cached reduced model and stage results.
pub struct SsmSession(Session);

pub struct SsmDataset(FrcDataset);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(SsmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) => SsmStatus::Config,
            Error::InvalidInput(_) | Error::Dimension(_) | Error::Json(_) | Error::Csv(_) => SsmStatus::InvalidInput,
            Error::Missing(_) => SsmStatus::Missing,
            Error::Io(_) => SsmStatus::Io,
            _ => SsmStatus::Numerical,
        };
        Fail(code, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SsmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SsmStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(p) => {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            set_error(&format!("panic: {}", msg.unwrap_or_default()));
            SsmStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(SsmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(SsmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ssm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ssm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Start a session from a JSON run config.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssm_session_new(config_json: *const c_char, out: *mut *mut SsmSession) -> SsmStatus {
    guard(|| {
        let cfg = Config::from_json(text(config_json, "config")?)?;
        put(out, SsmSession(Session::new(cfg)?))
    })
}

/// Start a session on the built-in two-oscillator example.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssm_session_example1(out: *mut *mut SsmSession) -> SsmStatus {
    guard(|| put(out, SsmSession(Session::new(Config::example1())?)))
}

/// # Safety
/// `session` must come from `ssm_session_new` or `ssm_session_example1` (or be null).
#[no_mangle]
pub unsafe extern "C" fn ssm_session_free(session: *mut SsmSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Run `stage` (an `SsmStage` value) and everything it depends on.
///
/// # Safety
/// `session` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssm_session_run(session: *mut SsmSession, stage: u32, out: *mut *mut SsmDataset) -> SsmStatus {
    guard(|| {
        let s = session.as_mut().ok_or_else(|| null("session"))?;
        let st = match stage {
            x if x == SsmStage::Equilibrium as u32 => Stage::Equilibrium,
            x if x == SsmStage::Po as u32 => Stage::Po,
            x if x == SsmStage::Torus2 as u32 => Stage::Torus2,
            _ => return Err(Fail(SsmStatus::OutOfRange, format!("unknown stage {stage}"))),
        };
        put(out, SsmDataset(s.0.dataset(st)?))
    })
}

/// # Safety
/// `dataset` must come from `ssm_session_run` (or be null).
#[no_mangle]
pub unsafe extern "C" fn ssm_dataset_free(dataset: *mut SsmDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Row count and number of amplitude columns.
///
/// # Safety
/// `dataset` must be a live handle; the outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ssm_dataset_shape(dataset: *const SsmDataset, rows: *mut usize, outputs: *mut usize) -> SsmStatus {
    guard(|| {
        let d = &get(dataset, "dataset")?.0;
        if rows.is_null() || outputs.is_null() {
            return Err(null("output pointer"));
        }
        *rows = d.rows.len();
        *outputs = d.metadata.outputs.len();
        Ok(())
    })
}

fn event_code(e: Option<EventKind>) -> i32 {
    match e {
        None => 0,
        Some(EventKind::SN) => 1,
        Some(EventKind::HB) => 2,
        Some(EventKind::PD) => 3,
        Some(EventKind::TR) => 4,
        Some(EventKind::BP) => 5,
        Some(EventKind::CP) => 6,
        Some(EventKind::EP) => 7,
    }
}

/// Row `index`; its amplitudes go to `amps`, which must hold one value per output.
///
/// # Safety
/// `dataset` must be a live handle, `row` valid, and `amps` null or room for the outputs.
#[no_mangle]
pub unsafe extern "C" fn ssm_dataset_row(dataset: *const SsmDataset, index: usize, row: *mut SsmRow, amps: *mut f64) -> SsmStatus {
    guard(|| {
        let d = &get(dataset, "dataset")?.0;
        let r = d.rows.get(index).ok_or_else(|| Fail(SsmStatus::OutOfRange, format!("row {index} of {}", d.rows.len())))?;
        let row = row.as_mut().ok_or_else(|| null("row"))?;
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        *row = SsmRow {
            omega: r.omega,
            eps: r.eps,
            ts: nan(r.ts),
            om_s: nan(r.om_s),
            om1s: nan(r.om1s),
            om2s: nan(r.om2s),
            rho_rot: nan(r.rho_rot),
            stability: match r.stability {
                Stability::Stable => 1,
                Stability::Unstable => 0,
                Stability::Unknown => -1,
            },
            event: event_code(r.event),
        };
        if !amps.is_null() {
            std::slice::from_raw_parts_mut(amps, r.amps.len()).copy_from_slice(&r.amps);
        }
        Ok(())
    })
}

/// Write the dataset into directory `dir` as `frc_<stage>.csv` or `.json` (`format` is an `SsmFormat`).
///
/// # Safety
/// `dataset` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ssm_dataset_export(dataset: *const SsmDataset, dir: *const c_char, format: u32) -> SsmStatus {
    guard(|| {
        let d = &get(dataset, "dataset")?.0;
        let dir = text(dir, "dir")?;
        let f = match format {
            x if x == SsmFormat::Csv as u32 => Format::Csv,
            x if x == SsmFormat::Json as u32 => Format::Json,
            _ => return Err(Fail(SsmStatus::OutOfRange, format!("unknown format {format}"))),
        };
        d.export(Path::new(dir), f)?;
        Ok(())
    })
}

/// JSON text of the dataset (columns, rows, metadata). Free with `ssm_string_free`.
///
/// # Safety
/// `dataset` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssm_dataset_json(dataset: *const SsmDataset, out: *mut *mut c_char) -> SsmStatus {
    guard(|| {
        let d = &get(dataset, "dataset")?.0;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let json = CString::new(d.to_json()?).map_err(|e| Fail(SsmStatus::InvalidInput, e.to_string()))?;
        *out = json.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library (or be null).
#[no_mangle]
pub unsafe extern "C" fn ssm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
