//! C ABI over the simulator.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `*_new`/`*_draw`/`*_solve` call and released by the matching `*_free`.
//! Functions return a [`RisStatus`]; on failure a message is kept per thread
//! and can be read with [`ris_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use risnoma::metrics::radar::radar_snr_lb;
use risnoma::orchestrator::baselines::BaselineRun;
use risnoma::orchestrator::{run_baseline, BaselineKind, OrchestratorError, Scenario, SolveStatus};
use risnoma::scenario::{Preset, SystemConfig};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RisStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    InfeasibleScenario = 4,
    Solver = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RisPreset {
    Desk = 0,
    Paper = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RisSolveStatus {
    Converged = 0,
    MaxIters = 1,
    FailedFeasibility = 2,
}

/// Scenario configuration.
pub struct RisConfig(SystemConfig);

/// Channels and initial phases drawn for one seed.
pub struct RisScenario(Scenario);

/// Design and trace of one baseline run.
pub struct RisResult(BaselineRun);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: RisStatus, msg: impl Into<String>) -> RisStatus {
    set_error(msg);
    status
}

fn status_of(e: &OrchestratorError) -> RisStatus {
    match e {
        OrchestratorError::InfeasibleScenario(_) => RisStatus::InfeasibleScenario,
        OrchestratorError::Scenario(_) => RisStatus::Config,
        _ => RisStatus::Solver,
    }
}

/// Runs `f`, turning a panic into [`RisStatus::Panic`].
fn guard(f: impl FnOnce() -> RisStatus) -> RisStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(RisStatus::Panic, msg)
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, RisStatus> {
    if s.is_null() {
        return Err(fail(RisStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(RisStatus::InvalidArgument, "string is not UTF-8"))
}

fn boxed<T>(out: *mut *mut T, value: T) -> RisStatus {
    // SAFETY: every caller has checked `out` for null.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    RisStatus::Ok
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ris_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ris_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a preset configuration.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn ris_config_new(preset: RisPreset, out: *mut *mut RisConfig) -> RisStatus {
    guard(|| {
        if out.is_null() {
            return fail(RisStatus::NullPointer, "out is null");
        }
        let p = match preset {
            RisPreset::Desk => Preset::Desk,
            RisPreset::Paper => Preset::Paper,
        };
        boxed(out, RisConfig(p.config()))
    })
}

/// Parses a TOML configuration (same keys as the config file).
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` as in [`ris_config_new`].
#[no_mangle]
pub unsafe extern "C" fn ris_config_from_toml(toml: *const c_char, out: *mut *mut RisConfig) -> RisStatus {
    guard(|| {
        if out.is_null() {
            return fail(RisStatus::NullPointer, "out is null");
        }
        let text = match read_str(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match SystemConfig::from_toml_str(text) {
            Ok(cfg) => boxed(out, RisConfig(cfg)),
            Err(e) => fail(RisStatus::Config, e.to_string()),
        }
    })
}

/// Sets the transmit power budget in dBm.
///
/// # Safety
/// `cfg` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn ris_config_set_power_dbm(cfg: *mut RisConfig, p_max_dbm: f64) -> RisStatus {
    guard(|| {
        let Some(c) = cfg.as_mut() else {
            return fail(RisStatus::NullPointer, "cfg is null");
        };
        if !p_max_dbm.is_finite() {
            return fail(RisStatus::InvalidArgument, "power must be finite");
        }
        c.0.p_max_dbm = p_max_dbm;
        RisStatus::Ok
    })
}

/// # Safety
/// `cfg` must come from [`ris_config_new`] or [`ris_config_from_toml`] and
/// not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ris_config_free(cfg: *mut RisConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Draws channels and initial phases for `seed`.
///
/// # Safety
/// `cfg` must be a live configuration; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ris_scenario_draw(cfg: *const RisConfig, seed: u64, out: *mut *mut RisScenario) -> RisStatus {
    guard(|| {
        let Some(c) = cfg.as_ref() else {
            return fail(RisStatus::NullPointer, "cfg is null");
        };
        if out.is_null() {
            return fail(RisStatus::NullPointer, "out is null");
        }
        match Scenario::draw(&c.0, seed) {
            Ok(sc) => boxed(out, RisScenario(sc)),
            Err(e) => fail(RisStatus::Config, e.to_string()),
        }
    })
}

/// # Safety
/// As [`ris_config_free`].
#[no_mangle]
pub unsafe extern "C" fn ris_scenario_free(sc: *mut RisScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Solves the scenario with the named baseline (`proposed`, `comm_only`,
/// `discrete:<bits>`, `random_phase`, `without_ris`, `without_noma`).
///
/// # Safety
/// `sc` must be live, `baseline` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ris_solve(sc: *const RisScenario, baseline: *const c_char, out: *mut *mut RisResult) -> RisStatus {
    guard(|| {
        let Some(s) = sc.as_ref() else {
            return fail(RisStatus::NullPointer, "scenario is null");
        };
        if out.is_null() {
            return fail(RisStatus::NullPointer, "out is null");
        }
        let kind: BaselineKind = match read_str(baseline).map(str::parse) {
            Ok(Ok(k)) => k,
            Ok(Err(e)) => return fail(RisStatus::InvalidArgument, e),
            Err(st) => return st,
        };
        match run_baseline(kind, &s.0, None) {
            Ok(run) => boxed(out, RisResult(run)),
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// # Safety
/// As [`ris_config_free`].
#[no_mangle]
pub unsafe extern "C" fn ris_result_free(res: *mut RisResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Sum rate of the final design in bits/s/Hz.
///
/// # Safety
/// `res` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ris_result_sum_rate(res: *const RisResult, out: *mut f64) -> RisStatus {
    guard(|| {
        let (Some(r), false) = (res.as_ref(), out.is_null()) else {
            return fail(RisStatus::NullPointer, "null argument");
        };
        *out = *r.0.trace.sum_rates().last().expect("trace has an initial rate");
        RisStatus::Ok
    })
}

/// Final solver status.
///
/// # Safety
/// `res` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ris_result_status(res: *const RisResult, out: *mut RisSolveStatus) -> RisStatus {
    guard(|| {
        let (Some(r), false) = (res.as_ref(), out.is_null()) else {
            return fail(RisStatus::NullPointer, "null argument");
        };
        *out = match r.0.trace.status {
            SolveStatus::Converged => RisSolveStatus::Converged,
            SolveStatus::MaxIters => RisSolveStatus::MaxIters,
            SolveStatus::FailedFeasibility => RisSolveStatus::FailedFeasibility,
        };
        RisStatus::Ok
    })
}

/// Sum rate before the first iteration followed by the rate after each
/// iteration. Writes `min(len, needed)` values and stores the full count in
/// `needed`; returns [`RisStatus::BufferTooSmall`] when `len < needed`.
///
/// # Safety
/// `buf` must hold `len` doubles (may be NULL when `len == 0`); `needed`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ris_result_sum_rate_trace(
    res: *const RisResult,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> RisStatus {
    guard(|| {
        let (Some(r), false) = (res.as_ref(), needed.is_null()) else {
            return fail(RisStatus::NullPointer, "null argument");
        };
        copy_out(&r.0.trace.sum_rates(), buf, len, needed)
    })
}

/// Smallest radar SNR lower bound over targets divided by its threshold,
/// in dB. +inf without targets.
///
/// # Safety
/// `res` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ris_result_min_snr_margin_db(res: *const RisResult, out: *mut f64) -> RisStatus {
    guard(|| {
        let (Some(r), false) = (res.as_ref(), out.is_null()) else {
            return fail(RisStatus::NullPointer, "null argument");
        };
        let run = &r.0;
        *out = (0..run.ch.l())
            .map(|l| 10.0 * (radar_snr_lb(&run.cfg, &run.ch, &run.design, l) / run.cfg.snr_threshold(l)).log10())
            .fold(f64::INFINITY, f64::min);
        RisStatus::Ok
    })
}

/// RIS phases of the final design, in radians. Same buffer protocol as
/// [`ris_result_sum_rate_trace`].
///
/// # Safety
/// As [`ris_result_sum_rate_trace`].
#[no_mangle]
pub unsafe extern "C" fn ris_result_phases(res: *const RisResult, buf: *mut f64, len: usize, needed: *mut usize) -> RisStatus {
    guard(|| {
        let (Some(r), false) = (res.as_ref(), needed.is_null()) else {
            return fail(RisStatus::NullPointer, "null argument");
        };
        let phases: Vec<f64> = r.0.design.v.iter().map(|z| z.arg()).collect();
        copy_out(&phases, buf, len, needed)
    })
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize, needed: *mut usize) -> RisStatus {
    *needed = src.len();
    let n = src.len().min(len);
    if n > 0 {
        if buf.is_null() {
            return fail(RisStatus::NullPointer, "buffer is null");
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, n);
    }
    if len < src.len() {
        return fail(RisStatus::BufferTooSmall, format!("need {} values, got {len}", src.len()));
    }
    RisStatus::Ok
}
