//! C ABI over the scenario engine.
//!
//! Every function returns an [`LsStatus`]; on failure the message is kept
//! per thread and read with [`ls_last_error_message`]. Handles are opaque and
//! must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lissajous_swarm::config::ScenarioConfig;
use lissajous_swarm::curve::LissajousParams;
use lissajous_swarm::sim::{self, SimOutput, World};
use lissajous_swarm::Error;

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    GuaranteeRefused = 4,
    SimulationFailed = 5,
    Io = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// Parsed, validated scenario.
pub struct LsScenario {
    config: ScenarioConfig,
}

/// Scenario advanced one tick at a time.
pub struct LsWorld {
    world: World,
}

/// Completed run with its trace, events and summary.
pub struct LsRun {
    output: SimOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> LsStatus {
    match err {
        Error::Config(_)
        | Error::InvalidCurve(_)
        | Error::InvalidSwarm(_)
        | Error::InvalidTracker(_) => LsStatus::InvalidConfig,
        Error::GuaranteeRefused(_) => LsStatus::GuaranteeRefused,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => LsStatus::Io,
        _ => LsStatus::SimulationFailed,
    }
}

fn fail(status: LsStatus, msg: impl Into<String>) -> LsStatus {
    set_error(msg.into());
    status
}

fn from_core(err: Error) -> LsStatus {
    let msg = match &err {
        Error::Config(list) | Error::GuaranteeRefused(list) => {
            format!("{err}: {}", list.join("; "))
        }
        _ => err.to_string(),
    };
    fail(status_of(&err), msg)
}

/// Runs `body`, converting panics into [`LsStatus::Panic`].
fn guard(body: impl FnOnce() -> LsStatus) -> LsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(LsStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, LsStatus> {
    if s.is_null() {
        return Err(fail(LsStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(s).to_str().map_err(|e| {
        fail(
            LsStatus::InvalidUtf8,
            format!("string argument is not UTF-8: {e}"),
        )
    })
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(LsStatus::NullPointer, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

fn into_c_string(s: String, out: *mut *mut c_char) -> LsStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            LsStatus::Ok
        }
        Err(e) => fail(LsStatus::InvalidUtf8, e.to_string()),
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ls_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ls_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a scenario from TOML text.
///
/// # Safety
/// `toml` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_scenario_from_toml(
    toml: *const c_char,
    out: *mut *mut LsScenario,
) -> LsStatus {
    guard(|| {
        non_null!(out);
        let text = match read_str(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ScenarioConfig::from_toml_str(text) {
            Ok(config) => {
                *out = Box::into_raw(Box::new(LsScenario { config }));
                LsStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Parses and validates a scenario file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_scenario_from_file(
    path: *const c_char,
    out: *mut *mut LsScenario,
) -> LsStatus {
    guard(|| {
        non_null!(out);
        let path = match read_str(path) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ScenarioConfig::from_path(Path::new(path)) {
            Ok(config) => {
                *out = Box::into_raw(Box::new(LsScenario { config }));
                LsStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ls_scenario_set_seed(scenario: *mut LsScenario, seed: u64) -> LsStatus {
    guard(|| {
        non_null!(scenario);
        (*scenario).config.seed = seed;
        LsStatus::Ok
    })
}

/// Writes the number of robots to `out`.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_scenario_robot_count(
    scenario: *const LsScenario,
    out: *mut usize,
) -> LsStatus {
    guard(|| {
        non_null!(scenario, out);
        *out = (*scenario).config.n();
        LsStatus::Ok
    })
}

/// Guarantee report as a JSON string; free it with [`ls_string_free`].
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_scenario_plan_json(
    scenario: *const LsScenario,
    out: *mut *mut c_char,
) -> LsStatus {
    guard(|| {
        non_null!(scenario, out);
        let report = sim::guarantee_report(&(*scenario).config);
        match serde_json::to_string(&report) {
            Ok(s) => into_c_string(s, out),
            Err(e) => fail(LsStatus::Io, e.to_string()),
        }
    })
}

/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ls_scenario_free(scenario: *mut LsScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Builds a world at time zero. Does not run the guarantee check.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_world_new(
    scenario: *const LsScenario,
    out: *mut *mut LsWorld,
) -> LsStatus {
    guard(|| {
        non_null!(scenario, out);
        match World::new(&(*scenario).config) {
            Ok(world) => {
                *out = Box::into_raw(Box::new(LsWorld { world }));
                LsStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Advances the world by `ticks` steps.
///
/// # Safety
/// `world` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ls_world_step(world: *mut LsWorld, ticks: usize) -> LsStatus {
    guard(|| {
        non_null!(world);
        for _ in 0..ticks {
            if let Err(e) = (*world).world.step() {
                return from_core(e);
            }
        }
        LsStatus::Ok
    })
}

/// # Safety
/// `world` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_world_time(world: *const LsWorld, out: *mut f64) -> LsStatus {
    guard(|| {
        non_null!(world, out);
        *out = (*world).world.t;
        LsStatus::Ok
    })
}

/// Phase and position of one robot; `position` receives x, y, z.
///
/// # Safety
/// `world` must be a live handle; `phase` must be writable and `position`
/// must point to three writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ls_world_robot(
    world: *const LsWorld,
    robot: usize,
    phase: *mut f64,
    position: *mut f64,
) -> LsStatus {
    guard(|| {
        non_null!(world, phase, position);
        let robots = &(*world).world.robots;
        let Some(r) = robots.get(robot) else {
            return fail(
                LsStatus::OutOfRange,
                format!("robot {robot} out of range ({} robots)", robots.len()),
            );
        };
        *phase = r.theta;
        let p = r.position();
        ptr::copy_nonoverlapping(p.as_ptr(), position, 3);
        LsStatus::Ok
    })
}

/// Smallest 3D distance between nominal robots at the current tick.
///
/// # Safety
/// `world` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_world_min_distance(world: *const LsWorld, out: *mut f64) -> LsStatus {
    guard(|| {
        non_null!(world, out);
        *out = (*world).world.metrics().min_distance;
        LsStatus::Ok
    })
}

/// # Safety
/// `world` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ls_world_free(world: *mut LsWorld) {
    if !world.is_null() {
        drop(Box::from_raw(world));
    }
}

/// Runs the scenario to completion, refusing it when the guarantee check
/// fails without the override flag.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_run(scenario: *const LsScenario, out: *mut *mut LsRun) -> LsStatus {
    guard(|| {
        non_null!(scenario, out);
        match sim::run(&(*scenario).config) {
            Ok(output) => {
                *out = Box::into_raw(Box::new(LsRun { output }));
                LsStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Summary as a JSON string; free it with [`ls_string_free`].
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_run_summary_json(run: *const LsRun, out: *mut *mut c_char) -> LsStatus {
    guard(|| {
        non_null!(run, out);
        match serde_json::to_string(&(*run).output.summary) {
            Ok(s) => into_c_string(s, out),
            Err(e) => fail(LsStatus::Io, e.to_string()),
        }
    })
}

/// Number of logged trace rows.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_run_trace_rows(run: *const LsRun, out: *mut usize) -> LsStatus {
    guard(|| {
        non_null!(run, out);
        *out = (*run).output.trace.rows.len();
        LsStatus::Ok
    })
}

/// Writes trace.csv, events.json and summary.json into `dir`.
///
/// # Safety
/// `run` must be a live handle; `dir` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ls_run_write(run: *const LsRun, dir: *const c_char) -> LsStatus {
    guard(|| {
        non_null!(run);
        let dir = match read_str(dir) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match (*run).output.write(Path::new(dir)) {
            Ok(()) => LsStatus::Ok,
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ls_run_free(run: *mut LsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Point of a Lissajous curve at parameter `theta`; `out` receives x, y, z.
///
/// # Safety
/// `out` must point to three writable doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ls_curve_eval(
    amp_x: f64,
    amp_y: f64,
    amp_z: f64,
    freq_x: u32,
    freq_y: u32,
    freq_z: u32,
    phase: f64,
    theta: f64,
    out: *mut f64,
) -> LsStatus {
    guard(|| {
        non_null!(out);
        let params = LissajousParams::analysis(amp_x, amp_y, amp_z, freq_x, freq_y, freq_z, phase);
        let problems = params.check();
        if !problems.is_empty() {
            return fail(LsStatus::InvalidConfig, problems.join("; "));
        }
        let p = params.eval(theta);
        ptr::copy_nonoverlapping(p.as_ptr(), out, 3);
        LsStatus::Ok
    })
}
