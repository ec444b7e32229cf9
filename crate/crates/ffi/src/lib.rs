//! C interface to the `oomdp` library.
//!
//! Every entry point returns an [`OomdpStatus`]. On failure a message is
//! available from [`oomdp_last_error`] until the next call on the same
//! thread. Objects are handed out as opaque pointers and released with the
//! matching `*_free` function; strings returned through `out` parameters are
//! released with [`oomdp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use oomdp::condition::{combine, matches, Condition};
use oomdp::domain::{bfs_optimal_steps, GridMap};
use oomdp::io::{parse_map, render_map};
use oomdp::learner::Doormax;
use oomdp::localization::{localize, scripted_path, LocalizeConfig};
use oomdp::model::OOState;
use oomdp::planner::{train, EpisodeConfig};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OomdpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    RuntimeError = 5,
    Panic = 6,
}

/// A parsed grid map.
pub struct OomdpMap(GridMap);

/// A transition-model learner.
pub struct OomdpLearner(Doormax);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OomdpTrainSummary {
    pub episodes: u32,
    pub last_steps: u32,
    /// Nonzero when the last episode delivered without unknown predictions.
    pub last_converged: u8,
    pub mispredictions: u32,
    pub unknown_predictions: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OomdpLocalizeSummary {
    pub updates: u32,
    pub final_rmse: f64,
    pub final_particles: u32,
    pub final_modes: u32,
    pub peak_particles: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(OomdpStatus, String);

fn fail<E: std::fmt::Display>(status: OomdpStatus) -> impl FnOnce(E) -> Fail {
    move |e| Fail(status, e.to_string())
}

/// Runs `f`, recording its error message and converting panics.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> OomdpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OomdpStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".to_owned());
            OomdpStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(OomdpStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(OomdpStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn object<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(OomdpStatus::NullArgument, format!("{what} is null")))
}

unsafe fn object_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(OomdpStatus::NullArgument, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(OomdpStatus::NullArgument, "output pointer is null".to_owned()));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s).map_err(fail(OomdpStatus::RuntimeError))?;
    put(out, c.into_raw())
}

fn count(n: usize) -> u32 {
    u32::try_from(n).unwrap_or(u32::MAX)
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn oomdp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn oomdp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses map text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oomdp_map_parse(text: *const c_char, out: *mut *mut OomdpMap) -> OomdpStatus {
    guard(|| {
        let map = parse_map(self::text(text, "text")?).map_err(fail(OomdpStatus::ParseError))?;
        put(out, Box::into_raw(Box::new(OomdpMap(map))))
    })
}

/// Loads one of the maps shipped with the library by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oomdp_map_bundled(name: *const c_char, out: *mut *mut OomdpMap) -> OomdpStatus {
    guard(|| {
        let name = text(name, "name")?;
        let map = oomdp::maps::load(name)
            .ok_or_else(|| Fail(OomdpStatus::InvalidArgument, format!("no bundled map named {name}")))?
            .map_err(fail(OomdpStatus::ParseError))?;
        put(out, Box::into_raw(Box::new(OomdpMap(map))))
    })
}

/// # Safety
/// `map` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn oomdp_map_free(map: *mut OomdpMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Canonical text of a map.
///
/// # Safety
/// `map` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oomdp_map_render(map: *const OomdpMap, out: *mut *mut c_char) -> OomdpStatus {
    guard(|| put_string(out, render_map(&object(map, "map")?.0)))
}

/// # Safety
/// `map` must be a live handle; `width` and `height` writable.
#[no_mangle]
pub unsafe extern "C" fn oomdp_map_size(map: *const OomdpMap, width: *mut u32, height: *mut u32) -> OomdpStatus {
    guard(|| {
        let m = &object(map, "map")?.0;
        put(width, m.width())?;
        put(height, m.height())
    })
}

/// Fewest actions that deliver box `target` from the map's start state.
///
/// # Safety
/// `map` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oomdp_map_optimal_steps(map: *const OomdpMap, target: u32, out: *mut u32) -> OomdpStatus {
    guard(|| {
        let m = &object(map, "map")?.0;
        let s = OOState::initial(m, target as usize).map_err(fail(OomdpStatus::InvalidArgument))?;
        let n = bfs_optimal_steps(m, &s).map_err(fail(OomdpStatus::RuntimeError))?;
        put(out, n)
    })
}

/// A fresh learner for the warehouse vocabulary keeping up to `k`
/// predictions per key.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oomdp_learner_new(k: u32, out: *mut *mut OomdpLearner) -> OomdpStatus {
    guard(|| {
        let l = Doormax::warehouse(k as usize).map_err(fail(OomdpStatus::InvalidArgument))?;
        put(out, Box::into_raw(Box::new(OomdpLearner(l))))
    })
}

/// Restores a learner from its JSON dump.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oomdp_learner_from_json(json: *const c_char, out: *mut *mut OomdpLearner) -> OomdpStatus {
    guard(|| {
        let l = Doormax::from_json(text(json, "json")?).map_err(fail(OomdpStatus::ParseError))?;
        put(out, Box::into_raw(Box::new(OomdpLearner(l))))
    })
}

/// # Safety
/// `learner` must come from this library and not have been freed. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn oomdp_learner_free(learner: *mut OomdpLearner) {
    if !learner.is_null() {
        drop(Box::from_raw(learner));
    }
}

/// JSON dump of the learned model.
///
/// # Safety
/// `learner` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oomdp_learner_json(learner: *const OomdpLearner, out: *mut *mut c_char) -> OomdpStatus {
    guard(|| put_string(out, object(learner, "learner")?.0.to_json()))
}

/// Runs `episodes` training episodes with default planner settings.
///
/// # Safety
/// `learner` and `map` must be live handles; `out` writable or null.
#[no_mangle]
pub unsafe extern "C" fn oomdp_learner_train(
    learner: *mut OomdpLearner,
    map: *const OomdpMap,
    episodes: u32,
    seed: u64,
    out: *mut OomdpTrainSummary,
) -> OomdpStatus {
    guard(|| {
        let l = &mut object_mut(learner, "learner")?.0;
        let m = &object(map, "map")?.0;
        let records = train(m, l, &EpisodeConfig::default(), episodes as usize, seed)
            .map_err(fail(OomdpStatus::RuntimeError))?;
        if out.is_null() {
            return Ok(());
        }
        let summary = OomdpTrainSummary {
            episodes: count(records.len()),
            last_steps: records.last().map_or(0, |r| count(r.steps)),
            last_converged: records.last().is_some_and(|r| r.converged()).into(),
            mispredictions: count(records.iter().map(|r| r.mispredictions).sum()),
            unknown_predictions: count(records.iter().map(|r| r.unknown_predictions).sum()),
        };
        put(out, summary)
    })
}

/// Combines two conditions written as strings over `0`, `1` and `*`.
///
/// # Safety
/// `a` and `b` must be NUL-terminated strings and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oomdp_condition_combine(
    a: *const c_char,
    b: *const c_char,
    out: *mut *mut c_char,
) -> OomdpStatus {
    guard(|| {
        let a: Condition = text(a, "a")?.parse().map_err(fail(OomdpStatus::ParseError))?;
        let b: Condition = text(b, "b")?.parse().map_err(fail(OomdpStatus::ParseError))?;
        let c = combine(&a, &b).map_err(fail(OomdpStatus::InvalidArgument))?;
        put_string(out, c.to_string())
    })
}

/// Writes 1 to `out` when observation `obs` satisfies `model`, else 0.
///
/// # Safety
/// `obs` and `model` must be NUL-terminated strings and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oomdp_condition_matches(
    obs: *const c_char,
    model: *const c_char,
    out: *mut u8,
) -> OomdpStatus {
    guard(|| {
        let obs: Condition = text(obs, "obs")?.parse().map_err(fail(OomdpStatus::ParseError))?;
        let model: Condition = text(model, "model")?.parse().map_err(fail(OomdpStatus::ParseError))?;
        let m = matches(&obs, &model).map_err(fail(OomdpStatus::InvalidArgument))?;
        put(out, u8::from(m))
    })
}

/// Localizes along the shortest route from the agent start to the
/// destination with default filter settings.
///
/// # Safety
/// `map` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oomdp_localize(
    map: *const OomdpMap,
    steps: u32,
    seed: u64,
    out: *mut OomdpLocalizeSummary,
) -> OomdpStatus {
    guard(|| {
        let m = &object(map, "map")?.0;
        let cfg = LocalizeConfig {
            steps: steps as usize,
            ..Default::default()
        };
        let truth = scripted_path(m, cfg.steps).map_err(fail(OomdpStatus::InvalidArgument))?;
        let rep = localize(m, &truth, &cfg, seed).map_err(fail(OomdpStatus::RuntimeError))?;
        let last = rep
            .rows
            .last()
            .ok_or_else(|| Fail(OomdpStatus::RuntimeError, "no filter updates".to_owned()))?;
        put(
            out,
            OomdpLocalizeSummary {
                updates: count(rep.rows.len()),
                final_rmse: last.rmse,
                final_particles: count(last.particles),
                final_modes: count(last.modes),
                peak_particles: count(rep.rows.iter().map(|r| r.particles).max().unwrap_or(0)),
            },
        )
    })
}
