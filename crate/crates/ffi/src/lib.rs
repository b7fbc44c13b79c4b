//! C interface to `see-core`.
//!
//! Every fallible call returns a [`SeeStatus`]; on failure the message is available
//! from [`see_last_error`] on the same thread. Objects are opaque handles released with
//! their `_free` function. Strings returned to the caller are released with
//! [`see_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use see_core::cli::pipeline_options;
use see_core::game::{GameModel, ViabilitySet};
use see_core::io::{to_json, RunConfig};
use see_core::mse::{enumerate_stationary_mpe, EquilibriumSet};
use see_core::refine::{run_pipeline, RefinementReport};
use see_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidModel = 4,
    InvalidArgument = 5,
    BudgetExceeded = 6,
    NoConvergence = 7,
    NoThreshold = 8,
    NoSelection = 9,
    OutOfRange = 10,
    Internal = 11,
}

/// A model with its viability set and run settings.
pub struct SeeModel {
    cfg: RunConfig,
    model: GameModel,
    viability: ViabilitySet,
}

/// A certified set of pure stationary equilibria.
pub struct SeeEquilibria {
    set: EquilibriumSet,
}

/// Output of the refinement pipeline.
pub struct SeeReport {
    report: RefinementReport,
}

/// Set sizes along the refinement chain.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SeeCounts {
    pub equilibria: usize,
    pub viable: usize,
    pub renegotiation_proof: usize,
    pub selected: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SeeStatus {
    match e {
        Error::Config(_) => SeeStatus::Config,
        Error::InvalidModel(_) | Error::InvalidProfile(_) | Error::Shape { .. } => SeeStatus::InvalidModel,
        Error::InvalidArgument(_) | Error::Boundary(_) | Error::DegenerateSoc(_) => SeeStatus::InvalidArgument,
        Error::BudgetExceeded { .. } => SeeStatus::BudgetExceeded,
        Error::IterationBudget { .. } | Error::NotCertified { .. } => SeeStatus::NoConvergence,
        Error::NoThreshold { .. } | Error::MissingSafeAction => SeeStatus::NoThreshold,
        Error::NoSelection(_) => SeeStatus::NoSelection,
        Error::Containment(_) | Error::Io(_) => SeeStatus::Internal,
    }
}

fn fail(status: SeeStatus, msg: impl Into<String>) -> SeeStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, recording errors and converting panics to [`SeeStatus::Internal`].
fn guard(f: impl FnOnce() -> Result<(), SeeStatus>) -> SeeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SeeStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(SeeStatus::Internal, "panic inside the library"),
    }
}

fn core<T>(r: see_core::Result<T>) -> Result<T, SeeStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn borrow<'a, T>(p: *const T) -> Result<&'a T, SeeStatus> {
    p.as_ref().ok_or_else(|| fail(SeeStatus::NullPointer, "null handle"))
}

unsafe fn out_ptr<'a, T>(p: *mut T) -> Result<&'a mut T, SeeStatus> {
    p.as_mut().ok_or_else(|| fail(SeeStatus::NullPointer, "null output pointer"))
}

fn load(text: &str) -> Result<SeeModel, SeeStatus> {
    let cfg = core(RunConfig::from_toml(text))?;
    let loaded = core(cfg.build_model())?;
    Ok(SeeModel { cfg, model: loaded.model, viability: loaded.viability })
}

/// Message of the last failed call on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn see_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn see_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a model from the text of a run configuration.
///
/// # Safety
/// `toml` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn see_model_from_toml(toml: *const c_char, out: *mut *mut SeeModel) -> SeeStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        if toml.is_null() {
            return Err(fail(SeeStatus::NullPointer, "null configuration text"));
        }
        let text = CStr::from_ptr(toml).to_str().map_err(|e| fail(SeeStatus::InvalidUtf8, e.to_string()))?;
        *out = Box::into_raw(Box::new(load(text)?));
        Ok(())
    })
}

/// The three-state exploitation game at `discount`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn see_model_toy3(discount: f64, out: *mut *mut SeeModel) -> SeeStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        if !discount.is_finite() {
            return Err(fail(SeeStatus::InvalidArgument, "discount must be finite"));
        }
        *out = Box::into_raw(Box::new(load(&format!("[model]\nkind = \"toy3\"\ndiscount = {discount:?}\n"))?));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from a `see_model_*` constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn see_model_free(model: *mut SeeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of states, 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn see_model_n_states(model: *const SeeModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.n_states())
}

/// Whether `state` belongs to the viability set.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn see_model_is_viable(model: *const SeeModel, state: usize) -> bool {
    model.as_ref().is_some_and(|m| state < m.model.n_states() && m.viability.contains(state))
}

/// Enumerates every pure stationary equilibrium, certified at the configured tolerance
/// and within the configured profile budget.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn see_enumerate(model: *const SeeModel, out: *mut *mut SeeEquilibria) -> SeeStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        let m = borrow(model)?;
        let set = core(enumerate_stationary_mpe(&m.model, m.cfg.run.cert_tol, m.cfg.run.budget))?;
        *out = Box::into_raw(Box::new(SeeEquilibria { set }));
        Ok(())
    })
}

/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn see_equilibria_len(set: *const SeeEquilibria) -> usize {
    set.as_ref().map_or(0, |s| s.set.len())
}

/// Copies the values of member `k` into `w_x` and `w_e`, each of length `n`, which
/// must equal the number of states.
///
/// # Safety
/// `set` must be a live handle; `w_x` and `w_e` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn see_equilibria_values(
    set: *const SeeEquilibria,
    k: usize,
    w_x: *mut f64,
    w_e: *mut f64,
    n: usize,
) -> SeeStatus {
    guard(|| {
        let s = borrow(set)?;
        let eq = s.set.members.get(k).ok_or_else(|| fail(SeeStatus::OutOfRange, format!("member {k} out of range")))?;
        copy_values(&eq.values.w_x, &eq.values.w_e, w_x, w_e, n)
    })
}

/// Leader action index of member `k` at `state`.
///
/// # Safety
/// `set` must be a live handle and `action` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn see_equilibria_leader_action(
    set: *const SeeEquilibria,
    k: usize,
    state: usize,
    action: *mut usize,
) -> SeeStatus {
    guard(|| {
        let s = borrow(set)?;
        let action = out_ptr(action)?;
        let a = s
            .set
            .members
            .get(k)
            .and_then(|m| m.profile.leader.get(state))
            .ok_or_else(|| fail(SeeStatus::OutOfRange, format!("member {k}, state {state} out of range")))?;
        *action = *a;
        Ok(())
    })
}

/// Largest one-shot deviation gain of member `k`.
///
/// # Safety
/// `set` must be a live handle and `gain` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn see_equilibria_max_gain(set: *const SeeEquilibria, k: usize, gain: *mut f64) -> SeeStatus {
    guard(|| {
        let s = borrow(set)?;
        let gain = out_ptr(gain)?;
        let eq = s.set.members.get(k).ok_or_else(|| fail(SeeStatus::OutOfRange, format!("member {k} out of range")))?;
        *gain = eq.report.max_gain;
        Ok(())
    })
}

/// # Safety
/// `set` must be null or a handle from [`see_enumerate`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn see_equilibria_free(set: *mut SeeEquilibria) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Runs the refinement pipeline with the settings of the model's configuration.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn see_refine(model: *const SeeModel, out: *mut *mut SeeReport) -> SeeStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        let m = borrow(model)?;
        let report = core(run_pipeline(&m.model, &m.viability, &pipeline_options(&m.cfg)))?;
        *out = Box::into_raw(Box::new(SeeReport { report }));
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle and `counts` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn see_report_counts(report: *const SeeReport, counts: *mut SeeCounts) -> SeeStatus {
    guard(|| {
        let r = &borrow(report)?.report;
        *out_ptr(counts)? = SeeCounts {
            equilibria: r.equilibria.len(),
            viable: r.viable.len(),
            renegotiation_proof: r.renegotiation_proof.len(),
            selected: r.selected.is_some(),
        };
        Ok(())
    })
}

/// Penalty applied before equilibrium computation (0 when unpenalized).
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn see_report_penalty(report: *const SeeReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.report.penalty)
}

/// Values of the selected profile; [`SeeStatus::NoSelection`] when nothing was selected.
///
/// # Safety
/// `report` must be a live handle; `w_x` and `w_e` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn see_report_selected_values(
    report: *const SeeReport,
    w_x: *mut f64,
    w_e: *mut f64,
    n: usize,
) -> SeeStatus {
    guard(|| {
        let r = &borrow(report)?.report;
        let sel = r.selected.as_ref().ok_or_else(|| fail(SeeStatus::NoSelection, "no profile was selected"))?;
        copy_values(&sel.values.w_x, &sel.values.w_e, w_x, w_e, n)
    })
}

/// The full report as JSON; release with [`see_string_free`]. Null on failure.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn see_report_to_json(report: *const SeeReport) -> *mut c_char {
    let mut out = ptr::null_mut();
    let status = guard(|| {
        let r = &borrow(report)?.report;
        let text = core(to_json(r))?;
        out = CString::new(text).map_err(|e| fail(SeeStatus::Internal, e.to_string()))?.into_raw();
        Ok(())
    });
    if status == SeeStatus::Ok {
        out
    } else {
        ptr::null_mut()
    }
}

/// # Safety
/// `report` must be null or a handle from [`see_refine`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn see_report_free(report: *mut SeeReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn see_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn copy_values(src_x: &[f64], src_e: &[f64], w_x: *mut f64, w_e: *mut f64, n: usize) -> Result<(), SeeStatus> {
    if w_x.is_null() || w_e.is_null() {
        return Err(fail(SeeStatus::NullPointer, "null value buffer"));
    }
    if n != src_x.len() {
        return Err(fail(SeeStatus::InvalidArgument, format!("buffer length {n}, model has {} states", src_x.len())));
    }
    ptr::copy_nonoverlapping(src_x.as_ptr(), w_x, n);
    ptr::copy_nonoverlapping(src_e.as_ptr(), w_e, n);
    Ok(())
}
