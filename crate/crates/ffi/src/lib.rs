//! C ABI over the lifebranch solvers and simulator.
//!
//! Every function returns an [`LbStatus`]; on failure the message is
//! available from [`lb_last_error`] on the same thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;

use lifebranch::extinction::{extinction_prob, phi_curve};
use lifebranch::model::{build_model, ConfigDocument, ModelSpec};
use lifebranch::renewal::{limit_functionals, malthusian, mean_measure, MalthusianSolution};
use lifebranch::sim::{purpose, simulate_trajectory, stream_seed};
use lifebranch::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidModel = 4,
    NotSupercritical = 5,
    OutOfRange = 6,
    Numerical = 7,
    Panic = 8,
}

/// Limit functionals of the model's test function.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LbLimits {
    pub a_f: f64,
    pub cap_a_f: f64,
    pub a_sigma: f64,
    pub n1: f64,
    pub g_v: f64,
}

/// Opaque model handle.
pub struct LbModel {
    spec: ModelSpec,
    sol: OnceLock<Result<MalthusianSolution, String>>,
    mean: OnceLock<Vec<f64>>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> LbStatus {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Io(_) => LbStatus::Config,
        Error::InvalidModel(_) | Error::UnboundedSecondFactorial(_) => LbStatus::InvalidModel,
        Error::NotSupercritical { .. } => LbStatus::NotSupercritical,
        Error::OutOfRange(_) | Error::HorizonExceeded { .. } => LbStatus::OutOfRange,
        _ => LbStatus::Numerical,
    }
}

/// Run `f`, mapping errors and panics to status codes.
fn guard<F: FnOnce() -> Result<(), (LbStatus, String)>>(f: F) -> LbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LbStatus::Ok
        }
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            LbStatus::Panic
        }
    }
}

fn lift(e: Error) -> (LbStatus, String) {
    (status_of(&e), e.to_string())
}

fn null() -> (LbStatus, String) {
    (LbStatus::NullPointer, "null pointer argument".into())
}

impl LbModel {
    fn sol(&self) -> Result<MalthusianSolution, (LbStatus, String)> {
        self.sol
            .get_or_init(|| malthusian(&self.spec).map_err(|e| e.to_string()))
            .clone()
            .map_err(|m| {
                let s = if m.contains("not > 1") { LbStatus::NotSupercritical } else { LbStatus::Numerical };
                (s, m)
            })
    }
}

/// Build a model from a JSON configuration. The handle must be released
/// with [`lb_model_free`].
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lb_model_from_json(json: *const c_char, out: *mut *mut LbModel) -> LbStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return Err(null());
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (LbStatus::InvalidUtf8, e.to_string()))?;
        let doc = ConfigDocument::from_json(text).map_err(lift)?;
        let spec = build_model(&doc).map_err(lift)?;
        let model = Box::new(LbModel { spec, sol: OnceLock::new(), mean: OnceLock::new() });
        *out = Box::into_raw(model);
        Ok(())
    })
}

/// Release a handle; null is ignored.
///
/// # Safety
/// `model` must come from [`lb_model_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lb_model_free(model: *mut LbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Malthusian parameter and mean total offspring.
///
/// # Safety
/// Pointers must be valid; `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lb_malthusian(model: *const LbModel, alpha_tilde: *mut f64, m: *mut f64) -> LbStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(null)?;
        if alpha_tilde.is_null() || m.is_null() {
            return Err(null());
        }
        let sol = model.sol()?;
        *alpha_tilde = sol.alpha_tilde;
        *m = sol.m;
        Ok(())
    })
}

/// E⟨X_t, f⟩ at a grid time t within the solver horizon.
///
/// # Safety
/// Pointers must be valid; `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lb_mean(model: *const LbModel, t: f64, out: *mut f64) -> LbStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(null)?;
        let out = out.as_mut().ok_or_else(null)?;
        let m = model.mean.get_or_init(|| mean_measure(&model.spec).m_f);
        let h = model.spec.numerics.h;
        let horizon = (m.len() - 1) as f64 * h;
        if !(0.0..=horizon + 1e-9 * h).contains(&t) {
            return Err((LbStatus::OutOfRange, format!("t = {t} outside [0, {horizon}]")));
        }
        *out = m[(t / h).round() as usize];
        Ok(())
    })
}

/// Extinction probability q.
///
/// # Safety
/// Pointers must be valid; `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lb_extinction_prob(model: *const LbModel, q: *mut f64) -> LbStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(null)?;
        let q = q.as_mut().ok_or_else(null)?;
        *q = extinction_prob(&model.spec).map_err(lift)?.q;
        Ok(())
    })
}

/// a(f), A(f), A(σ), n1 and ⟨G, V⟩.
///
/// # Safety
/// Pointers must be valid; `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lb_limits(model: *const LbModel, out: *mut LbLimits) -> LbStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(null)?;
        let out = out.as_mut().ok_or_else(null)?;
        let s = limit_functionals(&model.spec, &model.sol()?).summary();
        *out = LbLimits { a_f: s.a_f, cap_a_f: s.cap_a_f, a_sigma: s.a_sigma, n1: s.n1, g_v: s.g_v };
        Ok(())
    })
}

/// φ^f(θ) at the solver horizon for `n` values of θ, written to `out`.
///
/// # Safety
/// `thetas` and `out` must point to `n` doubles; `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lb_phi(model: *const LbModel, thetas: *const f64, n: usize, out: *mut f64) -> LbStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(null)?;
        if n == 0 {
            return Ok(());
        }
        if thetas.is_null() || out.is_null() {
            return Err(null());
        }
        let th = std::slice::from_raw_parts(thetas, n);
        let curve = phi_curve(&model.spec, &model.sol()?, th).map_err(lift)?;
        let out = std::slice::from_raw_parts_mut(out, n);
        for (o, &t) in out.iter_mut().zip(th) {
            *o = curve.value_at(t);
        }
        Ok(())
    })
}

/// Population at time t of trajectory `index` under master seed `seed`;
/// `truncated` is set when the population exceeded `max_pop`.
///
/// # Safety
/// Pointers must be valid; `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lb_simulate_population(
    model: *const LbModel,
    seed: u64,
    index: u64,
    t: f64,
    max_pop: usize,
    pop: *mut u64,
    truncated: *mut bool,
) -> LbStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(null)?;
        if pop.is_null() || truncated.is_null() {
            return Err(null());
        }
        if !(t >= 0.0 && t.is_finite()) || max_pop == 0 {
            return Err((LbStatus::OutOfRange, "t must be finite and nonnegative, max_pop positive".into()));
        }
        let sol = model.sol()?;
        let r = simulate_trajectory(&model.spec, &sol, stream_seed(seed, purpose::TRAJECTORY, index), &[t], max_pop);
        *pop = r.snapshots[0].alive() as u64;
        *truncated = r.truncated;
        Ok(())
    })
}

/// Message of the last failed call on this thread, empty after success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn lb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
