//! C ABI over `rbdsde`.
//!
//! Every handle is opaque and owned by the caller once returned; release it
//! with the matching `_free`. Every fallible call returns an [`RbdsdeStatus`]
//! and leaves a message for [`rbdsde_last_error`] on the calling thread.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rbdsde::condexp::{CondExpEngine, RegressionBasis};
use rbdsde::model::{builtin_problem, ProblemSpec};
use rbdsde::noise::{enumerate_tree, make_grid, sample_noise, NoiseBundle};
use rbdsde::scheme::{iterate_maximal, iterate_minimal, SchemeConfig};
use rbdsde::solver::{solve_lipschitz, SolutionField, SolverConfig};
use rbdsde::Error;

pub const RBDSDE_ENGINE_TREE: u32 = 0;
pub const RBDSDE_ENGINE_REGRESSION: u32 = 1;

pub const RBDSDE_SELECT_MINIMAL: u32 = 0;
pub const RBDSDE_SELECT_MAXIMAL: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbdsdeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownProblem = 3,
    NotTree = 4,
    Capacity = 5,
    NotLipschitz = 6,
    /// Contraction, fixed-point or regression failure.
    Numerical = 7,
    NonMonotone = 8,
    Precondition = 9,
    Unsupported = 10,
    HypothesisRefused = 11,
    OutOfRange = 12,
    Panic = 99,
}

/// Problem definition; create with [`rbdsde_problem_builtin`].
pub struct RbdsdeProblem(ProblemSpec);

/// Sampled or enumerated increments.
pub struct RbdsdeNoise(NoiseBundle);

/// Discrete solution `(Y, Z, K)`.
pub struct RbdsdeSolution(SolutionField);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RbdsdeStatus {
    match e {
        Error::InvalidParameter(_) | Error::Shape(_) | Error::Config(_) | Error::Io(_) => RbdsdeStatus::InvalidArgument,
        Error::UnknownProblem(_) => RbdsdeStatus::UnknownProblem,
        Error::NotTree => RbdsdeStatus::NotTree,
        Error::Capacity { .. } => RbdsdeStatus::Capacity,
        Error::NotLipschitz => RbdsdeStatus::NotLipschitz,
        Error::RankDeficient { .. } | Error::TooFewPaths { .. } | Error::Contraction { .. } | Error::Picard { .. } => {
            RbdsdeStatus::Numerical
        }
        Error::NonMonotone { .. } => RbdsdeStatus::NonMonotone,
        Error::Precondition(_) => RbdsdeStatus::Precondition,
        Error::Unsupported(_) => RbdsdeStatus::Unsupported,
        Error::HypothesisRefused { .. } => RbdsdeStatus::HypothesisRefused,
    }
}

fn fail(status: RbdsdeStatus, msg: impl Into<String>) -> RbdsdeStatus {
    set_error(msg.into());
    status
}

/// Run `body`, turning errors and panics into a status.
fn guard(body: impl FnOnce() -> Result<(), (RbdsdeStatus, String)>) -> RbdsdeStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RbdsdeStatus::Ok,
        Ok(Err((s, msg))) => fail(s, msg),
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(RbdsdeStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

fn lift(e: Error) -> (RbdsdeStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RbdsdeStatus, String) {
    (RbdsdeStatus::NullPointer, format!("{what} is null"))
}

fn engine(kind: u32, degree: u32) -> Result<CondExpEngine, (RbdsdeStatus, String)> {
    match kind {
        RBDSDE_ENGINE_TREE => Ok(CondExpEngine::Tree),
        RBDSDE_ENGINE_REGRESSION => Ok(CondExpEngine::Regression(RegressionBasis::monomial(degree as usize))),
        k => Err((RbdsdeStatus::InvalidArgument, format!("unknown engine {k}"))),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rbdsde_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rbdsde_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rbdsde_problem_builtin(name: *const c_char, out: *mut *mut RbdsdeProblem) -> RbdsdeStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| (RbdsdeStatus::InvalidArgument, "name is not UTF-8".to_string()))?;
        let spec = builtin_problem(name).map_err(lift)?;
        *out = Box::into_raw(Box::new(RbdsdeProblem(spec)));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rbdsde_problem_free(problem: *mut RbdsdeProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Full Rademacher tree with `4^steps` paths on `[0, horizon]`, `d = l = 1`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rbdsde_noise_tree(horizon: f64, steps: usize, out: *mut *mut RbdsdeNoise) -> RbdsdeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = make_grid(horizon, steps).map_err(lift)?;
        let noise = enumerate_tree(&grid).map_err(lift)?;
        *out = Box::into_raw(Box::new(RbdsdeNoise(noise)));
        Ok(())
    })
}

/// Gaussian increments; identical for a given seed on any thread count.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rbdsde_noise_gaussian(
    horizon: f64,
    steps: usize,
    paths: usize,
    dim_w: usize,
    dim_b: usize,
    seed: u64,
    out: *mut *mut RbdsdeNoise,
) -> RbdsdeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = make_grid(horizon, steps).map_err(lift)?;
        let noise = sample_noise(&grid, paths, dim_w, dim_b, seed).map_err(lift)?;
        *out = Box::into_raw(Box::new(RbdsdeNoise(noise)));
        Ok(())
    })
}

/// # Safety
/// `noise` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rbdsde_noise_free(noise: *mut RbdsdeNoise) {
    if !noise.is_null() {
        drop(Box::from_raw(noise));
    }
}

/// Direct solve for a generator with a declared Lipschitz constant.
///
/// `degree` is ignored by the tree engine.
///
/// # Safety
/// Handles must be live; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rbdsde_solve(
    problem: *const RbdsdeProblem,
    noise: *const RbdsdeNoise,
    engine_kind: u32,
    degree: u32,
    out: *mut *mut RbdsdeSolution,
) -> RbdsdeStatus {
    guard(|| {
        let (Some(p), Some(n)) = (problem.as_ref(), noise.as_ref()) else {
            return Err(null("handle"));
        };
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = SolverConfig::default().with_engine(engine(engine_kind, degree)?);
        let field = solve_lipschitz(&p.0, &n.0, &cfg).map_err(lift)?;
        *out = Box::into_raw(Box::new(RbdsdeSolution(field)));
        Ok(())
    })
}

/// Monotone scheme towards the minimal or maximal solution.
///
/// `tol <= 0` and `max_n == 0` keep the engine defaults. `converged` may be
/// NULL.
///
/// # Safety
/// Handles must be live; `out` must be a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn rbdsde_iterate(
    problem: *const RbdsdeProblem,
    noise: *const RbdsdeNoise,
    engine_kind: u32,
    degree: u32,
    selection: u32,
    tol: f64,
    max_n: usize,
    out: *mut *mut RbdsdeSolution,
    converged: *mut bool,
) -> RbdsdeStatus {
    guard(|| {
        let (Some(p), Some(n)) = (problem.as_ref(), noise.as_ref()) else {
            return Err(null("handle"));
        };
        if out.is_null() {
            return Err(null("out"));
        }
        let mut cfg = SchemeConfig::for_engine(engine(engine_kind, degree)?);
        if tol > 0.0 {
            cfg = cfg.with_tol(tol);
        }
        if max_n > 0 {
            cfg = cfg.with_max_n(max_n);
        }
        let outcome = match selection {
            RBDSDE_SELECT_MINIMAL => iterate_minimal(&p.0, &n.0, &cfg),
            RBDSDE_SELECT_MAXIMAL => iterate_maximal(&p.0, &n.0, &cfg),
            s => return Err((RbdsdeStatus::InvalidArgument, format!("unknown selection {s}"))),
        }
        .map_err(lift)?;
        if !converged.is_null() {
            *converged = outcome.converged;
        }
        *out = Box::into_raw(Box::new(RbdsdeSolution(outcome.field)));
        Ok(())
    })
}

/// # Safety
/// `solution` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rbdsde_solution_free(solution: *mut RbdsdeSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// `solution` must be live; the out pointers may be NULL.
#[no_mangle]
pub unsafe extern "C" fn rbdsde_solution_shape(
    solution: *const RbdsdeSolution,
    steps: *mut usize,
    paths: *mut usize,
    dim_w: *mut usize,
) -> RbdsdeStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if !steps.is_null() {
            *steps = s.0.steps();
        }
        if !paths.is_null() {
            *paths = s.0.paths();
        }
        if !dim_w.is_null() {
            *dim_w = s.0.dim_w();
        }
        Ok(())
    })
}

unsafe fn at(
    solution: *const RbdsdeSolution,
    step: usize,
    path: usize,
    out: *mut f64,
    read: impl FnOnce(&SolutionField) -> f64,
) -> RbdsdeStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if step > s.0.steps() || path >= s.0.paths() {
            return Err((
                RbdsdeStatus::OutOfRange,
                format!("(step {step}, path {path}) outside {} x {}", s.0.steps() + 1, s.0.paths()),
            ));
        }
        *out = read(&s.0);
        Ok(())
    })
}

/// # Safety
/// `solution` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rbdsde_solution_y(
    solution: *const RbdsdeSolution,
    step: usize,
    path: usize,
    out: *mut f64,
) -> RbdsdeStatus {
    at(solution, step, path, out, |f| f.y(step, path))
}

/// Cumulative push `K` at `(step, path)`.
///
/// # Safety
/// `solution` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rbdsde_solution_k(
    solution: *const RbdsdeSolution,
    step: usize,
    path: usize,
    out: *mut f64,
) -> RbdsdeStatus {
    at(solution, step, path, out, |f| f.k(step, path))
}

/// Path average of `Y` at `step`.
///
/// # Safety
/// `solution` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rbdsde_solution_mean_y(
    solution: *const RbdsdeSolution,
    step: usize,
    out: *mut f64,
) -> RbdsdeStatus {
    at(solution, step, 0, out, |f| f.mean_y(step))
}

/// Copy `Z` at `(step, path)` into `buf`, which must hold `dim_w` values.
///
/// # Safety
/// `solution` must be live and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rbdsde_solution_z(
    solution: *const RbdsdeSolution,
    step: usize,
    path: usize,
    buf: *mut f64,
    len: usize,
) -> RbdsdeStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if step > s.0.steps() || path >= s.0.paths() {
            return Err((RbdsdeStatus::OutOfRange, format!("(step {step}, path {path}) out of range")));
        }
        let z = s.0.z(step, path);
        if len < z.len() {
            return Err((RbdsdeStatus::InvalidArgument, format!("buffer holds {len}, need {}", z.len())));
        }
        std::slice::from_raw_parts_mut(buf, z.len()).copy_from_slice(z);
        Ok(())
    })
}
