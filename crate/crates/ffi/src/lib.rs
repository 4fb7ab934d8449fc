//! C ABI over the `deepthermal` core.
//!
//! Objects cross the boundary as opaque handles created by `dt_*_new` or
//! `dt_*_init` style constructors and released with the matching
//! `dt_*_free`. Fallible calls return a [`DtStatus`]; on failure the message
//! is available from [`dt_last_error_message`] on the same thread until the
//! next failing call. Output pointers are only written on success.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use deepthermal::circuit::{
    apply_bath_gate_haar, apply_system_gate, evolve_and_snapshot, init_state, purity_and_renyi2,
    reduced_density_matrix_a, CircuitConfig, PureState,
};
use deepthermal::ensemble::{delta_k, frame_potential, haar_frame_potential, moment_operator, project};
use deepthermal::ensemble::{MomentOperator, ProjectedEnsemble};
use deepthermal::randmat::{haar_unitary, RngStream, C64};
use deepthermal::theory::{self, TheoryParams};
use deepthermal::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DtStatus {
    Ok = 0,
    InvalidArgument = 1,
    InvalidDimension = 2,
    Resource = 3,
    Numerical = 4,
    NoThermalization = 5,
    NullPointer = 6,
    Panic = 7,
    Internal = 8,
}

/// Circuit parameters; mirrors the core configuration.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DtCircuitConfig {
    pub d_a: usize,
    pub d_b1: usize,
    pub q: usize,
    pub t_max: usize,
    pub k_max: usize,
    pub n_realizations: usize,
    pub master_seed: u64,
}

impl From<DtCircuitConfig> for CircuitConfig {
    fn from(c: DtCircuitConfig) -> Self {
        CircuitConfig {
            d_a: c.d_a,
            d_b1: c.d_b1,
            q: c.q,
            t_max: c.t_max,
            k_max: c.k_max,
            n_realizations: c.n_realizations,
            master_seed: c.master_seed,
        }
    }
}

pub struct DtRng(RngStream);
pub struct DtState(PureState);
pub struct DtEnsemble(ProjectedEnsemble);
pub struct DtMoment(MomentOperator);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Core(Error),
    Null(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> DtStatus {
    match e {
        Error::InvalidArgument(_) => DtStatus::InvalidArgument,
        Error::InvalidDimension(_) => DtStatus::InvalidDimension,
        Error::Resource(_) => DtStatus::Resource,
        Error::NumericalDegeneracy(_)
        | Error::NumericalInconsistency(_)
        | Error::DegenerateState
        | Error::IllConditionedRatio { .. } => DtStatus::Numerical,
        Error::NoThermalization => DtStatus::NoThermalization,
        _ => DtStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DtStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            let s = status_of(&e);
            set_last_error(e.to_string());
            s
        }
        Ok(Err(Fail::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            DtStatus::NullPointer
        }
        Err(_) => {
            set_last_error("panic inside deepthermal".into());
            DtStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or(Fail::Null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    unsafe { p.as_mut() }.ok_or(Fail::Null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("output handle"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    unsafe { *out = value };
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Random stream `stream_id` of `seed`. Never NULL.
#[no_mangle]
pub extern "C" fn dt_rng_new(seed: u64, stream_id: u64) -> *mut DtRng {
    Box::into_raw(Box::new(DtRng(RngStream::new(seed, stream_id))))
}

/// # Safety
/// `rng` must be NULL or a handle from [`dt_rng_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dt_rng_free(rng: *mut DtRng) {
    unsafe { free(rng) }
}

/// The initial product state `|0>` for `cfg`.
///
/// # Safety
/// `cfg` must point to a valid config and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn dt_state_init(cfg: *const DtCircuitConfig, out: *mut *mut DtState) -> DtStatus {
    guard(|| {
        let cfg: CircuitConfig = (*unsafe { borrow(cfg, "cfg") }?).into();
        cfg.validate()?;
        unsafe { put(out, DtState(init_state(&cfg)?)) }
    })
}

/// The state right after the bath gate of depth `depth`, evolved from
/// `|0>` with draws from `rng`.
///
/// # Safety
/// Pointers must be valid; `rng` is advanced.
#[no_mangle]
pub unsafe extern "C" fn dt_evolve(
    cfg: *const DtCircuitConfig,
    rng: *mut DtRng,
    depth: usize,
    out: *mut *mut DtState,
) -> DtStatus {
    guard(|| {
        let mut cfg: CircuitConfig = (*unsafe { borrow(cfg, "cfg") }?).into();
        let rng = unsafe { borrow_mut(rng, "rng") }?;
        cfg.t_max = depth;
        let mut last = None;
        evolve_and_snapshot(&cfg, &mut rng.0, |t, s| {
            if t == depth {
                last = Some(s.clone());
            }
            Ok(())
        })?;
        let state = last.ok_or_else(|| Error::MissingData(format!("no snapshot at depth {depth}")))?;
        unsafe { put(out, DtState(state)) }
    })
}

/// # Safety
/// `state` must be NULL or a live state handle.
#[no_mangle]
pub unsafe extern "C" fn dt_state_free(state: *mut DtState) {
    unsafe { free(state) }
}

/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dt_state_dims(
    state: *const DtState,
    d_a: *mut usize,
    d_b1: *mut usize,
    q: *mut usize,
) -> DtStatus {
    guard(|| {
        let s = &unsafe { borrow(state, "state") }?.0;
        unsafe {
            write(d_a, s.d_a(), "d_a")?;
            write(d_b1, s.d_b1(), "d_b1")?;
            write(q, s.q(), "q")
        }
    })
}

/// Applies one Haar-random system gate on `A B1`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dt_state_apply_system_gate(state: *mut DtState, rng: *mut DtRng) -> DtStatus {
    guard(|| {
        let s = &mut unsafe { borrow_mut(state, "state") }?.0;
        let rng = unsafe { borrow_mut(rng, "rng") }?;
        let u = haar_unitary(s.d_a() * s.d_b1(), &mut rng.0)?;
        apply_system_gate(s, &u)?;
        Ok(())
    })
}

/// Applies one Haar-random bath gate on `B1 B2`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dt_state_apply_bath_gate(state: *mut DtState, rng: *mut DtRng) -> DtStatus {
    guard(|| {
        let s = &mut unsafe { borrow_mut(state, "state") }?.0;
        let rng = unsafe { borrow_mut(rng, "rng") }?;
        apply_bath_gate_haar(s, &mut rng.0)?;
        Ok(())
    })
}

/// Purity and second Renyi entropy (bits) of the reduced state on `A`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dt_state_purity(state: *const DtState, purity: *mut f64, s2: *mut f64) -> DtStatus {
    guard(|| {
        let s = &unsafe { borrow(state, "state") }?.0;
        let (p, e) = purity_and_renyi2(&reduced_density_matrix_a(s))?;
        unsafe {
            write(purity, p, "purity")?;
            write(s2, e, "s2")
        }
    })
}

/// Projected ensemble on `A` from measuring the bath in its computational basis.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dt_ensemble_project(state: *const DtState, out: *mut *mut DtEnsemble) -> DtStatus {
    guard(|| {
        let s = &unsafe { borrow(state, "state") }?.0;
        unsafe { put(out, DtEnsemble(project(s)?)) }
    })
}

/// Ensemble from `n` weights and `n` unnormalized-or-normalized states of
/// dimension `d_a`, given as interleaved `(re, im)` pairs (`2 n d_a` doubles).
///
/// # Safety
/// `weights` must hold `n` doubles and `amps` `2 n d_a` doubles.
#[no_mangle]
pub unsafe extern "C" fn dt_ensemble_from_weighted(
    d_a: usize,
    n: usize,
    weights: *const f64,
    amps: *const f64,
    out: *mut *mut DtEnsemble,
) -> DtStatus {
    guard(|| {
        if weights.is_null() {
            return Err(Fail::Null("weights"));
        }
        if amps.is_null() {
            return Err(Fail::Null("amps"));
        }
        let len = n
            .checked_mul(d_a)
            .and_then(|x| x.checked_mul(2))
            .ok_or_else(|| Error::Resource("ensemble size overflows".into()))?;
        let w = unsafe { std::slice::from_raw_parts(weights, n) };
        let raw = unsafe { std::slice::from_raw_parts(amps, len) };
        let states: Vec<C64> = raw.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
        unsafe { put(out, DtEnsemble(ProjectedEnsemble::from_weighted(d_a, w, &states)?)) }
    })
}

/// Number of retained outcomes; 0 for NULL.
///
/// # Safety
/// `ens` must be NULL or a live ensemble handle.
#[no_mangle]
pub unsafe extern "C" fn dt_ensemble_len(ens: *const DtEnsemble) -> usize {
    unsafe { ens.as_ref() }.map_or(0, |e| e.0.len())
}

/// Probability mass dropped below the outcome threshold; NaN for NULL.
///
/// # Safety
/// `ens` must be NULL or a live ensemble handle.
#[no_mangle]
pub unsafe extern "C" fn dt_ensemble_discarded_mass(ens: *const DtEnsemble) -> f64 {
    unsafe { ens.as_ref() }.map_or(f64::NAN, |e| e.0.discarded_mass())
}

/// # Safety
/// `ens` must be NULL or a live ensemble handle.
#[no_mangle]
pub unsafe extern "C" fn dt_ensemble_free(ens: *mut DtEnsemble) {
    unsafe { free(ens) }
}

/// `k`-th moment operator of the ensemble.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dt_moment_new(ens: *const DtEnsemble, k: usize, out: *mut *mut DtMoment) -> DtStatus {
    guard(|| {
        let e = &unsafe { borrow(ens, "ensemble") }?.0;
        unsafe { put(out, DtMoment(moment_operator(e, k)?)) }
    })
}

/// Dimension of the symmetric subspace; 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live moment handle.
#[no_mangle]
pub unsafe extern "C" fn dt_moment_dim(m: *const DtMoment) -> usize {
    unsafe { m.as_ref() }.map_or(0, |m| m.0.dim())
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dt_moment_frame_potential(m: *const DtMoment, out: *mut f64) -> DtStatus {
    guard(|| {
        let m = &unsafe { borrow(m, "moment") }?.0;
        unsafe { write(out, frame_potential(m), "out") }
    })
}

/// Design distance to the Haar moment of the same order.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dt_moment_delta(m: *const DtMoment, out: *mut f64) -> DtStatus {
    guard(|| {
        let m = &unsafe { borrow(m, "moment") }?.0;
        unsafe { write(out, delta_k(m)?, "out") }
    })
}

/// # Safety
/// `m` must be NULL or a live moment handle.
#[no_mangle]
pub unsafe extern "C" fn dt_moment_free(m: *mut DtMoment) {
    unsafe { free(m) }
}

#[no_mangle]
pub extern "C" fn dt_haar_frame_potential(k: usize, d_a: usize) -> f64 {
    haar_frame_potential(k, d_a)
}

/// `f(k, d_a) = sqrt((1 + d_a) / (1 + d_a / k))`.
#[no_mangle]
pub extern "C" fn dt_theory_f_ratio(k: usize, d_a: usize) -> f64 {
    theory::f_ratio(k, d_a)
}

/// Infinite-bath purity of `A` after `t` steps.
#[no_mangle]
pub extern "C" fn dt_theory_purity(t: usize, d_a: usize, d_b1: usize) -> f64 {
    theory::purity_theory(t, d_a, d_b1)
}

/// r.m.s. design distance of a Haar-random state with bath dimension `d_b`.
#[no_mangle]
pub extern "C" fn dt_theory_haar_floor(k: usize, d_a: usize, d_b: usize) -> f64 {
    theory::haar_baseline_delta(k, d_a, d_b)
}

/// Design time `t_k` in circuit steps.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dt_theory_design_time(
    k: usize,
    d_a: usize,
    d_b1: usize,
    q: usize,
    eps: f64,
    out: *mut f64,
) -> DtStatus {
    guard(|| {
        let p = TheoryParams::new(d_a, d_b1, q, eps)?;
        unsafe { write(out, theory::design_time(k, &p)?, "out") }
    })
}
