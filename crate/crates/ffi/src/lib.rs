//! C ABI over the `bsqmc` library.
//!
//! States live behind opaque `BsqmcState` handles. Every fallible call
//! returns a `BsqmcStatus`; on failure the message is available from
//! `bsqmc_last_error` until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bsqmc::divergences::{bs_cmi, cmi, BsCmiVariant, Tripartition};
use bsqmc::io::{parse_state, state_to_json};
use bsqmc::markov::{certify_with_tol, eta_from_rho, paper_example};
use bsqmc::quantum::{State, SystemSpec};
use bsqmc::recovery::{align, recover_with, RecoveryMap};
use bsqmc::spinchain::{decay_experiment, default_b_sizes, InteractionSpec};
use bsqmc::{linalg, Error};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BsqmcStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed JSON or a non-UTF-8 string.
    Parse = 2,
    /// Input violates an invariant (not a state, bad partition, ...).
    Invariant = 3,
    /// Dimension cap exceeded, or an output buffer is too small.
    TooLarge = 4,
    /// An operator that must be invertible is singular.
    Singular = 5,
    /// Any other computational failure.
    Failed = 6,
    /// A panic was caught at the boundary.
    Internal = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BsqmcBsCmi {
    Os = 0,
    Ts = 1,
    Rev = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BsqmcRecoveryMap {
    Petz = 0,
    Bs = 1,
    BsSym = 2,
    Phi = 3,
}

/// Opaque density matrix with labelled subsystems.
pub struct BsqmcState {
    inner: State,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct BsqmcCertificate {
    pub res_petz: f64,
    pub res_b: f64,
    pub res_bsym: f64,
    pub res_phi: f64,
    pub cmi: f64,
    /// `INFINITY` when a BS entropy term diverges.
    pub bs_cmi_rev: f64,
    pub eta_commutator: f64,
    pub tol: f64,
    pub is_qmc: bool,
    pub is_bsqmc: bool,
    pub marginal: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct BsqmcDecayRow {
    pub size_a: usize,
    pub size_b: usize,
    pub size_c: usize,
    pub i_eta: f64,
    pub i_rev: f64,
    pub bound_chain: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> BsqmcStatus {
    match e {
        Error::SingularInput(_) | Error::SingularMarginal(_) | Error::SingularSigma(_) => BsqmcStatus::Singular,
        _ => match e.exit_code() {
            2 => BsqmcStatus::Parse,
            3 => BsqmcStatus::Invariant,
            4 => BsqmcStatus::TooLarge,
            _ => BsqmcStatus::Failed,
        },
    }
}

/// Runs `f`, recording errors and catching panics.
fn guard(f: impl FnOnce() -> Result<(), (BsqmcStatus, String)>) -> BsqmcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BsqmcStatus::Ok,
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("panic inside bsqmc".into());
            BsqmcStatus::Internal
        }
    }
}

fn lib(e: Error) -> (BsqmcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (BsqmcStatus, String) {
    (BsqmcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (BsqmcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (BsqmcStatus::Parse, format!("{what} is not UTF-8")))
}

unsafe fn state_arg<'a>(p: *const BsqmcState) -> Result<&'a State, (BsqmcStatus, String)> {
    p.as_ref().map(|s| &s.inner).ok_or_else(|| null("state"))
}

unsafe fn partition_arg(p: *const c_char) -> Result<Tripartition, (BsqmcStatus, String)> {
    str_arg(p, "partition")?.parse().map_err(lib)
}

fn boxed(s: State) -> *mut BsqmcState {
    Box::into_raw(Box::new(BsqmcState { inner: s }))
}

/// Message of the last failing call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bsqmc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a JSON state file body.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn bsqmc_state_from_json(json: *const c_char, out: *mut *mut BsqmcState) -> BsqmcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = parse_state(str_arg(json, "json")?).map_err(lib)?;
        *out = boxed(s);
        Ok(())
    })
}

/// Builds a state from row-major real and imaginary parts of a `d x d`
/// matrix, `d` the product of `dims`. `im` may be null for a real matrix.
///
/// # Safety
/// `labels` and `dims` must hold `n_sys` entries, `re` (and `im` if not
/// null) `d * d` entries, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bsqmc_state_from_matrix(
    n_sys: usize,
    labels: *const *const c_char,
    dims: *const usize,
    re: *const f64,
    im: *const f64,
    out: *mut *mut BsqmcState,
) -> BsqmcStatus {
    guard(|| {
        if labels.is_null() || dims.is_null() || re.is_null() || out.is_null() {
            return Err(null("labels, dims, re or out"));
        }
        let mut pairs = Vec::with_capacity(n_sys);
        for k in 0..n_sys {
            pairs.push((str_arg(*labels.add(k), "label")?.to_string(), *dims.add(k)));
        }
        let spec = SystemSpec::from_pairs(pairs).map_err(lib)?;
        let d = spec.total_dim();
        let m = linalg::ComplexMatrix::from_fn(d, d, |i, j| {
            let k = i * d + j;
            let y = if im.is_null() { 0.0 } else { *im.add(k) };
            linalg::C64::new(*re.add(k), y)
        });
        *out = boxed(State::new(spec, m).map_err(lib)?);
        Ok(())
    })
}

/// The bundled 2x2x2 BS-QMC that is not a QMC, labels `A`, `B`, `C`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bsqmc_example31(out: *mut *mut BsqmcState) -> BsqmcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = boxed(paper_example());
        Ok(())
    })
}

/// # Safety
/// `state` must come from this library and not have been freed; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn bsqmc_state_free(state: *mut BsqmcState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Total Hilbert-space dimension, 0 for null.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bsqmc_state_dim(state: *const BsqmcState) -> usize {
    state.as_ref().map_or(0, |s| s.inner.dim())
}

/// Serializes a state; release the string with `bsqmc_string_free`.
///
/// # Safety
/// `state` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bsqmc_state_to_json(state: *const BsqmcState, out: *mut *mut c_char) -> BsqmcStatus {
    guard(|| {
        let s = state_arg(state)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = CString::new(state_to_json(s)).expect("json has no nul").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn bsqmc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Conditional mutual information for a partition such as `"A,B,C"`.
///
/// # Safety
/// Pointers must be valid; `partition` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn bsqmc_cmi(state: *const BsqmcState, partition: *const c_char, out: *mut f64) -> BsqmcStatus {
    guard(|| {
        let s = state_arg(state)?;
        let part = partition_arg(partition)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = cmi(s, &part).map_err(lib)?;
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid; `partition` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn bsqmc_bs_cmi(
    state: *const BsqmcState,
    partition: *const c_char,
    variant: BsqmcBsCmi,
    out: *mut f64,
) -> BsqmcStatus {
    guard(|| {
        let s = state_arg(state)?;
        let part = partition_arg(partition)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = match variant {
            BsqmcBsCmi::Os => BsCmiVariant::Os,
            BsqmcBsCmi::Ts => BsCmiVariant::Ts,
            BsqmcBsCmi::Rev => BsCmiVariant::Rev,
        };
        *out = bs_cmi(s, &part, v).map_err(lib)?;
        Ok(())
    })
}

/// Recovery residuals and verdicts at tolerance `tol`.
///
/// # Safety
/// Pointers must be valid; `partition` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn bsqmc_certify(
    state: *const BsqmcState,
    partition: *const c_char,
    tol: f64,
    out: *mut BsqmcCertificate,
) -> BsqmcStatus {
    guard(|| {
        let s = state_arg(state)?;
        let part = partition_arg(partition)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = certify_with_tol(s, &part, tol).map_err(lib)?;
        *out = BsqmcCertificate {
            res_petz: r.res_petz,
            res_b: r.res_b,
            res_bsym: r.res_bsym,
            res_phi: r.res_phi,
            cmi: r.cmi,
            bs_cmi_rev: r.bs_cmi_rev.unwrap_or(f64::INFINITY),
            eta_commutator: r.eta_commutator,
            tol: r.tol,
            is_qmc: r.verdict_qmc,
            is_bsqmc: r.verdict_bsqmc,
            marginal: r.marginal,
        };
        Ok(())
    })
}

/// The associated `eta` as a new handle.
///
/// # Safety
/// Pointers must be valid; `partition` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn bsqmc_eta(
    state: *const BsqmcState,
    partition: *const c_char,
    out: *mut *mut BsqmcState,
) -> BsqmcStatus {
    guard(|| {
        let s = state_arg(state)?;
        let part = partition_arg(partition)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = boxed(eta_from_rho(s, &part).map_err(lib)?);
        Ok(())
    })
}

/// `||R_{B->AB}(rho_BC) - rho||_1` for the chosen map.
///
/// # Safety
/// Pointers must be valid; `partition` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn bsqmc_recovery_residual(
    state: *const BsqmcState,
    partition: *const c_char,
    map: BsqmcRecoveryMap,
    out: *mut f64,
) -> BsqmcStatus {
    guard(|| {
        let s = state_arg(state)?;
        let part = partition_arg(partition)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = match map {
            BsqmcRecoveryMap::Petz => RecoveryMap::Petz,
            BsqmcRecoveryMap::Bs => RecoveryMap::Bs,
            BsqmcRecoveryMap::BsSym => RecoveryMap::BsSym,
            BsqmcRecoveryMap::Phi => RecoveryMap::Phi,
        };
        let x = s.partial_trace(&part.bc()).map_err(lib)?;
        let rec = recover_with(s, &part.b, &part.ab(), m, x.operator()).map_err(lib)?;
        let aligned = align(rec, s.spec()).map_err(lib)?;
        *out = linalg::trace_norm(&(aligned - s.matrix()));
        Ok(())
    })
}

/// Decay rows of the TFIM Gibbs state on `sites` sites for every
/// admissible `|B|`. Writes at most `cap` rows and the row count to
/// `written`; fails with `TooLarge` when `cap` is too small.
///
/// # Safety
/// `rows` must hold `cap` entries and `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bsqmc_tfim_decay(
    sites: usize,
    beta: f64,
    coupling: f64,
    field: f64,
    rows: *mut BsqmcDecayRow,
    cap: usize,
    written: *mut usize,
) -> BsqmcStatus {
    guard(|| {
        if rows.is_null() || written.is_null() {
            return Err(null("rows or written"));
        }
        let spec = InteractionSpec::tfim(coupling, field);
        let curve = decay_experiment(&spec, sites, beta, &default_b_sizes(sites)).map_err(lib)?;
        *written = curve.rows.len();
        if curve.rows.len() > cap {
            return Err((BsqmcStatus::TooLarge, format!("{} rows do not fit in {cap}", curve.rows.len())));
        }
        for (k, r) in curve.rows.iter().enumerate() {
            *rows.add(k) = BsqmcDecayRow {
                size_a: r.size_a,
                size_b: r.size_b,
                size_c: r.size_c,
                i_eta: r.i_eta,
                i_rev: r.i_rev,
                bound_chain: r.bound_chain,
            };
        }
        Ok(())
    })
}
