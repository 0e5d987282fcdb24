//! C ABI over `vnlw`.
//!
//! Objects are opaque handles created by `*_new`/`*_from_*` functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`VnlwStatus`]; on failure [`vnlw_last_error_message`] describes the cause.
//! Kernels cross the boundary as separate real and imaginary arrays of
//! length `n_points²` in row-major order (`K[i * n_points + j] = Ψ(x_i, y_j)`).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use vnlw::bipartite::{collapse_statistics, entanglement_entropy, position_density, transition_amplitudes};
use vnlw::config::Config;
use vnlw::dynamics::{propagate_vnl, Method, PropagatorConfig};
use vnlw::scenarios::run_scenario;
use vnlw::{
    build_grid, build_hamiltonian, eigensystem, from_product, sample_potential, BipartiteWave, CMat, EigenSystem,
    HamiltonianMatrix, PotentialSpec, VnlwError, C64,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VnlwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Numerical = 4,
    Schema = 5,
    Panic = 6,
}

/// Propagation method for [`vnlw_bipartite_propagate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VnlwMethod {
    CrankNicolson = 0,
    Eigenbasis = 1,
}

pub struct VnlwHamiltonian {
    inner: HamiltonianMatrix,
}

pub struct VnlwEigenSystem {
    inner: EigenSystem,
}

pub struct VnlwBipartite {
    inner: BipartiteWave,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(VnlwStatus, String);

impl From<VnlwError> for Failure {
    fn from(e: VnlwError) -> Self {
        let status = match e {
            VnlwError::LengthMismatch { .. } | VnlwError::DimensionMismatch(_) | VnlwError::GridMismatch => {
                VnlwStatus::InvalidArgument
            }
            _ => VnlwStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> VnlwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            VnlwStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            VnlwStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(VnlwStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: caller passes either null or a live handle from this library
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: as above, plus exclusive access for the duration of the call
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err(Failure(
            VnlwStatus::BufferTooSmall,
            format!("{what} holds {len} values, {need} needed"),
        ));
    }
    // SAFETY: caller guarantees `p` points to at least `len` writable doubles
    Ok(unsafe { std::slice::from_raw_parts_mut(p, need) })
}

unsafe fn in_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees `p` points to at least `len` readable doubles
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller passes a NUL-terminated string
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure(VnlwStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    // SAFETY: `out` is non-null and points to writable storage for a pointer
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Message for the most recent failure on this thread ("" after a success).
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn vnlw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vnlw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds the Hamiltonian on `n_points` nodes spanning `[x_min, x_max]`.
/// `potential_json` is a potential object such as
/// `{"kind":"harmonic","omega":1}`; NULL selects the infinite box.
///
/// # Safety
/// `potential_json` must be NULL or a NUL-terminated string; `out` must be a
/// valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn vnlw_hamiltonian_new(
    x_min: f64,
    x_max: f64,
    n_points: usize,
    potential_json: *const c_char,
    hbar: f64,
    mass: f64,
    out: *mut *mut VnlwHamiltonian,
) -> VnlwStatus {
    guard(|| {
        let spec = if potential_json.is_null() {
            PotentialSpec::InfiniteBox
        } else {
            let text = unsafe { c_str(potential_json, "potential_json")? };
            serde_json::from_str(text).map_err(|e| Failure(VnlwStatus::Schema, format!("potential: {e}")))?
        };
        let grid = build_grid(x_min, x_max, n_points)?;
        let u = sample_potential(&grid, &spec)?;
        let inner = build_hamiltonian(&grid, &u, hbar, mass)?;
        put(out, VnlwHamiltonian { inner })
    })
}

/// # Safety
/// `h` must be NULL or a handle from [`vnlw_hamiltonian_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vnlw_hamiltonian_free(h: *mut VnlwHamiltonian) {
    if !h.is_null() {
        // SAFETY: ownership returns from the caller
        drop(unsafe { Box::from_raw(h) });
    }
}

/// Number of grid points (0 for a NULL handle).
///
/// # Safety
/// `h` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vnlw_hamiltonian_n_points(h: *const VnlwHamiltonian) -> usize {
    unsafe { h.as_ref() }.map_or(0, |h| h.inner.grid().n_points())
}

/// Lowest `k` eigenpairs of `h`.
///
/// # Safety
/// `h` must be a live handle; `out` must be valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn vnlw_eigensystem_new(
    h: *const VnlwHamiltonian,
    k: usize,
    out: *mut *mut VnlwEigenSystem,
) -> VnlwStatus {
    guard(|| {
        let h = unsafe { deref(h, "h")? };
        put(
            out,
            VnlwEigenSystem {
                inner: eigensystem(&h.inner, k)?,
            },
        )
    })
}

/// # Safety
/// `e` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vnlw_eigensystem_free(e: *mut VnlwEigenSystem) {
    if !e.is_null() {
        // SAFETY: ownership returns from the caller
        drop(unsafe { Box::from_raw(e) });
    }
}

/// Number of eigenpairs (0 for a NULL handle).
///
/// # Safety
/// `e` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vnlw_eigensystem_k(e: *const VnlwEigenSystem) -> usize {
    unsafe { e.as_ref() }.map_or(0, |e| e.inner.k())
}

/// Copies the `k` energies (ascending) into `out`.
///
/// # Safety
/// `e` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vnlw_eigensystem_energies(e: *const VnlwEigenSystem, out: *mut f64, len: usize) -> VnlwStatus {
    guard(|| {
        let e = unsafe { deref(e, "e")? };
        let dst = unsafe { out_slice(out, len, e.inner.k(), "out")? };
        dst.copy_from_slice(e.inner.energies());
        Ok(())
    })
}

/// Copies eigenstate `n` (real, `n_points` values, zero at the walls).
///
/// # Safety
/// `e` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vnlw_eigensystem_state(
    e: *const VnlwEigenSystem,
    n: usize,
    out: *mut f64,
    len: usize,
) -> VnlwStatus {
    guard(|| {
        let e = unsafe { deref(e, "e")? };
        if n >= e.inner.k() {
            return Err(Failure(
                VnlwStatus::InvalidArgument,
                format!("state {n} requested from {} eigenpairs", e.inner.k()),
            ));
        }
        let src = e.inner.state_values(n);
        let dst = unsafe { out_slice(out, len, src.len(), "out")? };
        dst.copy_from_slice(src);
        Ok(())
    })
}

/// Kernel `ψ_n(x) ψ_m*(y)`.
///
/// # Safety
/// `e` must be a live handle; `out` must be valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn vnlw_bipartite_from_eigenpair(
    e: *const VnlwEigenSystem,
    n: usize,
    m: usize,
    out: *mut *mut VnlwBipartite,
) -> VnlwStatus {
    guard(|| {
        let e = unsafe { deref(e, "e")? };
        let k = e.inner.k();
        if n >= k || m >= k {
            return Err(Failure(
                VnlwStatus::InvalidArgument,
                format!("pair ({n}, {m}) requested from {k} eigenpairs"),
            ));
        }
        let inner = from_product(&e.inner.state(n), &e.inner.state(m))?;
        put(out, VnlwBipartite { inner })
    })
}

/// Kernel from row-major real and imaginary parts of length `len =
/// n_points²` on the grid of `h`. Wall rows and columns are zeroed; the
/// kernel is not renormalized.
///
/// # Safety
/// `h` must be a live handle; `re` and `im` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vnlw_bipartite_from_kernel(
    h: *const VnlwHamiltonian,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut VnlwBipartite,
) -> VnlwStatus {
    guard(|| {
        let h = unsafe { deref(h, "h")? };
        let n = h.inner.grid().n_points();
        if len != n * n {
            return Err(Failure(
                VnlwStatus::InvalidArgument,
                format!("kernel length {len}, expected {}", n * n),
            ));
        }
        let re = unsafe { in_slice(re, len, "re")? };
        let im = unsafe { in_slice(im, len, "im")? };
        let kernel = CMat::from_fn(n, n, |i, j| C64::new(re[i * n + j], im[i * n + j]));
        let inner = BipartiteWave::new(h.inner.grid(), kernel)?;
        put(out, VnlwBipartite { inner })
    })
}

/// # Safety
/// `psi` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vnlw_bipartite_free(psi: *mut VnlwBipartite) {
    if !psi.is_null() {
        // SAFETY: ownership returns from the caller
        drop(unsafe { Box::from_raw(psi) });
    }
}

/// Copies the kernel out in the row-major layout of
/// [`vnlw_bipartite_from_kernel`].
///
/// # Safety
/// `psi` must be a live handle; `re` and `im` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vnlw_bipartite_kernel(
    psi: *const VnlwBipartite,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> VnlwStatus {
    guard(|| {
        let psi = unsafe { deref(psi, "psi")? };
        let k = psi.inner.kernel();
        let n = k.nrows();
        let re = unsafe { out_slice(re, len, n * n, "re")? };
        let im = unsafe { out_slice(im, len, n * n, "im")? };
        for i in 0..n {
            for j in 0..n {
                re[i * n + j] = k[(i, j)].re;
                im[i * n + j] = k[(i, j)].im;
            }
        }
        Ok(())
    })
}

/// `‖Ψ‖²`
///
/// # Safety
/// `psi` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vnlw_bipartite_norm(psi: *const VnlwBipartite, out: *mut f64) -> VnlwStatus {
    guard(|| {
        let psi = unsafe { deref(psi, "psi")? };
        let out = unsafe { deref_mut(out, "out")? };
        *out = psi.inner.norm_sq();
        Ok(())
    })
}

/// Evolves `psi` in place by `steps` steps of `dt` under `h`.
///
/// # Safety
/// `psi` and `h` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn vnlw_bipartite_propagate(
    psi: *mut VnlwBipartite,
    h: *const VnlwHamiltonian,
    dt: f64,
    steps: usize,
    method: VnlwMethod,
) -> VnlwStatus {
    guard(|| {
        let psi = unsafe { deref_mut(psi, "psi")? };
        let h = unsafe { deref(h, "h")? };
        let method = match method {
            VnlwMethod::CrankNicolson => Method::CrankNicolson,
            VnlwMethod::Eigenbasis => Method::Eigenbasis,
        };
        let cfg = PropagatorConfig::new(dt, steps, method)?;
        psi.inner = propagate_vnl(&psi.inner, &h.inner, &cfg)?;
        Ok(())
    })
}

/// Entanglement entropy of a normalized kernel.
///
/// # Safety
/// `psi` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vnlw_bipartite_entropy(psi: *const VnlwBipartite, out: *mut f64) -> VnlwStatus {
    guard(|| {
        let psi = unsafe { deref(psi, "psi")? };
        let out = unsafe { deref_mut(out, "out")? };
        *out = entanglement_entropy(&psi.inner)?;
        Ok(())
    })
}

/// Position density `Σ_j |Ψ_ij|² dx` (`n_points` values).
///
/// # Safety
/// `psi` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vnlw_bipartite_position_density(
    psi: *const VnlwBipartite,
    out: *mut f64,
    len: usize,
) -> VnlwStatus {
    guard(|| {
        let psi = unsafe { deref(psi, "psi")? };
        let d = position_density(&psi.inner);
        let dst = unsafe { out_slice(out, len, d.len(), "out")? };
        dst.copy_from_slice(&d);
        Ok(())
    })
}

/// Outcome probabilities `p_m` and energy changes `ΔE_m` over the levels of
/// `e` (`k` values each) plus the weight outside the basis.
///
/// # Safety
/// `psi` and `e` must be live handles; `p` and `delta_e` must hold `len`
/// doubles; `residual` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vnlw_collapse_statistics(
    psi: *const VnlwBipartite,
    e: *const VnlwEigenSystem,
    p: *mut f64,
    delta_e: *mut f64,
    len: usize,
    residual: *mut f64,
) -> VnlwStatus {
    guard(|| {
        let psi = unsafe { deref(psi, "psi")? };
        let e = unsafe { deref(e, "e")? };
        let k = e.inner.k();
        let p = unsafe { out_slice(p, len, k, "p")? };
        let delta_e = unsafe { out_slice(delta_e, len, k, "delta_e")? };
        let residual = unsafe { deref_mut(residual, "residual")? };
        let stats = collapse_statistics(&transition_amplitudes(&psi.inner, &e.inner)?);
        p.copy_from_slice(&stats.p);
        delta_e.copy_from_slice(&stats.delta_e);
        *residual = stats.truncation_residual;
        Ok(())
    })
}

/// Runs the scenario(s) of a JSON config document and returns the reports
/// as a JSON array in `*out` (release with [`vnlw_string_free`]). Relative
/// paths in the config resolve against the working directory.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vnlw_run_scenario_json(config_json: *const c_char, out: *mut *mut c_char) -> VnlwStatus {
    guard(|| {
        let text = unsafe { c_str(config_json, "config_json")? };
        if out.is_null() {
            return Err(null("out"));
        }
        let schema = |e: vnlw::config::ConfigError| Failure(VnlwStatus::Schema, e.to_string());
        let cfg = Config::from_json_str(text, &[]).map_err(schema)?;
        let reports = cfg
            .scenario_configs(Path::new("."))
            .map_err(schema)?
            .iter()
            .map(run_scenario)
            .collect::<Result<Vec<_>, _>>()?;
        let json = vnlw::output::to_json_string(&reports);
        let c = CString::new(json).map_err(|_| Failure(VnlwStatus::Numerical, "report contains NUL".into()))?;
        // SAFETY: `out` checked non-null above
        unsafe { *out = c.into_raw() };
        Ok(())
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a string from [`vnlw_run_scenario_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vnlw_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: ownership returns from the caller
        drop(unsafe { CString::from_raw(s) });
    }
}
