//! C ABI for `geninv`.
//!
//! Every function returns a [`GeninvStatus`]; on failure the message is available
//! from [`geninv_last_error_message`] on the same thread. Objects cross the boundary
//! as opaque handles that must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use geninv::experiments::{run_replication, run_sweep, run_sweep_with_threads, ResultRow, SweepConfig, SweepResult};
use geninv::frobenius::asymptotic_summary;
use geninv::matrixlab::{Noise, Scenario};
use geninv::stieltjes::{solve, SolverOptions, Transform};
use geninv::{Error, ErrorKind, SpectrumSpec};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeninvStatus {
    Ok = 0,
    Validation = 1,
    Numerical = 2,
    Io = 3,
    NullPointer = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeninvTransform {
    Plus = 0,
    Minus = 1,
    Mp = 2,
    Underline = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeninvNoise {
    Gaussian = 0,
    Rademacher = 1,
    UniformScaled = 2,
}

/// Opaque population spectrum.
pub struct GeninvSpectrum(SpectrumSpec);

/// Opaque result of a Monte-Carlo sweep.
pub struct GeninvSweep(SweepResult);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GeninvAsymptotic {
    pub c: f64,
    pub fro_plus: f64,
    pub fro_minus: f64,
    pub nfl: f64,
    pub m0: f64,
    pub trace_minus: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GeninvSolution {
    pub m_re: f64,
    pub m_im: f64,
    pub residual: f64,
    pub iterations: usize,
    pub damping: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GeninvRow {
    pub c_target: f64,
    pub c_eff: f64,
    pub p: usize,
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub fro_plus_emp: f64,
    pub fro_minus_emp: f64,
    pub nfl_emp: f64,
    pub nfl_asym: f64,
    pub trace_minus_emp: f64,
    pub precision_estimate: f64,
}

impl From<&ResultRow> for GeninvRow {
    fn from(r: &ResultRow) -> Self {
        GeninvRow {
            c_target: r.c_target,
            c_eff: r.c_eff,
            p: r.p,
            n: r.n,
            replicate: r.replicate,
            seed: r.seed,
            fro_plus_emp: r.fro_plus_emp,
            fro_minus_emp: r.fro_minus_emp,
            nfl_emp: r.nfl_emp,
            nfl_asym: r.nfl_asym,
            trace_minus_emp: r.trace_minus_emp,
            precision_estimate: r.precision_estimate,
        }
    }
}

impl From<GeninvTransform> for Transform {
    fn from(t: GeninvTransform) -> Self {
        match t {
            GeninvTransform::Plus => Transform::Plus,
            GeninvTransform::Minus => Transform::Minus,
            GeninvTransform::Mp => Transform::Mp,
            GeninvTransform::Underline => Transform::Underline,
        }
    }
}

impl From<GeninvNoise> for Noise {
    fn from(n: GeninvNoise) -> Self {
        match n {
            GeninvNoise::Gaussian => Noise::Gaussian,
            GeninvNoise::Rademacher => Noise::Rademacher,
            GeninvNoise::UniformScaled => Noise::UniformScaled,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, records any error or panic, and converts the outcome to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GeninvStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GeninvStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer passed for `{what}`"));
            GeninvStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            match e.kind() {
                ErrorKind::Validation => GeninvStatus::Validation,
                ErrorKind::Numerical => GeninvStatus::Numerical,
                ErrorKind::Io => GeninvStatus::Io,
            }
        }
        Err(_) => {
            set_last_error("internal panic".into());
            GeninvStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: caller guarantees `p` is null or valid for reads.
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

unsafe fn write_out<T>(p: *mut T, what: &'static str, value: T) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: non-null and, per the caller's contract, valid for writes.
    unsafe { p.write(value) };
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: non-null and, per the caller's contract, valid for `len` reads.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: non-null, nul-terminated per the caller's contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::Lib(Error::Validation(format!("`{what}` is not valid UTF-8"))))
}

/// Message of the last failed call on this thread, or NULL. Valid until the next call.
#[no_mangle]
pub extern "C" fn geninv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses `"w:t,w:t,..."` into a new spectrum handle.
///
/// # Safety
/// `text` must be a nul-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn geninv_spectrum_parse(text: *const c_char, out: *mut *mut GeninvSpectrum) -> GeninvStatus {
    guard(|| {
        let spec: SpectrumSpec = unsafe { str_arg(text, "text") }?.parse()?;
        unsafe { write_out(out, "out", Box::into_raw(Box::new(GeninvSpectrum(spec)))) }
    })
}

/// Builds a spectrum from parallel arrays of weights and eigenvalues.
///
/// # Safety
/// `weights` and `eigenvalues` must each hold `len` doubles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn geninv_spectrum_from_atoms(
    weights: *const f64,
    eigenvalues: *const f64,
    len: usize,
    out: *mut *mut GeninvSpectrum,
) -> GeninvStatus {
    guard(|| {
        let w = unsafe { slice(weights, len, "weights") }?;
        let t = unsafe { slice(eigenvalues, len, "eigenvalues") }?;
        let atoms: Vec<(f64, f64)> = w.iter().copied().zip(t.iter().copied()).collect();
        let spec = SpectrumSpec::canonicalize(&atoms)?;
        unsafe { write_out(out, "out", Box::into_raw(Box::new(GeninvSpectrum(spec)))) }
    })
}

/// # Safety
/// `spectrum` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn geninv_spectrum_free(spectrum: *mut GeninvSpectrum) {
    if !spectrum.is_null() {
        // SAFETY: created by Box::into_raw in this crate.
        drop(unsafe { Box::from_raw(spectrum) });
    }
}

/// Number of atoms after canonicalization.
///
/// # Safety
/// `spectrum` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn geninv_spectrum_atom_count(spectrum: *const GeninvSpectrum, out: *mut usize) -> GeninvStatus {
    guard(|| {
        let s = unsafe { deref(spectrum, "spectrum") }?;
        unsafe { write_out(out, "out", s.0.atoms().len()) }
    })
}

/// `∫ τ^{-k} dH(τ)` for `k` in {1, 2}.
///
/// # Safety
/// `spectrum` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn geninv_spectrum_inverse_moment(
    spectrum: *const GeninvSpectrum,
    k: u32,
    out: *mut f64,
) -> GeninvStatus {
    guard(|| {
        let s = unsafe { deref(spectrum, "spectrum") }?;
        let v = s.0.inverse_moment(k)?;
        unsafe { write_out(out, "out", v) }
    })
}

/// Limiting Frobenius norms, NFL, `m_F̲(0)` and the trace limit of `S⁻`.
///
/// # Safety
/// `spectrum` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn geninv_asymptotic(
    spectrum: *const GeninvSpectrum,
    c: f64,
    out: *mut GeninvAsymptotic,
) -> GeninvStatus {
    guard(|| {
        let s = unsafe { deref(spectrum, "spectrum") }?;
        let a = asymptotic_summary(c, &s.0)?;
        let value = GeninvAsymptotic {
            c: a.c,
            fro_plus: a.fro_plus,
            fro_minus: a.fro_minus,
            nfl: a.nfl,
            m0: a.m0,
            trace_minus: a.trace_minus,
        };
        unsafe { write_out(out, "out", value) }
    })
}

/// Solves the limiting Stieltjes transform `which` at `z_re + i z_im`.
///
/// # Safety
/// `spectrum` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn geninv_solve(
    which: GeninvTransform,
    z_re: f64,
    z_im: f64,
    c: f64,
    spectrum: *const GeninvSpectrum,
    tol: f64,
    max_iter: usize,
    out: *mut GeninvSolution,
) -> GeninvStatus {
    guard(|| {
        let s = unsafe { deref(spectrum, "spectrum") }?;
        let sol = solve(which.into(), Complex64::new(z_re, z_im), c, &s.0, SolverOptions { tol, max_iter })?;
        let value = GeninvSolution {
            m_re: sol.m.re,
            m_im: sol.m.im,
            residual: sol.residual,
            iterations: sol.iterations,
            damping: sol.damping_used,
        };
        unsafe { write_out(out, "out", value) }
    })
}

/// One Monte-Carlo replication at dimension `p` and concentration `c`.
///
/// # Safety
/// `spectrum` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn geninv_replication(
    spectrum: *const GeninvSpectrum,
    p: usize,
    c: f64,
    noise: GeninvNoise,
    seed: u64,
    out: *mut GeninvRow,
) -> GeninvStatus {
    guard(|| {
        let s = unsafe { deref(spectrum, "spectrum") }?;
        let scenario = Scenario::new(p, c, s.0.clone(), noise.into(), seed)?;
        let row = run_replication(&scenario, 0)?;
        unsafe { write_out(out, "out", GeninvRow::from(&row)) }
    })
}

/// Runs a sweep over `c_list × p_grid × replications`. `threads = 0` uses the
/// global pool. Results do not depend on the thread count.
///
/// # Safety
/// Arrays must hold the stated number of elements; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn geninv_sweep_run(
    spectrum: *const GeninvSpectrum,
    c_list: *const f64,
    c_len: usize,
    p_grid: *const usize,
    p_len: usize,
    replications: usize,
    noise: GeninvNoise,
    seed: u64,
    threads: usize,
    out: *mut *mut GeninvSweep,
) -> GeninvStatus {
    guard(|| {
        let s = unsafe { deref(spectrum, "spectrum") }?;
        let config = SweepConfig {
            c_list: unsafe { slice(c_list, c_len, "c_list") }?.to_vec(),
            p_grid: unsafe { slice(p_grid, p_len, "p_grid") }?.to_vec(),
            replications,
            spectrum: s.0.clone(),
            noise: noise.into(),
            master_seed: seed,
            output_path: Default::default(),
        };
        let result = if threads == 0 {
            run_sweep(&config)?
        } else {
            run_sweep_with_threads(&config, threads)?
        };
        unsafe { write_out(out, "out", Box::into_raw(Box::new(GeninvSweep(result)))) }
    })
}

/// # Safety
/// `sweep` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn geninv_sweep_free(sweep: *mut GeninvSweep) {
    if !sweep.is_null() {
        // SAFETY: created by Box::into_raw in this crate.
        drop(unsafe { Box::from_raw(sweep) });
    }
}

/// Number of successful rows and failed replications.
///
/// # Safety
/// `sweep` must be a live handle; outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn geninv_sweep_counts(
    sweep: *const GeninvSweep,
    rows: *mut usize,
    failures: *mut usize,
) -> GeninvStatus {
    guard(|| {
        let s = unsafe { deref(sweep, "sweep") }?;
        unsafe { write_out(rows, "rows", s.0.rows.len()) }?;
        unsafe { write_out(failures, "failures", s.0.failures.len()) }
    })
}

/// Row `index` in `(c, p, replicate)` order.
///
/// # Safety
/// `sweep` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn geninv_sweep_row(sweep: *const GeninvSweep, index: usize, out: *mut GeninvRow) -> GeninvStatus {
    guard(|| {
        let s = unsafe { deref(sweep, "sweep") }?;
        let row = s.0.rows.get(index).ok_or_else(|| {
            Error::Validation(format!("row index {index} out of range ({} rows)", s.0.rows.len()))
        })?;
        unsafe { write_out(out, "out", GeninvRow::from(row)) }
    })
}

/// Writes the rows CSV to `path` and the per-cell summary next to it.
///
/// # Safety
/// `sweep` must be a live handle; `path` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn geninv_sweep_write_csv(sweep: *const GeninvSweep, path: *const c_char) -> GeninvStatus {
    guard(|| {
        let s = unsafe { deref(sweep, "sweep") }?;
        let path = unsafe { str_arg(path, "path") }?;
        s.0.write(Path::new(path))?;
        Ok(())
    })
}
