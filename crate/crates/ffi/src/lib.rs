//! C ABI over `polymerlab`.
//!
//! Objects are opaque handles created by `pl_*_new`/`pl_*_generate`/
//! `pl_*_load` and released by the matching `pl_*_free`. Every fallible
//! call returns a [`PlStatus`]; on failure `pl_last_error` gives a
//! message for the calling thread. Panics never cross the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use polymerlab::polymer::{self, KernelSpec};
use polymerlab::{env, fpp, Beta, EnvSlab, Error, ModelParams};

/// Call outcome. Codes 2 to 5 match the exit codes of the command line tool.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlStatus {
    Ok = 0,
    InvalidArgument = 2,
    Capacity = 3,
    Infeasible = 4,
    Internal = 5,
    NullPointer = 6,
    Panic = 7,
}

/// Model parameters.
pub struct PlParams(ModelParams);

/// An obstacle field on a finite window.
pub struct PlSlab(EnvSlab);

/// A normalized transition kernel.
pub struct PlKernel(KernelSpec);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PlStatus {
    match e.exit_code() {
        2 => PlStatus::InvalidArgument,
        3 => PlStatus::Capacity,
        4 => PlStatus::Infeasible,
        _ => PlStatus::Internal,
    }
}

struct NullArg;

fn guard(f: impl FnOnce() -> Result<Result<(), Error>, NullArg>) -> PlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(Ok(()))) => PlStatus::Ok,
        Ok(Ok(Err(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(NullArg)) => {
            set_error("null pointer argument".into());
            PlStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".into());
            PlStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T) -> Result<&'a T, NullArg> {
    p.as_ref().ok_or(NullArg)
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), NullArg> {
    if out.is_null() {
        return Err(NullArg);
    }
    out.write(v);
    Ok(())
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<Result<&'a Path, Error>, NullArg> {
    if p.is_null() {
        return Err(NullArg);
    }
    Ok(CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| Error::InvalidParams("path is not UTF-8".into())))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pl_version() -> *const c_char {
    concat!("polymerlab ", env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn pl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// `beta = -INFINITY` selects the hard-obstacle limit.
#[no_mangle]
pub unsafe extern "C" fn pl_params_new(
    d: u32,
    alpha: f64,
    c2: f64,
    p: f64,
    beta: f64,
    theta: f64,
    zeta: f64,
    out: *mut *mut PlParams,
) -> PlStatus {
    guard(|| {
        let beta = if beta == f64::NEG_INFINITY { Beta::NegInfinity } else { Beta::Finite(beta) };
        let params = ModelParams { d: d as usize, alpha, c2, p, beta, theta, zeta };
        let r = params.validated().map(|m| Box::into_raw(Box::new(PlParams(m))));
        match r {
            Ok(h) => put(out, h).map(Ok),
            Err(e) => Ok(Err(e)),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn pl_params_free(params: *mut PlParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// `s_p = (log 1/p)^{1/d}`.
#[no_mangle]
pub unsafe extern "C" fn pl_scale_factor(p: f64, d: u32, out: *mut f64) -> PlStatus {
    guard(|| match env::scale_factor(p, d) {
        Ok(s) => put(out, s).map(Ok),
        Err(e) => Ok(Err(e)),
    })
}

#[no_mangle]
pub unsafe extern "C" fn pl_slab_generate(
    params: *const PlParams,
    n: usize,
    half_width: i64,
    seed: u64,
    out: *mut *mut PlSlab,
) -> PlStatus {
    guard(|| {
        let params = get(params)?;
        match EnvSlab::generate(&params.0, n, half_width, seed) {
            Ok(s) => put(out, Box::into_raw(Box::new(PlSlab(s)))).map(Ok),
            Err(e) => Ok(Err(e)),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn pl_slab_free(slab: *mut PlSlab) {
    if !slab.is_null() {
        drop(Box::from_raw(slab));
    }
}

#[no_mangle]
pub unsafe extern "C" fn pl_slab_layers(slab: *const PlSlab) -> usize {
    slab.as_ref().map_or(0, |s| s.0.n())
}

#[no_mangle]
pub unsafe extern "C" fn pl_slab_half_width(slab: *const PlSlab) -> i64 {
    slab.as_ref().map_or(0, |s| s.0.half_width())
}

/// Writes 1 for an obstacle at `(layer, (x0, x1))`, 0 for an open site.
/// `x1` is ignored when `d = 1`.
#[no_mangle]
pub unsafe extern "C" fn pl_slab_obstacle(
    slab: *const PlSlab,
    layer: usize,
    x0: i64,
    x1: i64,
    out: *mut u8,
) -> PlStatus {
    guard(|| {
        let s = &get(slab)?.0;
        if layer == 0 || layer > s.n() {
            return Ok(Err(Error::LayerOutOfRange { layer, layers: s.n() }));
        }
        let site = [x0, if s.d() == 2 { x1 } else { 0 }];
        put(out, s.eta(layer, site) as u8).map(Ok)
    })
}

/// A copy of `slab` with layer `m` redrawn from `fresh_seed`.
#[no_mangle]
pub unsafe extern "C" fn pl_slab_resample_layer(
    slab: *const PlSlab,
    m: usize,
    fresh_seed: u64,
    out: *mut *mut PlSlab,
) -> PlStatus {
    guard(|| match get(slab)?.0.resample_layer(m, fresh_seed) {
        Ok(s) => put(out, Box::into_raw(Box::new(PlSlab(s)))).map(Ok),
        Err(e) => Ok(Err(e)),
    })
}

/// Writes the binary slab to `path` and its JSON sidecar to `path.json`.
#[no_mangle]
pub unsafe extern "C" fn pl_slab_save(slab: *const PlSlab, path: *const c_char) -> PlStatus {
    guard(|| {
        let s = get(slab)?;
        Ok(path_arg(path)?.and_then(|p| env::write_slab_file(&s.0, p, None)))
    })
}

#[no_mangle]
pub unsafe extern "C" fn pl_slab_load(path: *const c_char, out: *mut *mut PlSlab) -> PlStatus {
    guard(|| match path_arg(path)?.and_then(env::read_slab_file) {
        Ok(s) => put(out, Box::into_raw(Box::new(PlSlab(s)))).map(Ok),
        Err(e) => Ok(Err(e)),
    })
}

/// Minimum passage time over the first `n` layers, on the raw open sites
/// or on the theta-regularized view. `out_exact` (optional) receives 1
/// when the window provably did not cut off a better path.
#[no_mangle]
pub unsafe extern "C" fn pl_passage_time(
    slab: *const PlSlab,
    params: *const PlParams,
    n: usize,
    regularized: bool,
    out_value: *mut f64,
    out_exact: *mut u8,
) -> PlStatus {
    guard(|| {
        let s = &get(slab)?.0;
        let p = &get(params)?.0;
        let r = if regularized {
            env::regularize(s, p.theta).and_then(|v| fpp::passage_time(&v, n, p))
        } else {
            fpp::passage_time(s, n, p)
        };
        match r {
            Ok(r) => {
                put(out_value, r.value)?;
                if !out_exact.is_null() {
                    out_exact.write(r.exact as u8);
                }
                Ok(Ok(()))
            }
            Err(e) => Ok(Err(e)),
        }
    })
}

/// Kernel normalized so that the truncated mass is below `epsilon`.
#[no_mangle]
pub unsafe extern "C" fn pl_kernel_new(params: *const PlParams, epsilon: f64, out: *mut *mut PlKernel) -> PlStatus {
    guard(|| match polymer::kernel_normalizer(&get(params)?.0, epsilon) {
        Ok(k) => put(out, Box::into_raw(Box::new(PlKernel(k)))).map(Ok),
        Err(e) => Ok(Err(e)),
    })
}

#[no_mangle]
pub unsafe extern "C" fn pl_kernel_c1(kernel: *const PlKernel) -> f64 {
    kernel.as_ref().map_or(f64::NAN, |k| k.0.c1)
}

#[no_mangle]
pub unsafe extern "C" fn pl_kernel_cap(kernel: *const PlKernel) -> i64 {
    kernel.as_ref().map_or(-1, |k| k.0.cap)
}

#[no_mangle]
pub unsafe extern "C" fn pl_kernel_free(kernel: *mut PlKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// `log Z_n` at the beta stored in `params`; the hard-obstacle sweep when
/// it is `-INFINITY`. `out_certificate` (optional) receives the additive
/// error bound.
#[no_mangle]
pub unsafe extern "C" fn pl_partition(
    slab: *const PlSlab,
    params: *const PlParams,
    kernel: *const PlKernel,
    n: usize,
    out_log_z: *mut f64,
    out_certificate: *mut f64,
) -> PlStatus {
    guard(|| {
        let s = &get(slab)?.0;
        let p = &get(params)?.0;
        let k = &get(kernel)?.0;
        match polymer::log_partition(s, n, p, k) {
            Ok(r) => {
                put(out_log_z, r.log_z)?;
                if !out_certificate.is_null() {
                    out_certificate.write(r.error_certificate);
                }
                Ok(Ok(()))
            }
            Err(e) => Ok(Err(e)),
        }
    })
}
