//! C ABI over the detproc library.
//!
//! Kernels, configurations and discretized samplers are exposed as opaque
//! handles; every fallible call returns a [`DpStatus`] and writes results
//! through out-pointers. The most recent error message per thread is
//! available via [`dp_last_error_message`]. A C header is generated into
//! `include/detproc.h` at build time.
//!
//! Pointer contract: handles must come from the constructors here and stay
//! valid for the call; array arguments must point to `len` readable doubles.
//! Handles and out-pointers are null-checked, so the exported functions stay
//! non-`unsafe` in the signature.

#![allow(clippy::not_unsafe_ptr_arg_deref)]

use detproc::functionals::{psi_regularized, LambdaRegularizer};
use detproc::kernels::{
    correlation_function, palm_reduce, BesselKernel, Configuration, Kernel, SineKernel,
};
use detproc::orthopoly::{CdKernel, OrthoPolyFamily, ScaledKernel};
use detproc::palm::{rho_estimate_mc, GridMap, RhoMcOptions};
use detproc::sampler::{discretize, dpp_sample, stream_rng, DiscretizedKernel, SamplerConfig};
use libc::{c_char, size_t};
use std::cell::RefCell;
use std::ffi::CString;
use std::sync::Arc;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    DomainViolation = 3,
    SingularConfiguration = 4,
    NumericalFailure = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(msg).ok();
    });
}

fn status_of(err: &detproc::Error) -> DpStatus {
    use detproc::Error::*;
    match err {
        InvalidParameter(_) | Config(_) => DpStatus::InvalidParameter,
        Domain(_) => DpStatus::DomainViolation,
        SingularConfiguration { .. } => DpStatus::SingularConfiguration,
        Numerical(_) | Io(_) => DpStatus::NumericalFailure,
    }
}

fn fail(err: detproc::Error) -> DpStatus {
    let code = status_of(&err);
    set_error(err.to_string());
    code
}

/// Last error message raised on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |s| s.as_ptr())
    })
}

/// Opaque kernel handle.
pub struct DpKernel {
    inner: Arc<dyn Kernel>,
}

/// Opaque discretized-kernel handle.
pub struct DpDiscretized {
    inner: DiscretizedKernel,
}

macro_rules! nonnull {
    ($ptr:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => {
                set_error("null pointer argument".into());
                return DpStatus::NullPointer;
            }
        }
    };
}

fn return_kernel(out: *mut *mut DpKernel, kernel: Arc<dyn Kernel>) -> DpStatus {
    if out.is_null() {
        set_error("null out pointer".into());
        return DpStatus::NullPointer;
    }
    unsafe {
        *out = Box::into_raw(Box::new(DpKernel { inner: kernel }));
    }
    DpStatus::Ok
}

/// Create the sine kernel.
#[no_mangle]
pub extern "C" fn dp_kernel_sine(out: *mut *mut DpKernel) -> DpStatus {
    return_kernel(out, Arc::new(SineKernel))
}

/// Create the Bessel kernel with exponent `s > -1`.
#[no_mangle]
pub extern "C" fn dp_kernel_bessel(s: f64, out: *mut *mut DpKernel) -> DpStatus {
    match BesselKernel::new(s) {
        Ok(k) => return_kernel(out, Arc::new(k)),
        Err(e) => fail(e),
    }
}

/// Create a weighted Christoffel–Darboux kernel: `family` 0 = Hermite,
/// 1 = Jacobi with exponent `s` (ignored for Hermite).
#[no_mangle]
pub extern "C" fn dp_kernel_cd(
    family: i32,
    n: size_t,
    s: f64,
    out: *mut *mut DpKernel,
) -> DpStatus {
    let fam = match family {
        0 => OrthoPolyFamily::Hermite,
        1 => match OrthoPolyFamily::jacobi(s) {
            Ok(f) => f,
            Err(e) => return fail(e),
        },
        _ => {
            set_error(format!("unknown family {family}"));
            return DpStatus::InvalidParameter;
        }
    };
    match CdKernel::new(fam, n) {
        Ok(k) => return_kernel(out, Arc::new(k)),
        Err(e) => fail(e),
    }
}

/// Create a scaled kernel: the bulk-scaled Hermite kernel (`family` 0) or the
/// hard-edge-scaled Jacobi kernel (`family` 1, exponent `s`).
#[no_mangle]
pub extern "C" fn dp_kernel_scaled(
    family: i32,
    n: size_t,
    s: f64,
    out: *mut *mut DpKernel,
) -> DpStatus {
    let built: detproc::Result<ScaledKernel> = match family {
        0 => ScaledKernel::hermite_bulk(n),
        1 => ScaledKernel::jacobi_hard_edge(n, s),
        _ => {
            set_error(format!("unknown family {family}"));
            return DpStatus::InvalidParameter;
        }
    };
    match built {
        Ok(k) => return_kernel(out, Arc::new(k)),
        Err(e) => fail(e),
    }
}

/// Reduce a kernel at `len` distinct conditioning points (the Palm kernel).
#[no_mangle]
pub extern "C" fn dp_kernel_palm_reduce(
    kernel: *const DpKernel,
    points: *const f64,
    len: size_t,
    out: *mut *mut DpKernel,
) -> DpStatus {
    let k = nonnull!(kernel);
    if points.is_null() {
        set_error("null points".into());
        return DpStatus::NullPointer;
    }
    let pts = unsafe { std::slice::from_raw_parts(points, len) };
    match palm_reduce(k.inner.clone(), pts) {
        Ok(r) => return_kernel(out, Arc::new(r)),
        Err(e) => fail(e),
    }
}

/// Evaluate `K(x, y)` with domain checking.
#[no_mangle]
pub extern "C" fn dp_kernel_eval(
    kernel: *const DpKernel,
    x: f64,
    y: f64,
    out: *mut f64,
) -> DpStatus {
    let k = nonnull!(kernel);
    if out.is_null() {
        set_error("null out pointer".into());
        return DpStatus::NullPointer;
    }
    match detproc::kernels::kernel_eval_checked(k.inner.as_ref(), x, y) {
        Ok(v) => {
            unsafe { *out = v };
            DpStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Diagonal value `K(x, x)`.
#[no_mangle]
pub extern "C" fn dp_kernel_diagonal(kernel: *const DpKernel, x: f64, out: *mut f64) -> DpStatus {
    dp_kernel_eval(kernel, x, x, out)
}

/// Correlation function `det K(p_i, p_j)`.
#[no_mangle]
pub extern "C" fn dp_correlation_function(
    kernel: *const DpKernel,
    points: *const f64,
    len: size_t,
    out: *mut f64,
) -> DpStatus {
    let k = nonnull!(kernel);
    if points.is_null() || out.is_null() {
        set_error("null pointer argument".into());
        return DpStatus::NullPointer;
    }
    let pts = unsafe { std::slice::from_raw_parts(points, len) };
    unsafe { *out = correlation_function(k.inner.as_ref(), pts) };
    DpStatus::Ok
}

#[no_mangle]
pub extern "C" fn dp_kernel_free(kernel: *mut DpKernel) {
    if !kernel.is_null() {
        drop(unsafe { Box::from_raw(kernel) });
    }
}

/// Log of the truncated multiplicative functional
/// `Σ_{|x|<=R} 2(log|x-p| - log|x-q|)` over `points`, optionally with the
/// rational regularizer's compensator for `kernel` (pass `use_lambda0 = 1`).
#[no_mangle]
pub extern "C" fn dp_log_psi(
    kernel: *const DpKernel,
    use_lambda0: i32,
    p: f64,
    q: f64,
    points: *const f64,
    len: size_t,
    radius: f64,
    out: *mut f64,
) -> DpStatus {
    let k = nonnull!(kernel);
    if (points.is_null() && len > 0) || out.is_null() {
        set_error("null pointer argument".into());
        return DpStatus::NullPointer;
    }
    let pts = unsafe { std::slice::from_raw_parts(points, len) }.to_vec();
    let window = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |w, &v| {
            (w.0.min(v), w.1.max(v))
        });
    let window = if pts.is_empty() { (0.0, 1.0) } else { window };
    let x = match Configuration::new(pts, window) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let lambda = if use_lambda0 != 0 {
        Some(LambdaRegularizer::rational())
    } else {
        None
    };
    match psi_regularized(k.inner.as_ref(), lambda.as_ref(), p, q, &x, radius) {
        Ok(est) => {
            unsafe { *out = est.log_value };
            DpStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Discretize a kernel on `grid_n` midpoints of `[lo, hi]`.
#[no_mangle]
pub extern "C" fn dp_discretize(
    kernel: *const DpKernel,
    lo: f64,
    hi: f64,
    grid_n: size_t,
    out: *mut *mut DpDiscretized,
) -> DpStatus {
    let k = nonnull!(kernel);
    if out.is_null() {
        set_error("null out pointer".into());
        return DpStatus::NullPointer;
    }
    match discretize(k.inner.as_ref(), (lo, hi), grid_n) {
        Ok(dk) => {
            unsafe { *out = Box::into_raw(Box::new(DpDiscretized { inner: dk })) };
            DpStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Expected particle number of the discretized process.
#[no_mangle]
pub extern "C" fn dp_discretized_expected_points(
    dk: *const DpDiscretized,
    out: *mut f64,
) -> DpStatus {
    let d = nonnull!(dk);
    if out.is_null() {
        set_error("null out pointer".into());
        return DpStatus::NullPointer;
    }
    unsafe { *out = d.inner.expected_points() };
    DpStatus::Ok
}

/// Draw one determinantal sample into `buf` (capacity `cap`); the number of
/// points is written to `written`. Fails with `InvalidParameter` if the
/// sample does not fit.
#[no_mangle]
pub extern "C" fn dp_dpp_sample(
    dk: *const DpDiscretized,
    seed: u64,
    stream: u64,
    buf: *mut f64,
    cap: size_t,
    written: *mut size_t,
) -> DpStatus {
    let d = nonnull!(dk);
    if buf.is_null() || written.is_null() {
        set_error("null pointer argument".into());
        return DpStatus::NullPointer;
    }
    let mut rng = stream_rng(seed, stream);
    match dpp_sample(&d.inner, &mut rng) {
        Ok(c) => {
            if c.len() > cap {
                set_error(format!("sample has {} points, buffer holds {cap}", c.len()));
                return DpStatus::InvalidParameter;
            }
            let slice = unsafe { std::slice::from_raw_parts_mut(buf, c.len()) };
            slice.copy_from_slice(c.points());
            unsafe { *written = c.len() };
            DpStatus::Ok
        }
        Err(e) => fail(e),
    }
}

#[no_mangle]
pub extern "C" fn dp_discretized_free(dk: *mut DpDiscretized) {
    if !dk.is_null() {
        drop(unsafe { Box::from_raw(dk) });
    }
}

/// Monte Carlo estimate of `rho(p)/rho(q)` by Palm sampling; `map_sqrt = 1`
/// samples in the `x = t²` coordinates (recommended for Bessel kernels).
/// Writes the ratio and its standard error.
#[allow(clippy::too_many_arguments)]
#[no_mangle]
pub extern "C" fn dp_rho_estimate(
    kernel: *const DpKernel,
    use_lambda0: i32,
    p: f64,
    q: f64,
    window_lo: f64,
    window_hi: f64,
    grid_n: size_t,
    map_sqrt: i32,
    n_samples: size_t,
    seed: u64,
    out_ratio: *mut f64,
    out_std_error: *mut f64,
) -> DpStatus {
    let k = nonnull!(kernel);
    if out_ratio.is_null() || out_std_error.is_null() {
        set_error("null out pointer".into());
        return DpStatus::NullPointer;
    }
    let lambda = if use_lambda0 != 0 {
        Some(LambdaRegularizer::rational())
    } else {
        None
    };
    let cfg = SamplerConfig {
        seed,
        ..Default::default()
    };
    let opts = RhoMcOptions {
        window: (window_lo, window_hi),
        grid_n,
        map: if map_sqrt != 0 {
            GridMap::Sqrt
        } else {
            GridMap::Identity
        },
        n_samples,
        truncation: None,
    };
    match rho_estimate_mc(k.inner.clone(), lambda.as_ref(), p, q, &cfg, &opts) {
        Ok(est) => {
            unsafe {
                *out_ratio = est.ratio;
                *out_std_error = est.std_error;
            }
            DpStatus::Ok
        }
        Err(e) => fail(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_kernel_through_the_abi() {
        let mut k: *mut DpKernel = std::ptr::null_mut();
        assert_eq!(dp_kernel_sine(&mut k), DpStatus::Ok);
        let mut v = 0.0;
        assert_eq!(dp_kernel_eval(k, 0.0, 0.5, &mut v), DpStatus::Ok);
        assert!((v - 2.0 / std::f64::consts::PI).abs() < 1e-14);
        let pts = [0.0, 0.5];
        let mut rho2 = 0.0;
        assert_eq!(
            dp_correlation_function(k, pts.as_ptr(), 2, &mut rho2),
            DpStatus::Ok
        );
        assert!((rho2 - (1.0 - v * v)).abs() < 1e-12);
        dp_kernel_free(k);
    }

    #[test]
    fn error_paths_set_messages() {
        let mut k: *mut DpKernel = std::ptr::null_mut();
        assert_eq!(dp_kernel_bessel(-2.0, &mut k), DpStatus::InvalidParameter);
        let msg = dp_last_error_message();
        assert!(!msg.is_null());
        assert_eq!(dp_kernel_bessel(0.5, &mut k), DpStatus::Ok);
        let mut v = 0.0;
        assert_eq!(
            dp_kernel_eval(k, -1.0, 1.0, &mut v),
            DpStatus::DomainViolation
        );
        dp_kernel_free(k);
    }

    #[test]
    fn palm_reduction_and_sampling_through_the_abi() {
        let mut k: *mut DpKernel = std::ptr::null_mut();
        assert_eq!(dp_kernel_sine(&mut k), DpStatus::Ok);
        let cond = [0.0];
        let mut reduced: *mut DpKernel = std::ptr::null_mut();
        assert_eq!(
            dp_kernel_palm_reduce(k, cond.as_ptr(), 1, &mut reduced),
            DpStatus::Ok
        );
        let mut v = 1.0;
        assert_eq!(dp_kernel_eval(reduced, 0.0, 0.7, &mut v), DpStatus::Ok);
        assert!(v.abs() < 1e-12, "reduced kernel vanishes at the point");

        let mut dk: *mut DpDiscretized = std::ptr::null_mut();
        assert_eq!(dp_discretize(k, -4.0, 4.0, 128, &mut dk), DpStatus::Ok);
        let mut expected = 0.0;
        assert_eq!(
            dp_discretized_expected_points(dk, &mut expected),
            DpStatus::Ok
        );
        assert!((expected - 8.0).abs() < 0.5);
        let mut buf = [0.0_f64; 64];
        let mut n: size_t = 0;
        assert_eq!(
            dp_dpp_sample(dk, 7, 0, buf.as_mut_ptr(), buf.len(), &mut n),
            DpStatus::Ok
        );
        assert!(n > 0 && n < 20);
        // identical seed and stream reproduce the draw
        let mut buf2 = [0.0_f64; 64];
        let mut n2: size_t = 0;
        assert_eq!(
            dp_dpp_sample(dk, 7, 0, buf2.as_mut_ptr(), buf2.len(), &mut n2),
            DpStatus::Ok
        );
        assert_eq!(n, n2);
        assert_eq!(&buf[..n], &buf2[..n2]);
        dp_discretized_free(dk);
        dp_kernel_free(reduced);
        dp_kernel_free(k);
    }

    #[test]
    fn log_psi_through_the_abi() {
        let mut k: *mut DpKernel = std::ptr::null_mut();
        assert_eq!(dp_kernel_sine(&mut k), DpStatus::Ok);
        let pts = [3.0];
        let mut v = 0.0;
        assert_eq!(
            dp_log_psi(k, 0, 1.0, 2.0, pts.as_ptr(), 1, 5.0, &mut v),
            DpStatus::Ok
        );
        assert!((v - 4.0f64.ln()).abs() < 1e-13);
        dp_kernel_free(k);
    }
}
