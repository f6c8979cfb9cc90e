//! C ABI for loo-gp.
//!
//! Objects are opaque heap handles created by `*_new` functions and released
//! by the matching `*_free`. Every fallible call returns a [`LooGpStatus`];
//! on failure [`loo_gp_last_error_message`] describes the error. Matrices are
//! passed row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use loo_gp::adjoint::{criterion_with_gradient, loo_forward};
use loo_gp::estimator::{estimate, Criterion, EstimatorConfig, FitResult};
use loo_gp::kernels::{KernelFamily, KernelParams};
use loo_gp::likelihood::lml_gradient;
use loo_gp::loo::Dataset;
use loo_gp::scoring::ScoringRule;
use loo_gp::GpError;
use nalgebra::{DMatrix, DVector};

pub const LOO_GP_KERNEL_SQUARED_EXPONENTIAL: u32 = 0;
pub const LOO_GP_KERNEL_MATERN52: u32 = 1;

pub const LOO_GP_RULE_PRESS: u32 = 0;
pub const LOO_GP_RULE_LOG_DENSITY: u32 = 1;
pub const LOO_GP_RULE_CRPS: u32 = 2;

pub const LOO_GP_CRITERION_PRESS: u32 = 0;
pub const LOO_GP_CRITERION_LOG_DENSITY: u32 = 1;
pub const LOO_GP_CRITERION_CRPS: u32 = 2;
pub const LOO_GP_CRITERION_MLE: u32 = 3;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LooGpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    SingularCovariance = 4,
    DegenerateScore = 5,
    Domain = 6,
    EstimationFailed = 7,
    Numerical = 8,
    BufferSize = 9,
    Panic = 10,
}

/// Design matrix and observations.
pub struct LooGpDataset(Dataset);

/// Kernel family and covariance parameters.
pub struct LooGpParams(KernelParams);

/// Outcome of [`loo_gp_estimate`].
pub struct LooGpFit(FitResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(LooGpStatus, String);

impl From<GpError> for Failure {
    fn from(e: GpError) -> Self {
        let status = match e {
            GpError::InvalidInput(_) | GpError::ParameterIndex { .. } => LooGpStatus::InvalidInput,
            GpError::DimensionMismatch { .. } => LooGpStatus::DimensionMismatch,
            GpError::SingularCovariance { .. } => LooGpStatus::SingularCovariance,
            GpError::DegenerateScore { .. } => LooGpStatus::DegenerateScore,
            GpError::Domain(_) => LooGpStatus::Domain,
            GpError::EstimationFailed(_) => LooGpStatus::EstimationFailed,
            _ => LooGpStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: LooGpStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> LooGpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LooGpStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LooGpStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(LooGpStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(LooGpStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(LooGpStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(LooGpStatus::NullPointer, format!("{what} is null")))
}

fn check_len(len: usize, expected: usize, what: &str) -> Result<(), Failure> {
    if len == expected {
        Ok(())
    } else {
        Err(fail(LooGpStatus::BufferSize, format!("{what} has length {len}, expected {expected}")))
    }
}

fn family(code: u32) -> Result<KernelFamily, Failure> {
    match code {
        LOO_GP_KERNEL_SQUARED_EXPONENTIAL => Ok(KernelFamily::SquaredExponential),
        LOO_GP_KERNEL_MATERN52 => Ok(KernelFamily::Matern52),
        _ => Err(fail(LooGpStatus::InvalidInput, format!("unknown kernel code {code}"))),
    }
}

fn rule(code: u32) -> Result<ScoringRule, Failure> {
    match code {
        LOO_GP_RULE_PRESS => Ok(ScoringRule::Press),
        LOO_GP_RULE_LOG_DENSITY => Ok(ScoringRule::LogDensity),
        LOO_GP_RULE_CRPS => Ok(ScoringRule::Crps),
        _ => Err(fail(LooGpStatus::InvalidInput, format!("unknown scoring rule code {code}"))),
    }
}

fn criterion(code: u32) -> Result<Criterion, Failure> {
    match code {
        LOO_GP_CRITERION_PRESS => Ok(Criterion::Press),
        LOO_GP_CRITERION_LOG_DENSITY => Ok(Criterion::LogDensity),
        LOO_GP_CRITERION_CRPS => Ok(Criterion::Crps),
        LOO_GP_CRITERION_MLE => Ok(Criterion::Mle),
        _ => Err(fail(LooGpStatus::InvalidInput, format!("unknown criterion code {code}"))),
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn loo_gp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn loo_gp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies an `n × d` row-major design `x` and `n` observations `z`.
///
/// # Safety
/// `x` must point to `n * d` doubles, `z` to `n` doubles, `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn loo_gp_dataset_new(x: *const f64, n: usize, d: usize, z: *const f64, out: *mut *mut LooGpDataset) -> LooGpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let len = n.checked_mul(d).ok_or_else(|| fail(LooGpStatus::InvalidInput, "n * d overflows"))?;
        let xs = slice(x, len, "x")?;
        let zs = slice(z, n, "z")?;
        let data = Dataset::new(DMatrix::from_row_slice(n, d, xs), DVector::from_column_slice(zs))?;
        *out = Box::into_raw(Box::new(LooGpDataset(data)));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a handle from [`loo_gp_dataset_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn loo_gp_dataset_free(dataset: *mut LooGpDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of observations, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn loo_gp_dataset_len(dataset: *const LooGpDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.len())
}

/// Builds kernel parameters. `length_scales` holds `d` entries.
///
/// # Safety
/// `length_scales` must point to `d` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn loo_gp_params_new(
    kernel: u32,
    process_variance: f64,
    length_scales: *const f64,
    d: usize,
    noise_variance: f64,
    estimate_noise: bool,
    out: *mut *mut LooGpParams,
) -> LooGpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let rho = slice(length_scales, d, "length_scales")?.to_vec();
        let params = KernelParams::new(family(kernel)?, process_variance, rho, noise_variance)?.with_estimated_noise(estimate_noise);
        params.validate()?;
        *out = Box::into_raw(Box::new(LooGpParams(params)));
        Ok(())
    })
}

/// # Safety
/// `params` must be null or a handle from [`loo_gp_params_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn loo_gp_params_free(params: *mut LooGpParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Number of free parameters `q`, or 0 for a null handle.
///
/// # Safety
/// `params` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn loo_gp_params_len(params: *const LooGpParams) -> usize {
    params.as_ref().map_or(0, |p| p.0.n_params())
}

/// Writes `θ = (process variance, length scales[, noise variance])` into `theta`.
///
/// # Safety
/// `params` must be a live handle and `theta` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn loo_gp_params_get(params: *const LooGpParams, theta: *mut f64, len: usize) -> LooGpStatus {
    guard(|| {
        let p = &handle(params, "params")?.0;
        check_len(len, p.n_params(), "theta")?;
        slice_mut(theta, len, "theta")?.copy_from_slice(&p.to_vec());
        Ok(())
    })
}

/// Leave-one-out criterion of `rule` and its gradient in θ (`grad_len` = q).
///
/// # Safety
/// Handles must be live; `value` must be writable and `grad` must point to `grad_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn loo_gp_criterion_with_gradient(
    params: *const LooGpParams,
    dataset: *const LooGpDataset,
    scoring_rule: u32,
    value: *mut f64,
    grad: *mut f64,
    grad_len: usize,
) -> LooGpStatus {
    guard(|| {
        let p = &handle(params, "params")?.0;
        let data = &handle(dataset, "dataset")?.0;
        let value = out_ptr(value, "value")?;
        check_len(grad_len, p.n_params(), "grad")?;
        let grad = slice_mut(grad, grad_len, "grad")?;
        let (v, g) = criterion_with_gradient(p, &data.x, &data.z, rule(scoring_rule)?)?;
        *value = v;
        grad.copy_from_slice(&g);
        Ok(())
    })
}

/// Log marginal likelihood and its gradient in θ (`grad_len` = q).
///
/// # Safety
/// As for [`loo_gp_criterion_with_gradient`].
#[no_mangle]
pub unsafe extern "C" fn loo_gp_lml_gradient(
    params: *const LooGpParams,
    dataset: *const LooGpDataset,
    value: *mut f64,
    grad: *mut f64,
    grad_len: usize,
) -> LooGpStatus {
    guard(|| {
        let p = &handle(params, "params")?.0;
        let data = &handle(dataset, "dataset")?.0;
        let value = out_ptr(value, "value")?;
        check_len(grad_len, p.n_params(), "grad")?;
        let grad = slice_mut(grad, grad_len, "grad")?;
        let (v, g) = lml_gradient(p, &data.x, &data.z)?;
        *value = v;
        grad.copy_from_slice(&g);
        Ok(())
    })
}

/// Leave-one-out predictive means and variances, `n` entries each.
///
/// # Safety
/// Handles must be live; `mu` and `sigma2` must each point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn loo_gp_loo_moments(
    params: *const LooGpParams,
    dataset: *const LooGpDataset,
    mu: *mut f64,
    sigma2: *mut f64,
    n: usize,
) -> LooGpStatus {
    guard(|| {
        let p = &handle(params, "params")?.0;
        let data = &handle(dataset, "dataset")?.0;
        check_len(n, data.len(), "moment buffers")?;
        let mu = slice_mut(mu, n, "mu")?;
        let sigma2 = slice_mut(sigma2, n, "sigma2")?;
        let (_, m) = loo_forward(p, &data.x, &data.z)?;
        mu.copy_from_slice(&m.mu);
        sigma2.copy_from_slice(&m.sigma2);
        Ok(())
    })
}

/// Multi-start estimation of θ. `noise_variance` is held fixed unless
/// `estimate_noise` is set.
///
/// # Safety
/// `dataset` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn loo_gp_estimate(
    dataset: *const LooGpDataset,
    criterion_code: u32,
    kernel: u32,
    n_starts: usize,
    seed: u64,
    noise_variance: f64,
    estimate_noise: bool,
    out: *mut *mut LooGpFit,
) -> LooGpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let data = &handle(dataset, "dataset")?.0;
        let config = EstimatorConfig {
            criterion: criterion(criterion_code)?,
            family: family(kernel)?,
            n_starts,
            seed,
            noise_variance,
            estimate_noise,
            ..Default::default()
        };
        let fit = estimate(data, &config)?;
        *out = Box::into_raw(Box::new(LooGpFit(fit)));
        Ok(())
    })
}

/// # Safety
/// `fit` must be null or a handle from [`loo_gp_estimate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn loo_gp_fit_free(fit: *mut LooGpFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Copies the estimated parameters into a new params handle.
///
/// # Safety
/// `fit` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn loo_gp_fit_params(fit: *const LooGpFit, out: *mut *mut LooGpParams) -> LooGpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let fit = &handle(fit, "fit")?.0;
        *out = Box::into_raw(Box::new(LooGpParams(fit.params.clone())));
        Ok(())
    })
}

/// Criterion value at the estimate and whether the chosen start converged.
///
/// # Safety
/// `fit` must be live; `value` and `converged` must be writable.
#[no_mangle]
pub unsafe extern "C" fn loo_gp_fit_summary(fit: *const LooGpFit, value: *mut f64, converged: *mut bool, iterations: *mut usize) -> LooGpStatus {
    guard(|| {
        let fit = &handle(fit, "fit")?.0;
        *out_ptr(value, "value")? = fit.criterion_value;
        *out_ptr(converged, "converged")? = fit.converged;
        *out_ptr(iterations, "iterations")? = fit.n_iterations;
        Ok(())
    })
}
