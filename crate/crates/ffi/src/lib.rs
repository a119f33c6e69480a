//! C ABI over the `boolean-flow` estimators.
//!
//! Conventions:
//! - every fallible function returns a [`BfStatus`]; results go through out-pointers;
//! - on failure, [`bf_last_error_message`] returns a description valid until the
//!   next call on the same thread;
//! - objects are opaque handles created by `bf_*_new`/estimator calls and released
//!   with the matching `bf_*_free`; freeing `NULL` is a no-op. Constructors set
//!   the handle to `NULL` on failure.

use boolean_flow::estimate::{m_estimate, mle_dsl, ClumpSample, EstimateReport, MleOptions, SingletonRule};
use boolean_flow::flow::{self, BayesOptions};
use boolean_flow::model::clump_density;
use boolean_flow::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Numerical = 4,
    Classification = 5,
    Data = 6,
    Io = 7,
    /// The requested quantity is not available for this result (e.g. no LRT interval).
    Unavailable = 8,
    Panic = 9,
}

/// Observed clump lengths plus the known mean segment length.
pub struct BfSample(ClumpSample);

/// Result of a rate estimator.
pub struct BfEstimate(EstimateReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> BfStatus {
    match e {
        Error::InvalidArgument(_) => BfStatus::InvalidArgument,
        Error::Domain(_) => BfStatus::Domain,
        Error::Classification(_) => BfStatus::Classification,
        Error::Data(_) => BfStatus::Data,
        Error::Io(_) => BfStatus::Io,
        Error::Simulation { source, .. } => status_of(source),
        e if e.is_numerical() => BfStatus::Numerical,
        _ => BfStatus::Data,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), BfStatusError>) -> BfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            BfStatus::Ok
        }
        Ok(Err(BfStatusError(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            BfStatus::Panic
        }
    }
}

struct BfStatusError(BfStatus, String);

impl From<Error> for BfStatusError {
    fn from(e: Error) -> Self {
        BfStatusError(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> BfStatusError {
    BfStatusError(BfStatus::NullPointer, format!("{name} is null"))
}

fn unavailable(what: &str) -> BfStatusError {
    BfStatusError(BfStatus::Unavailable, format!("{what} is not available for this estimate"))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), BfStatusError> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn sample_ref<'a>(sample: *const BfSample) -> Result<&'a ClumpSample, BfStatusError> {
    sample.as_ref().map(|s| &s.0).ok_or_else(|| null("sample"))
}

unsafe fn estimate_ref<'a>(est: *const BfEstimate) -> Result<&'a EstimateReport, BfStatusError> {
    est.as_ref().map(|e| &e.0).ok_or_else(|| null("estimate"))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next library call on this thread.
#[no_mangle]
pub extern "C" fn bf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a sample from `n` clump lengths. Lengths `<= mu (1 + singleton_eps)`
/// are classified as singletons.
///
/// # Safety
/// `lengths` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_sample_new(
    lengths: *const f64,
    n: usize,
    mu: f64,
    singleton_eps: f64,
    out: *mut *mut BfSample,
) -> BfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        if lengths.is_null() && n > 0 {
            return Err(null("lengths"));
        }
        if !(singleton_eps >= 0.0 && singleton_eps.is_finite()) {
            return Err(
                Error::InvalidArgument(format!("singleton_eps must be non-negative, got {singleton_eps}")).into()
            );
        }
        let ys = if n == 0 { Vec::new() } else { std::slice::from_raw_parts(lengths, n).to_vec() };
        let sample = ClumpSample::from_lengths(ys, mu, SingletonRule::AtMost { eps: singleton_eps })?;
        out.write(Box::into_raw(Box::new(BfSample(sample))));
        Ok(())
    })
}

/// Attaches `n` inter-clump spacings to a sample (used by the MLE when requested).
///
/// # Safety
/// `sample` must be a live handle; `spacings` must point to `n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn bf_sample_set_spacings(sample: *mut BfSample, spacings: *const f64, n: usize) -> BfStatus {
    guard(|| {
        let s = sample.as_mut().ok_or_else(|| null("sample"))?;
        if spacings.is_null() && n > 0 {
            return Err(null("spacings"));
        }
        let xs = if n == 0 { Vec::new() } else { std::slice::from_raw_parts(spacings, n).to_vec() };
        s.0 = s.0.clone().with_spacings(xs)?;
        Ok(())
    })
}

/// Number of clumps, mean length and unbiased length variance.
///
/// # Safety
/// `sample` must be a live handle; any non-null out-pointer must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_sample_stats(
    sample: *const BfSample,
    n: *mut usize,
    ybar: *mut f64,
    s2y: *mut f64,
) -> BfStatus {
    guard(|| {
        let s = sample_ref(sample)?;
        if !n.is_null() {
            n.write(s.n);
        }
        if !ybar.is_null() {
            ybar.write(s.ybar);
        }
        if !s2y.is_null() {
            s2y.write(s.s2y);
        }
        Ok(())
    })
}

/// # Safety
/// `sample` must be null or a handle from [`bf_sample_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bf_sample_free(sample: *mut BfSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Unconditional clump-length density for deterministic segments of length `t0`,
/// excluding the point mass at `t0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_clump_density(y: f64, lambda: f64, t0: f64, out: *mut f64) -> BfStatus {
    guard(|| write_out(out, clump_density(y, lambda, t0)?, "out"))
}

/// Moment estimator of the rate.
///
/// # Safety
/// `sample` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_m_estimate(sample: *const BfSample, out: *mut *mut BfEstimate) -> BfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let report = m_estimate(sample_ref(sample)?)?;
        out.write(Box::into_raw(Box::new(BfEstimate(report))));
        Ok(())
    })
}

/// Maximum-likelihood estimator of the rate under deterministic segments.
/// A nonzero `use_spacings` includes the spacings attached to the sample.
///
/// # Safety
/// `sample` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_mle(sample: *const BfSample, use_spacings: i32, out: *mut *mut BfEstimate) -> BfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let opts = MleOptions { use_spacings: use_spacings != 0, ..Default::default() };
        let report = mle_dsl(sample_ref(sample)?, opts)?;
        out.write(Box::into_raw(Box::new(BfEstimate(report))));
        Ok(())
    })
}

/// # Safety
/// `est` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_estimate_lambda(est: *const BfEstimate, out: *mut f64) -> BfStatus {
    guard(|| write_out(out, estimate_ref(est)?.lambda_hat, "out"))
}

/// Model-based standard error; `BF_STATUS_UNAVAILABLE` when not computed.
///
/// # Safety
/// `est` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_estimate_se_dsl(est: *const BfEstimate, out: *mut f64) -> BfStatus {
    guard(|| write_out(out, estimate_ref(est)?.se_dsl.ok_or_else(|| unavailable("se_dsl"))?, "out"))
}

/// Sandwich standard error; `BF_STATUS_UNAVAILABLE` when not computed.
///
/// # Safety
/// `est` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_estimate_se_g(est: *const BfEstimate, out: *mut f64) -> BfStatus {
    guard(|| write_out(out, estimate_ref(est)?.se_g.ok_or_else(|| unavailable("se_g"))?, "out"))
}

unsafe fn write_interval(ci: Option<(f64, f64)>, what: &str, lo: *mut f64, hi: *mut f64) -> Result<(), BfStatusError> {
    let (a, b) = ci.ok_or_else(|| unavailable(what))?;
    if lo.is_null() || hi.is_null() {
        return Err(null("lo/hi"));
    }
    lo.write(a);
    hi.write(b);
    Ok(())
}

/// 95% Wald interval from the sandwich standard error.
///
/// # Safety
/// `est` must be a live handle; `lo` and `hi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_estimate_ci_wald(est: *const BfEstimate, lo: *mut f64, hi: *mut f64) -> BfStatus {
    guard(|| write_interval(estimate_ref(est)?.ci_wald, "ci_wald", lo, hi))
}

/// 95% likelihood-ratio interval (MLE only).
///
/// # Safety
/// `est` must be a live handle; `lo` and `hi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_estimate_ci_lrt(est: *const BfEstimate, lo: *mut f64, hi: *mut f64) -> BfStatus {
    guard(|| write_interval(estimate_ref(est)?.ci_lrt, "ci_lrt", lo, hi))
}

/// # Safety
/// `est` must be null or a handle from an estimator call not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bf_estimate_free(est: *mut BfEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Total-flow estimate `n e^{lambda t0}`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_a_hat_1(lambda: f64, n: usize, t0: f64, out: *mut f64) -> BfStatus {
    guard(|| {
        if !(lambda > 0.0 && lambda.is_finite() && t0 > 0.0 && t0.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda and t0 must be positive, got {lambda}, {t0}")).into());
        }
        write_out(out, flow::a_hat_1(lambda, n, t0), "out")
    })
}

/// Expected number of particles in a clump of length `y`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_conditional_order_mean(y: f64, lambda: f64, t0: f64, out: *mut f64) -> BfStatus {
    guard(|| write_out(out, flow::conditional_order_mean(y, lambda, t0)?, "out"))
}

/// Bayes total-flow estimate: the sum over clumps of the expected particle count
/// given the clump length. A nonzero `use_interp` evaluates the conditional mean
/// from a grid interpolant (step `t0 / 20`).
///
/// # Safety
/// `sample` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_a_hat_bayes(
    sample: *const BfSample,
    lambda: f64,
    t0: f64,
    use_interp: i32,
    out: *mut f64,
) -> BfStatus {
    guard(|| {
        let s = sample_ref(sample)?;
        let opts = BayesOptions { use_interp: use_interp != 0, singleton_rule: s.singleton_rule, ..Default::default() };
        let report = flow::a_hat_bayes(s, lambda, t0, opts)?;
        write_out(out, report.a_hat_b, "out")
    })
}
