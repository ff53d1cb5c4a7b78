//! C ABI for regensim.
//!
//! Every fallible function returns an [`RsStatus`]; on failure a message for
//! the calling thread is available from [`rs_last_error`]. Streams and probit
//! models are opaque handles owned by the caller and released with their
//! `_free` function. Results are written through out-pointers, which are left
//! untouched on failure.

use regensim::dists::{ExpProposal, GammaTarget};
use regensim::estimators::{bias_bound, confidence_interval, ratio_fixed_cycles, tavc_estimate, CyclePair};
use regensim::probit::{load_lupus, map_newton, LaplaceProposal, MapResult, Prior, ProbitModel, ProbitTarget};
use regensim::renewal::gamma2_oracle;
use regensim::samplers::{gamma_exp_rrs_cdf, rrs_subsampled, rrs_terminal};
use regensim::{Error, RandomStream};
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    TrialBudgetExceeded = 3,
    ZeroWeight = 4,
    NoConvergence = 5,
    IndefiniteHessian = 6,
    DataIntegrity = 7,
    Numerical = 8,
    Panic = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> RsStatus {
    match e {
        Error::InvalidArgument(_) | Error::SingleCycle | Error::QueryPastHorizon { .. } => RsStatus::InvalidArgument,
        Error::TrialBudgetExceeded { .. } => RsStatus::TrialBudgetExceeded,
        Error::ZeroWeight => RsStatus::ZeroWeight,
        Error::NoConvergence { .. } => RsStatus::NoConvergence,
        Error::IndefiniteHessian => RsStatus::IndefiniteHessian,
        Error::DataIntegrity(_) => RsStatus::DataIntegrity,
        _ => RsStatus::Numerical,
    }
}

struct Fail(RsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(RsStatus::InvalidArgument, msg.into())
}

/// Run `f`, translating errors and panics into a status and the thread's
/// last-error message.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> RsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RsStatus::Ok
        }
        Ok(Err(Fail(s, m))) => {
            set_error(&m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            RsStatus::Panic
        }
    }
}

unsafe fn deref_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(RsStatus::NullPointer, format!("{name} is null")))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(RsStatus::NullPointer, format!("{name} is null")))
}

unsafe fn slice<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail(RsStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a>(p: *mut f64, n: usize, name: &str) -> Result<&'a mut [f64], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail(RsStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

fn positive(name: &str, x: f64) -> Result<f64, Fail> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {x}")))
    }
}

/// Message for the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn rs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Opaque random stream: one independent, reproducible sequence per
/// `(seed, stream_id)`.
pub struct RsStream(RandomStream);

#[no_mangle]
pub extern "C" fn rs_stream_new(seed: u64, stream_id: u64) -> *mut RsStream {
    Box::into_raw(Box::new(RsStream(RandomStream::new(seed, stream_id))))
}

/// # Safety
/// `stream` must come from [`rs_stream_new`] and not have been freed; null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn rs_stream_free(stream: *mut RsStream) {
    if !stream.is_null() {
        drop(Box::from_raw(stream));
    }
}

/// A uniform draw on (0, 1), mainly for checking stream reproducibility.
///
/// # Safety
/// `stream` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rs_stream_uniform(stream: *mut RsStream, out: *mut f64) -> RsStatus {
    guard(|| {
        let s = deref_mut(stream, "stream")?;
        let o = deref_mut(out, "out")?;
        *o = s.0.open01();
        Ok(())
    })
}

/// `n` independent RRS outputs at threshold `t` for a Gamma(shape, 1) target
/// and an Exp(rate) proposal. `total_draws`, when not null, receives the
/// number of proposal draws spent.
///
/// # Safety
/// `out` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rs_gamma_exp_rrs(
    stream: *mut RsStream,
    shape: f64,
    rate: f64,
    t: f64,
    n: usize,
    out: *mut f64,
    total_draws: *mut u64,
) -> RsStatus {
    guard(|| {
        let s = deref_mut(stream, "stream")?;
        let shape = positive("shape", shape)?;
        let rate = positive("rate", rate)?;
        let t = positive("t", t)?;
        let o = slice_mut(out, n, "out")?;
        let target = GammaTarget::new(shape, 1.0);
        let prop = ExpProposal::new(rate);
        let mut vals = Vec::with_capacity(n);
        let mut draws = 0u64;
        for _ in 0..n {
            let d = rrs_terminal(&target, &prop, t, &mut s.0)?;
            vals.push(d.point[0]);
            draws += d.n_draws;
        }
        o.copy_from_slice(&vals);
        if !total_draws.is_null() {
            *total_draws = draws;
        }
        Ok(())
    })
}

/// CDF at `y` of the RRS output at threshold `t` for the Gamma(2,1) target
/// with Exp(1) proposal.
#[no_mangle]
pub extern "C" fn rs_gamma_exp_rrs_cdf(t: f64, y: f64) -> f64 {
    gamma_exp_rrs_cdf(t, y)
}

/// Ratio estimate from cycle pairs with its variance constants and interval.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RsEstimate {
    pub value: f64,
    /// Sample variance of V − q̂W.
    pub s2: f64,
    /// Variance constant for intervals indexed by cycle count.
    pub eta2: f64,
    /// Variance constant for intervals indexed by simulated time.
    pub sigma2: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Ratio `Σv / Σw` over `n ≥ 2` cycles. With `t > 0` the interval is indexed
/// by simulated time `t`, otherwise by the cycle count.
///
/// # Safety
/// `v` and `w` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rs_ratio_estimate(
    v: *const f64,
    w: *const f64,
    n: usize,
    t: f64,
    level: f64,
    out: *mut RsEstimate,
) -> RsStatus {
    guard(|| {
        let v = slice(v, n, "v")?;
        let w = slice(w, n, "w")?;
        let o = deref_mut(out, "out")?;
        if !(level > 0.0 && level < 1.0) {
            return Err(invalid(format!("level must lie in (0, 1), got {level}")));
        }
        if w.iter().chain(v).any(|x| !x.is_finite()) || w.iter().any(|&x| x < 0.0) {
            return Err(invalid("cycle values must be finite with w >= 0"));
        }
        let pairs: Vec<CyclePair> = v.iter().zip(w).map(|(&v, &w)| CyclePair { v, w }).collect();
        let q = ratio_fixed_cycles(&pairs);
        let tv = tavc_estimate(&pairs, q)?;
        let (lo, hi) = if t > 0.0 {
            confidence_interval(q, tv.sigma2, t, level)
        } else {
            confidence_interval(q, tv.eta2, n as f64, level)
        };
        *o = RsEstimate {
            value: q,
            s2: tv.s2,
            eta2: tv.eta2,
            sigma2: tv.sigma2,
            ci_lo: lo,
            ci_hi: hi,
        };
        Ok(())
    })
}

/// Bias bound for `|h| ≤ k` from the first three cycle-length moments.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rs_bias_bound(k: f64, mu: f64, mu2: f64, mu3: f64, t: f64, out: *mut f64) -> RsStatus {
    guard(|| {
        let o = deref_mut(out, "out")?;
        positive("k", k)?;
        positive("mu", mu)?;
        positive("mu2", mu2)?;
        positive("mu3", mu3)?;
        positive("t", t)?;
        *o = bias_bound(k, mu, mu2, mu3, t);
        Ok(())
    })
}

/// TV distance between the residual life at `t` of a zero-delayed
/// Gamma(2, λ) renewal process and its stationary law.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rs_gamma2_tv(lambda: f64, t: f64, out: *mut f64) -> RsStatus {
    guard(|| {
        let o = deref_mut(out, "out")?;
        let lambda = positive("lambda", lambda)?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid(format!("t must be non-negative and finite, got {t}")));
        }
        let g = gamma2_oracle(lambda);
        *o = g.tv(t).unwrap_or_else(|| g.tv_quadrature(t));
        Ok(())
    })
}

/// Opaque probit model on the Lupus data, with its posterior mode.
pub struct RsProbit {
    model: ProbitModel,
    map: MapResult,
}

/// Build the Lupus probit model and find its mode. `prior_variance ≤ 0`
/// selects the flat prior, otherwise independent N(0, prior_variance).
///
/// # Safety
/// `out` must be valid; on success it receives a handle to free with
/// [`rs_probit_free`].
#[no_mangle]
pub unsafe extern "C" fn rs_probit_lupus_new(prior_variance: f64, out: *mut *mut RsProbit) -> RsStatus {
    guard(|| {
        let o = deref_mut(out, "out")?;
        let prior = if prior_variance > 0.0 {
            Prior::Gaussian(positive("prior_variance", prior_variance)?)
        } else {
            Prior::Flat
        };
        let model = ProbitModel::lupus(&load_lupus()?, prior);
        let map = map_newton(&model, &vec![0.0; model.k()], 1e-10, 100)?;
        *o = Box::into_raw(Box::new(RsProbit { model, map }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`rs_probit_lupus_new`]; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rs_probit_free(model: *mut RsProbit) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of coefficients.
///
/// # Safety
/// `model` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn rs_probit_dim(model: *const RsProbit) -> usize {
    model.as_ref().map_or(0, |m| m.model.k())
}

/// Copy the posterior mode into `mode`, `dim` doubles.
///
/// # Safety
/// `mode` must point to `dim` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rs_probit_mode(model: *const RsProbit, mode: *mut f64, dim: usize) -> RsStatus {
    guard(|| {
        let m = deref(model, "model")?;
        if dim != m.model.k() {
            return Err(invalid(format!("dim is {dim}, model has {}", m.model.k())));
        }
        slice_mut(mode, dim, "mode")?.copy_from_slice(&m.map.mode);
        Ok(())
    })
}

/// Unnormalized log posterior at `beta`.
///
/// # Safety
/// `beta` must point to `dim` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rs_probit_log_posterior(
    model: *const RsProbit,
    beta: *const f64,
    dim: usize,
    out: *mut f64,
) -> RsStatus {
    guard(|| {
        let m = deref(model, "model")?;
        if dim != m.model.k() {
            return Err(invalid(format!("dim is {dim}, model has {}", m.model.k())));
        }
        let b = slice(beta, dim, "beta")?;
        *deref_mut(out, "out")? = m.model.log_posterior(b);
        Ok(())
    })
}

/// `n` posterior draws by sub-sampled RRS at per-sample threshold `t`, with
/// the Laplace proposal inflated by `alpha2` and target scale `e^xi`. Draws
/// are written row-major into `out`, `n·dim` doubles.
///
/// # Safety
/// `out` must point to `n·dim` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rs_probit_sample_rrs(
    model: *const RsProbit,
    stream: *mut RsStream,
    xi: f64,
    alpha2: f64,
    t: f64,
    n: usize,
    out: *mut f64,
    total_draws: *mut u64,
) -> RsStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let s = deref_mut(stream, "stream")?;
        if !xi.is_finite() {
            return Err(invalid("xi must be finite"));
        }
        let alpha2 = positive("alpha2", alpha2)?;
        let t = positive("t", t)?;
        let k = m.model.k();
        let len = n.checked_mul(k).ok_or_else(|| invalid("n·dim overflows"))?;
        let o = slice_mut(out, len, "out")?;
        let prop = LaplaceProposal::from_map(&m.map, alpha2, xi)?;
        let target = ProbitTarget { model: &m.model, xi };
        let run = rrs_subsampled(&target, &prop, t, n, &mut s.0)?;
        o.copy_from_slice(&run.points);
        if !total_draws.is_null() {
            *total_draws = run.proposal_draws;
        }
        Ok(())
    })
}
