//! Regenerative ratio estimators of `q = E_f[h]`, their variance constants,
//! confidence intervals, a non-asymptotic bias bound and bias sweeps.

use rayon::prelude::*;
use serde::Serialize;

use crate::dists::{Proposal, Target};
use crate::error::{Error, Result};
use crate::rng::{stream_id, RandomStream};
use crate::samplers::{rejection_sample, rrs_path, CycleMoments, RegenPath};
use crate::special::norm_quantile;
use crate::stats::{linear_fit, pairwise_sum, CompensatedSum};

/// One regeneration cycle: `v = h(X)·W`, `w = W`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CyclePair {
    pub v: f64,
    pub w: f64,
}

/// Cycle pairs of a path up to and including N(t).
pub fn cycle_pairs<H: Fn(&[f64]) -> f64>(path: &RegenPath, h: H) -> Vec<CyclePair> {
    (0..path.stop_index)
        .map(|i| CyclePair {
            v: h(path.point(i)) * path.weights[i],
            w: path.weights[i],
        })
        .collect()
}

/// `Σ_{n≤N(t)} h(Xₙ)Wₙ / Σ_{n≤N(t)} Wₙ`, last cycle included.
pub fn ratio_fixed_time<H: Fn(&[f64]) -> f64>(path: &RegenPath, h: H) -> f64 {
    ratio_prefix(path, &h, path.stop_index)
}

/// Same ratio with the last cycle dropped.
pub fn ratio_drop_last<H: Fn(&[f64]) -> f64>(path: &RegenPath, h: H) -> Result<f64> {
    if path.stop_index < 2 {
        return Err(Error::SingleCycle);
    }
    Ok(ratio_prefix(path, &h, path.stop_index - 1))
}

fn ratio_prefix<H: Fn(&[f64]) -> f64>(path: &RegenPath, h: &H, n: usize) -> f64 {
    let mut v = CompensatedSum::new();
    let mut w = CompensatedSum::new();
    for i in 0..n {
        let wi = path.weights[i];
        v.add(h(path.point(i)) * wi);
        w.add(wi);
    }
    v.value() / w.value()
}

/// `Σ Vₙ / Σ Wₙ` over a fixed number of cycles.
pub fn ratio_fixed_cycles(pairs: &[CyclePair]) -> f64 {
    let v: Vec<f64> = pairs.iter().map(|p| p.v).collect();
    let w: Vec<f64> = pairs.iter().map(|p| p.w).collect();
    pairwise_sum(&v) / pairwise_sum(&w)
}

/// Variance constants of the ratio estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tavc {
    /// s² = s₁₁ − 2q̂s₁₂ + q̂²s₂₂, the sample variance of Zₙ = Vₙ − q̂Wₙ
    pub s2: f64,
    /// η̃² = s²/W̄², for intervals indexed by the number of cycles
    pub eta2: f64,
    /// σ̂² = s²/W̄, for intervals indexed by simulated time
    pub sigma2: f64,
}

pub fn tavc_estimate(pairs: &[CyclePair], q_hat: f64) -> Result<Tavc> {
    let n = pairs.len();
    if n < 2 {
        return Err(Error::InvalidArgument("TAVC needs at least two cycles".into()));
    }
    let nf = n as f64;
    let vbar = pairwise_sum(&pairs.iter().map(|p| p.v).collect::<Vec<_>>()) / nf;
    let wbar = pairwise_sum(&pairs.iter().map(|p| p.w).collect::<Vec<_>>()) / nf;
    let cov = |f: &dyn Fn(&CyclePair) -> f64| pairwise_sum(&pairs.iter().map(f).collect::<Vec<_>>()) / (nf - 1.0);
    let s11 = cov(&|p| (p.v - vbar) * (p.v - vbar));
    let s12 = cov(&|p| (p.v - vbar) * (p.w - wbar));
    let s22 = cov(&|p| (p.w - wbar) * (p.w - wbar));
    let s2 = s11 - 2.0 * q_hat * s12 + q_hat * q_hat * s22;
    Ok(Tavc {
        s2,
        eta2: s2 / (wbar * wbar),
        sigma2: s2 / wbar,
    })
}

/// `q̂ ± z·√(σ̂²/t)` with `z` the `(1+level)/2` normal quantile.
pub fn confidence_interval(q_hat: f64, sigma2: f64, t: f64, level: f64) -> (f64, f64) {
    let hw = norm_quantile(0.5 * (1.0 + level)) * (sigma2.max(0.0) / t).sqrt();
    (q_hat - hw, q_hat + hw)
}

/// Fixed-cycle-count interval `q̂ ± z·√(η̃²/N)`.
pub fn confidence_interval_cycles(q_hat: f64, eta2: f64, n: usize, level: f64) -> (f64, f64) {
    confidence_interval(q_hat, eta2, n as f64, level)
}

/// Non-asymptotic bound on |E[q̂(t)] − q| for |h| ≤ K:
/// `√((16/3)·K²·μ₃·μ₂·(μ₂/t + μ)/μ³) / t^{3/2}`.
pub fn bias_bound(k: f64, mu: f64, mu2: f64, mu3: f64, t: f64) -> f64 {
    ((16.0 / 3.0) * k * k * mu3 * mu2 * (mu2 / t + mu) / mu.powi(3)).sqrt() / t.powf(1.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

/// Ratio estimate of one path with its variance constants and interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioEstimate {
    pub value: f64,
    pub n_cycles: usize,
    pub t: Option<f64>,
    /// σ̂² for time-indexed estimates, η̃² for cycle-indexed ones.
    pub tavc: f64,
    pub s2: f64,
    pub eta2: f64,
    pub sigma2: f64,
    pub ci: ConfidenceInterval,
    pub bias_bound: Option<f64>,
}

/// Fixed-time estimate from one path. `bound_moments` should come from an
/// independent run, never from the path itself.
pub fn estimate<H: Fn(&[f64]) -> f64>(
    path: &RegenPath,
    h: H,
    level: f64,
    bound: Option<(f64, &CycleMoments)>,
) -> Result<RatioEstimate> {
    let pairs = cycle_pairs(path, &h);
    let value = ratio_fixed_cycles(&pairs);
    let tv = tavc_estimate(&pairs, value)?;
    let t = path.threshold;
    let (lo, hi) = confidence_interval(value, tv.sigma2, t, level);
    Ok(RatioEstimate {
        value,
        n_cycles: pairs.len(),
        t: Some(t),
        tavc: tv.sigma2,
        s2: tv.s2,
        eta2: tv.eta2,
        sigma2: tv.sigma2,
        ci: ConfidenceInterval { lo, hi, level },
        bias_bound: bound.map(|(k, m)| bias_bound(k, m.mu, m.mu2, m.mu3, t)),
    })
}

/// One row of a bias sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BiasRow {
    pub t: f64,
    pub bias_fixed_time: f64,
    pub stderr_fixed_time: f64,
    pub bias_drop_last: f64,
    pub stderr_drop_last: f64,
    pub bound: f64,
    pub q: f64,
    pub pass: bool,
}

const SWEEP_TAG: u16 = 0xb1;

/// Mean bias of the fixed-time and drop-last estimators over `m` replicates.
///
/// Replicate `r` simulates one path to `max(t_grid)` on stream
/// `stream_id(tag, r)` and evaluates every `t` on its prefix, so all grid
/// points share random numbers. Each replicate's error is corrected by the
/// zero-mean control `(1/t)·Σ_{n≤N(t)} Wₙ(h(Xₙ) − q)` (zero mean by Wald's
/// identity, as N(t) is a stopping time), which removes the O(t^{-1/2})
/// fluctuation and leaves the bias measurable at moderate `m`.
#[allow(clippy::too_many_arguments)]
pub fn bias_sweep<T, P, H>(
    target: &T,
    prop: &P,
    h: H,
    k: f64,
    t_grid: &[f64],
    m: usize,
    seed: u64,
    q: f64,
    moments: &CycleMoments,
) -> Result<Vec<BiasRow>>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
    H: Fn(&[f64]) -> f64 + Sync,
{
    let t_max = t_grid.iter().cloned().fold(0.0, f64::max);
    let per_rep: Vec<Vec<(f64, f64)>> = (0..m as u64)
        .into_par_iter()
        .map(|r| {
            let mut s = RandomStream::new(seed, stream_id(SWEEP_TAG, r));
            let path = rrs_path(target, prop, t_max, &mut s)?;
            let hv: Vec<f64> = (0..path.len()).map(|i| h(path.point(i))).collect();
            Ok(t_grid
                .iter()
                .map(|&t| {
                    let n = path.count_at(t);
                    let mut v = CompensatedSum::new();
                    let mut w = CompensatedSum::new();
                    let mut z = CompensatedSum::new();
                    let mut v_last = 0.0;
                    let mut w_last = 0.0;
                    for i in 0..n {
                        let wi = path.weights[i];
                        v_last = hv[i] * wi;
                        w_last = wi;
                        v.add(v_last);
                        w.add(wi);
                        z.add(wi * (hv[i] - q));
                    }
                    let control = z.value() / t;
                    let fixed = v.value() / w.value() - q - control;
                    let drop = if n >= 2 {
                        (v.value() - v_last) / (w.value() - w_last) - q - control
                    } else {
                        f64::NAN
                    };
                    (fixed, drop)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(t_grid
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let fixed: Vec<f64> = per_rep.iter().map(|r| r[j].0).collect();
            let drop: Vec<f64> = per_rep.iter().map(|r| r[j].1).filter(|d| d.is_finite()).collect();
            let (bf, sf) = mean_se(&fixed);
            let (bd, sd) = mean_se(&drop);
            let bound = bias_bound(k, moments.mu, moments.mu2, moments.mu3, t);
            BiasRow {
                t,
                bias_fixed_time: bf,
                stderr_fixed_time: sf,
                bias_drop_last: bd,
                stderr_drop_last: sd,
                bound,
                q,
                pass: bf.abs() <= bound,
            }
        })
        .collect())
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    if xs.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    crate::stats::mean_stderr(xs)
}

/// Least-squares slope of `ln|y|` on `ln x` over the given points.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    linear_fit(&lx, &ly).0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McmcBiasRow {
    pub n: usize,
    pub bias: f64,
    pub stderr: f64,
}

const MCMC_TAG: u16 = 0xb2;

/// Bias of the ergodic average `(1/N)Σ_{n≤N} h(Xₙ)` of an independence
/// sampler started at `x0` (with `X₁ = x0`).
///
/// Each replicate runs the chain alongside a stationary copy started from an
/// exact rejection draw (envelope constant `c`); both use the same proposals
/// and uniforms, so they coalesce at the first common acceptance. Averaging
/// `h(Aₙ) − h(Bₙ)` estimates the bias without needing `q`.
#[allow(clippy::too_many_arguments)]
pub fn mcmc_bias_reference<T, P, H>(
    target: &T,
    prop: &P,
    c: f64,
    x0: &[f64],
    h: H,
    n_grid: &[usize],
    m: usize,
    seed: u64,
) -> Result<Vec<McmcBiasRow>>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
    H: Fn(&[f64]) -> f64 + Sync,
{
    let n_max = n_grid.iter().cloned().max().unwrap_or(0);
    let lw = |x: &[f64]| target.log_f(x) - prop.log_g(x);
    let per_rep: Vec<Vec<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|r| {
            let mut s = RandomStream::new(seed, stream_id(MCMC_TAG, r));
            let (b0, _) = rejection_sample(target, prop, c, &mut s)?;
            let mut a = x0.to_vec();
            let mut b = b0;
            let mut lwa = lw(&a);
            let mut lwb = lw(&b);
            let mut y = vec![0.0; prop.dim()];
            let mut diff = CompensatedSum::new();
            let mut out = Vec::with_capacity(n_grid.len());
            let mut coupled = a == b;
            for n in 1..=n_max {
                if n > 1 && !coupled {
                    prop.sample(&mut s, &mut y);
                    let lwy = lw(&y);
                    let lu = s.open01().ln();
                    if lwy >= lwa || lu < lwy - lwa {
                        a.copy_from_slice(&y);
                        lwa = lwy;
                    }
                    if lwy >= lwb || lu < lwy - lwb {
                        b.copy_from_slice(&y);
                        lwb = lwy;
                    }
                    coupled = a == b;
                }
                if !coupled {
                    diff.add(h(&a) - h(&b));
                }
                if n_grid.contains(&n) {
                    out.push(diff.value() / n as f64);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(n_grid
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let xs: Vec<f64> = per_rep.iter().map(|r| r[j]).collect();
            let (bias, stderr) = mean_se(&xs);
            McmcBiasRow { n, bias, stderr }
        })
        .collect())
}
