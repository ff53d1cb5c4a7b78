//! Rejection sampling, regenerative rejection sampling (RRS) and the MCMC
//! baselines, with cycle-length diagnostics.
//!
//! RRS draws `X ~ g` and accumulates the likelihood ratios `W = f∝(X)/g(X)`;
//! the draws are the cycles of a zero-delayed regenerative process whose
//! limiting law is `f`. The draw whose cycle covers time `t` is the output.

use rayon::prelude::*;

use crate::dists::{Proposal, Target, DEFAULT_TRIAL_CAP};
use crate::error::{Error, Result};
use crate::rng::{stream_id, RandomStream};
use crate::stats::{pairwise_sum, CompensatedSum};

/// Draw from `f` by classical rejection with envelope `C·g`.
/// Returns the point and the number of proposal draws.
pub fn rejection_sample<T, P>(target: &T, prop: &P, c: f64, stream: &mut RandomStream) -> Result<(Vec<f64>, u64)>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    let (x, trials, _) = rejection_sample_with_height(target, prop, c, stream)?;
    Ok((x, trials))
}

/// As [`rejection_sample`], also returning the height `U·C·g(Y)` of the
/// accepted point under the envelope.
pub fn rejection_sample_with_height<T, P>(
    target: &T,
    prop: &P,
    c: f64,
    stream: &mut RandomStream,
) -> Result<(Vec<f64>, u64, f64)>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    let mut y = vec![0.0; prop.dim()];
    for trial in 1..=DEFAULT_TRIAL_CAP {
        prop.sample(stream, &mut y);
        let lg = prop.log_g(&y);
        let w = (target.log_f(&y) - lg).exp();
        if w > c {
            return Err(Error::RatioExceedsBound { observed: w, bound: c });
        }
        let u = stream.open01();
        if u * c <= w {
            return Ok((y, trial, u * c * lg.exp()));
        }
    }
    Err(Error::TrialBudgetExceeded { cap: DEFAULT_TRIAL_CAP })
}

/// Output of one memory-efficient RRS run.
#[derive(Clone, Debug, PartialEq)]
pub struct RrsDraw {
    pub point: Vec<f64>,
    /// N(t)
    pub n_draws: u64,
    /// T_{N(t)}
    pub total_weight: f64,
}

/// Draw until the accumulated weight exceeds `t` and return the last draw.
pub fn rrs_terminal<T, P>(target: &T, prop: &P, t: f64, stream: &mut RandomStream) -> Result<RrsDraw>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    check_threshold(t)?;
    let mut x = vec![0.0; prop.dim()];
    let mut sum = CompensatedSum::new();
    let mut n = 0u64;
    loop {
        prop.sample(stream, &mut x);
        let w = cycle_weight(target, prop, &x)?;
        sum.add(w);
        n += 1;
        if sum.value() > t {
            return Ok(RrsDraw {
                point: x,
                n_draws: n,
                total_weight: sum.value(),
            });
        }
    }
}

/// Law of the RRS output for the Gamma(2,1) target with Exp(1) proposal,
/// where the weight is the draw itself: `P(Y ≤ y)` at threshold `t`.
pub fn gamma_exp_rrs_cdf(t: f64, y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else if y <= t {
        1.0 - (1.0 + y) * (-y).exp()
    } else {
        1.0 - (1.0 + t) * (-y).exp()
    }
}

/// Cycle length `f∝(x)/g(x)`. A draw where the target vanishes is an error;
/// a ratio that is positive but underflows is kept at the smallest normal
/// double so that the partial sums stay strictly increasing.
#[inline]
pub fn cycle_weight<T, P>(target: &T, prop: &P, x: &[f64]) -> Result<f64>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    let lf = target.log_f(x);
    if lf == f64::NEG_INFINITY {
        return Err(Error::ZeroWeight);
    }
    Ok((lf - prop.log_g(x)).exp().max(f64::MIN_POSITIVE))
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("threshold must be positive and finite, got {t}")))
    }
}

/// The full regenerative path of one RRS run.
#[derive(Clone, Debug, PartialEq)]
pub struct RegenPath {
    pub dim: usize,
    /// Row-major draws, `dim` values per draw.
    pub draws: Vec<f64>,
    pub weights: Vec<f64>,
    pub partials: Vec<f64>,
    pub threshold: f64,
    /// N(t): number of draws up to and including the one covering `t`.
    pub stop_index: usize,
}

impl RegenPath {
    pub fn point(&self, i: usize) -> &[f64] {
        &self.draws[i * self.dim..(i + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// N(s) for any `s ≤ threshold`.
    pub fn count_at(&self, s: f64) -> usize {
        self.partials.partition_point(|&p| p <= s) + 1
    }
}

/// RRS keeping every `(Xₙ, Wₙ)`.
pub fn rrs_path<T, P>(target: &T, prop: &P, t: f64, stream: &mut RandomStream) -> Result<RegenPath>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    check_threshold(t)?;
    let dim = prop.dim();
    let mut x = vec![0.0; dim];
    let mut draws = Vec::new();
    let mut weights = Vec::new();
    let mut partials = Vec::new();
    let mut sum = CompensatedSum::new();
    loop {
        prop.sample(stream, &mut x);
        let w = cycle_weight(target, prop, &x)?;
        sum.add(w);
        draws.extend_from_slice(&x);
        weights.push(w);
        partials.push(sum.value());
        if sum.value() > t {
            let stop_index = weights.len();
            return Ok(RegenPath {
                dim,
                draws,
                weights,
                partials,
                threshold: t,
                stop_index,
            });
        }
    }
}

/// Output of the sub-sampled variant.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsampledRun {
    pub dim: usize,
    /// Row-major, `n` points.
    pub points: Vec<f64>,
    pub proposal_draws: u64,
}

impl SubsampledRun {
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

/// One long RRS run emitting, for `i = 1..=n`, the draw at which the running
/// sum first exceeds `i·t`. A draw that crosses several thresholds is emitted
/// once per threshold.
pub fn rrs_subsampled<T, P>(target: &T, prop: &P, t: f64, n: usize, stream: &mut RandomStream) -> Result<SubsampledRun>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    check_threshold(t)?;
    let dim = prop.dim();
    let mut x = vec![0.0; dim];
    let mut points = Vec::with_capacity(n * dim);
    let mut sum = CompensatedSum::new();
    let mut draws = 0u64;
    let mut next = 1usize;
    while next <= n {
        prop.sample(stream, &mut x);
        let w = cycle_weight(target, prop, &x)?;
        sum.add(w);
        draws += 1;
        while next <= n && sum.value() > next as f64 * t {
            points.extend_from_slice(&x);
            next += 1;
        }
    }
    Ok(SubsampledRun {
        dim,
        points,
        proposal_draws: draws,
    })
}

/// States of an MCMC chain, one per step.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainTrace {
    pub dim: usize,
    /// Row-major, one state per step.
    pub states: Vec<f64>,
    pub accepts: Vec<bool>,
    pub acceptance_rate: f64,
}

impl ChainTrace {
    pub fn from_parts(dim: usize, states: Vec<f64>, accepts: Vec<bool>) -> Self {
        let acceptance_rate = if accepts.is_empty() {
            0.0
        } else {
            accepts.iter().filter(|&&a| a).count() as f64 / accepts.len() as f64
        };
        Self {
            dim,
            states,
            accepts,
            acceptance_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.accepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepts.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    /// One coordinate as a series, skipping the first `burnin` steps.
    pub fn component(&self, j: usize, burnin: usize) -> Vec<f64> {
        (burnin..self.len()).map(|i| self.states[i * self.dim + j]).collect()
    }
}

fn check_start<T: Target + ?Sized>(target: &T, x0: &[f64]) -> Result<f64> {
    let lf = target.log_f(x0);
    if lf.is_finite() {
        Ok(lf)
    } else {
        Err(Error::InvalidArgument("starting point has zero target density".into()))
    }
}

/// Independence sampler: proposals from `g` regardless of the state,
/// accepted with probability `min{1, w(y)/w(x)}`.
pub fn imh_chain<T, P>(target: &T, prop: &P, n_steps: usize, x0: &[f64], stream: &mut RandomStream) -> Result<ChainTrace>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    check_start(target, x0)?;
    let dim = prop.dim();
    let mut x = x0.to_vec();
    let mut lw_x = target.log_f(&x) - prop.log_g(&x);
    let mut y = vec![0.0; dim];
    let mut states = Vec::with_capacity(n_steps * dim);
    let mut accepts = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        prop.sample(stream, &mut y);
        let lw_y = target.log_f(&y) - prop.log_g(&y);
        let u = stream.open01();
        let acc = lw_y >= lw_x || u.ln() < lw_y - lw_x;
        if acc {
            x.copy_from_slice(&y);
            lw_x = lw_y;
        }
        states.extend_from_slice(&x);
        accepts.push(acc);
    }
    Ok(ChainTrace::from_parts(dim, states, accepts))
}

/// Random-walk Metropolis with symmetric increments drawn from `step`.
pub fn rwm_chain<T, P>(target: &T, step: &P, n_steps: usize, x0: &[f64], stream: &mut RandomStream) -> Result<ChainTrace>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    let mut lf_x = check_start(target, x0)?;
    let dim = target.dim();
    let mut x = x0.to_vec();
    let mut inc = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    let mut states = Vec::with_capacity(n_steps * dim);
    let mut accepts = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        step.sample(stream, &mut inc);
        for j in 0..dim {
            y[j] = x[j] + inc[j];
        }
        let lf_y = target.log_f(&y);
        let u = stream.open01();
        let acc = lf_y.is_finite() && (lf_y >= lf_x || u.ln() < lf_y - lf_x);
        if acc {
            x.copy_from_slice(&y);
            lf_x = lf_y;
        }
        states.extend_from_slice(&x);
        accepts.push(acc);
    }
    Ok(ChainTrace::from_parts(dim, states, accepts))
}

/// Sample autocorrelations `ρ̂(0..=max_lag)` with the divide-by-n
/// covariance.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if max_lag >= n / 4 {
        return Err(Error::InvalidArgument(format!(
            "max_lag {max_lag} must be below a quarter of the series length {n}"
        )));
    }
    let m = crate::stats::mean(series);
    let dev: Vec<f64> = series.iter().map(|x| x - m).collect();
    let c0: f64 = pairwise_sum(&dev.iter().map(|d| d * d).collect::<Vec<_>>());
    if !(c0 > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok((0..=max_lag)
        .map(|k| {
            let ck: Vec<f64> = (0..n - k).map(|i| dev[i] * dev[i + k]).collect();
            pairwise_sum(&ck) / c0
        })
        .collect())
}

/// Plug-in estimates of the first three moments of the cycle length.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleMoments {
    pub mu: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub n_samples: usize,
    /// Standard errors of `mu`, `mu2`, `mu3`.
    pub stderr: [f64; 3],
    /// Raw cycle lengths, in stream order.
    pub weights: Vec<f64>,
}

const MOMENT_CHUNK: usize = 4096;
const MOMENT_TAG: u16 = 0x3a;

/// Draw `m` i.i.d. cycle lengths `W = f∝(X)/g(X)`, `X ~ g`. Chunk `c` of
/// 4096 draws uses stream `(seed, stream_id(tag, c))`, so the sample does not
/// depend on the number of worker threads.
pub fn cycle_moments<T, P>(target: &T, prop: &P, m: usize, seed: u64) -> Result<CycleMoments>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    let chunks = m.div_ceil(MOMENT_CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut s = RandomStream::new(seed, stream_id(MOMENT_TAG, c as u64));
            let len = MOMENT_CHUNK.min(m - c * MOMENT_CHUNK);
            let mut x = vec![0.0; prop.dim()];
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                prop.sample(&mut s, &mut x);
                let w = cycle_weight(target, prop, &x)?;
                out.push(w);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(moments_of(parts.concat()))
}

/// Moments and standard errors of a given sample of cycle lengths.
pub fn moments_of(weights: Vec<f64>) -> CycleMoments {
    let n = weights.len();
    let pow = |k: i32| -> Vec<f64> { weights.iter().map(|w| w.powi(k)).collect() };
    let est = |k: i32| {
        let v = pow(k);
        let m = pairwise_sum(&v) / n as f64;
        let se = if n > 1 {
            let dev: Vec<f64> = v.iter().map(|x| (x - m) * (x - m)).collect();
            (pairwise_sum(&dev) / (n as f64 - 1.0) / n as f64).sqrt()
        } else {
            0.0
        };
        (m, se)
    };
    let (mu, s1) = est(1);
    let (mu2, s2) = est(2);
    let (mu3, s3) = est(3);
    CycleMoments {
        mu,
        mu2,
        mu3,
        n_samples: n,
        stderr: [s1, s2, s3],
        weights,
    }
}

/// Across-batch stability of the third-moment estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentStability {
    /// Coefficient of variation of the per-batch estimates of E[W³].
    pub batch_cv: f64,
    pub stable: bool,
}

/// Heuristic flag for whether E[W³] looks finite: split the sample into
/// `batches` equal batches and compare their third-moment estimates.
pub fn moment_stability(weights: &[f64], batches: usize) -> MomentStability {
    let size = weights.len() / batches;
    let est: Vec<f64> = (0..batches)
        .map(|b| {
            let v: Vec<f64> = weights[b * size..(b + 1) * size].iter().map(|w| w.powi(3)).collect();
            pairwise_sum(&v) / size as f64
        })
        .collect();
    let m = crate::stats::mean(&est);
    let cv = crate::stats::variance(&est).sqrt() / m;
    MomentStability {
        batch_cv: cv,
        stable: cv < 0.25,
    }
}

/// Per-sample threshold for the sub-sampled RRS: spend on average the cycle
/// budget of `n_target + burnin` samples across `n_sub` outputs.
pub fn threshold_select(n_target: usize, burnin: usize, n_sub: usize, mu_w: f64) -> f64 {
    (n_target + burnin) as f64 / n_sub as f64 * mu_w
}
