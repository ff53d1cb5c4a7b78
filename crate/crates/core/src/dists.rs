//! Targets, proposals and the small set of primitive draws the samplers need.
//!
//! Everything is evaluated in log space. A [`Target`] exposes only an
//! unnormalized log-density; a [`Proposal`] exposes a sampler together with
//! its exact normalized log-density, so the likelihood ratio
//! `w = exp(log_f - log_g)` is well defined.

use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Default cap on proposal draws for [`truncated_sample`].
pub const DEFAULT_TRIAL_CAP: u64 = 1_000_000;

/// Axis-aligned box, one `(lo, hi)` pair per coordinate. Infinite bounds are
/// allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct Support {
    pub bounds: Vec<(f64, f64)>,
}

impl Support {
    pub fn unbounded(dim: usize) -> Self {
        Self {
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); dim],
        }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self {
            bounds: vec![(lo, hi); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        self.bounds
            .iter()
            .zip(x)
            .all(|(&(lo, hi), &v)| v >= lo && v <= hi)
    }
}

/// Unnormalized target density `f∝`.
pub trait Target: Sync {
    fn dim(&self) -> usize;
    fn support(&self) -> Support;
    /// `ln f∝(x)`, `-inf` outside the support.
    fn log_f(&self, x: &[f64]) -> f64;
}

/// Proposal law with an exact normalized log-density.
pub trait Proposal: Sync {
    fn dim(&self) -> usize;
    fn sample(&self, stream: &mut RandomStream, out: &mut [f64]);
    fn log_g(&self, x: &[f64]) -> f64;
}

/// Proposals whose mass in a box is available in closed form.
pub trait BoxMass {
    fn box_mass(&self, support: &Support) -> f64;
}

impl<T: Target + ?Sized> Target for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn support(&self) -> Support {
        (**self).support()
    }
    fn log_f(&self, x: &[f64]) -> f64 {
        (**self).log_f(x)
    }
}

impl<P: Proposal + ?Sized> Proposal for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample(&self, stream: &mut RandomStream, out: &mut [f64]) {
        (**self).sample(stream, out)
    }
    fn log_g(&self, x: &[f64]) -> f64 {
        (**self).log_g(x)
    }
}

/// Likelihood ratio `f∝(x)/g(x)`, computed once in log space.
#[inline]
pub fn weight<T: Target + ?Sized, P: Proposal + ?Sized>(target: &T, prop: &P, x: &[f64]) -> f64 {
    (target.log_f(x) - prop.log_g(x)).exp()
}

/// Exponential draw with the given rate.
#[inline]
pub fn exp_draw(stream: &mut RandomStream, rate: f64) -> f64 {
    -stream.open01().ln() / rate
}

#[inline]
pub fn std_normal(stream: &mut RandomStream) -> f64 {
    StandardNormal.sample(stream)
}

/// Symmetric Laplace draw `scale·sign(U)·ln(1−2|U|)`, `U ~ Unif(−½, ½)`.
#[inline]
pub fn laplace_draw(stream: &mut RandomStream, scale: f64) -> f64 {
    loop {
        let u = stream.open01() - 0.5;
        if u.abs() < 0.5 {
            return laplace_from_uniform(u, scale);
        }
    }
}

#[inline]
pub fn laplace_from_uniform(u: f64, scale: f64) -> f64 {
    let v = scale * (-2.0 * u.abs()).ln_1p();
    if u < 0.0 {
        -v
    } else {
        v
    }
}

/// Draw from `prop` conditioned on `support` by plain resampling. Returns the
/// point and the number of proposal draws consumed.
pub fn truncated_sample<P: Proposal + ?Sized>(
    prop: &P,
    support: &Support,
    stream: &mut RandomStream,
    cap: u64,
) -> Result<(Vec<f64>, u64)> {
    let mut x = vec![0.0; prop.dim()];
    let trials = truncated_sample_into(prop, support, stream, cap, &mut x)?;
    Ok((x, trials))
}

pub fn truncated_sample_into<P: Proposal + ?Sized>(
    prop: &P,
    support: &Support,
    stream: &mut RandomStream,
    cap: u64,
    out: &mut [f64],
) -> Result<u64> {
    for trial in 1..=cap {
        prop.sample(stream, out);
        if support.contains(out) {
            return Ok(trial);
        }
    }
    Err(Error::TrialBudgetExceeded { cap })
}

/// `N(mean, 1)` conditioned on `(0, ∞)`.
///
/// Plain resampling when the truncation point sits no more than two standard
/// deviations above the mean; otherwise exponential-tilted rejection with the
/// optimal rate for the left truncation point.
pub fn truncated_normal_lower(mean: f64, stream: &mut RandomStream) -> f64 {
    if mean >= -2.0 {
        loop {
            let z = mean + std_normal(stream);
            if z > 0.0 {
                return z;
            }
        }
    }
    let a = -mean;
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let z = a + exp_draw(stream, lambda);
        let d = z - lambda;
        if stream.open01().ln() <= -0.5 * d * d {
            return mean + z;
        }
    }
}

/// Gamma(shape, rate) target, normalized unless a log scale is added.
#[derive(Clone, Debug)]
pub struct GammaTarget {
    pub shape: f64,
    pub rate: f64,
    log_norm: f64,
}

impl GammaTarget {
    pub fn new(shape: f64, rate: f64) -> Self {
        let log_norm = shape * rate.ln() - crate::special::ln_gamma(shape);
        Self {
            shape,
            rate,
            log_norm,
        }
    }

    /// Multiply the density by `exp(c)`.
    pub fn with_log_scale(mut self, c: f64) -> Self {
        self.log_norm += c;
        self
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - crate::special::gamma_q(self.shape, self.rate * x)
        }
    }
}

impl Target for GammaTarget {
    fn dim(&self) -> usize {
        1
    }

    fn support(&self) -> Support {
        Support {
            bounds: vec![(0.0, f64::INFINITY)],
        }
    }

    #[inline]
    fn log_f(&self, x: &[f64]) -> f64 {
        let x = x[0];
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.log_norm + (self.shape - 1.0) * x.ln() - self.rate * x
    }
}

/// Exp(rate) proposal on (0, ∞).
#[derive(Clone, Copy, Debug)]
pub struct ExpProposal {
    pub rate: f64,
}

impl ExpProposal {
    pub fn new(rate: f64) -> Self {
        Self { rate }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-self.rate * x).exp_m1()
        }
    }
}

impl Proposal for ExpProposal {
    fn dim(&self) -> usize {
        1
    }

    #[inline]
    fn sample(&self, stream: &mut RandomStream, out: &mut [f64]) {
        out[0] = exp_draw(stream, self.rate);
    }

    #[inline]
    fn log_g(&self, x: &[f64]) -> f64 {
        if x[0] < 0.0 {
            f64::NEG_INFINITY
        } else {
            self.rate.ln() - self.rate * x[0]
        }
    }
}

impl BoxMass for ExpProposal {
    fn box_mass(&self, support: &Support) -> f64 {
        let (lo, hi) = support.bounds[0];
        self.cdf(hi) - self.cdf(lo)
    }
}

/// Exp(rate) viewed as a target, so that `target = proposal` pairings can be
/// expressed directly.
impl Target for ExpProposal {
    fn dim(&self) -> usize {
        1
    }

    fn support(&self) -> Support {
        Support {
            bounds: vec![(0.0, f64::INFINITY)],
        }
    }

    fn log_f(&self, x: &[f64]) -> f64 {
        self.log_g(x)
    }
}

/// Product of i.i.d. symmetric Laplace(0, scale) coordinates.
#[derive(Clone, Copy, Debug)]
pub struct LaplaceProduct {
    pub dim: usize,
    pub scale: f64,
}

impl LaplaceProduct {
    pub fn new(dim: usize, scale: f64) -> Self {
        Self { dim, scale }
    }

    pub fn cdf1(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.5 * (x / self.scale).exp()
        } else {
            1.0 - 0.5 * (-x / self.scale).exp()
        }
    }
}

impl Proposal for LaplaceProduct {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn sample(&self, stream: &mut RandomStream, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = laplace_draw(stream, self.scale);
        }
    }

    #[inline]
    fn log_g(&self, x: &[f64]) -> f64 {
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        -l1 / self.scale - self.dim as f64 * (2.0 * self.scale).ln()
    }
}

impl BoxMass for LaplaceProduct {
    fn box_mass(&self, support: &Support) -> f64 {
        support
            .bounds
            .iter()
            .map(|&(lo, hi)| self.cdf1(hi) - self.cdf1(lo))
            .product()
    }
}

/// A proposal conditioned on a box. Sampling resamples the inner proposal;
/// the log-density is renormalized by the exact box mass.
#[derive(Clone, Debug)]
pub struct Truncated<P> {
    pub inner: P,
    pub support: Support,
    pub cap: u64,
    log_mass: f64,
}

impl<P: Proposal + BoxMass> Truncated<P> {
    pub fn new(inner: P, support: Support) -> Self {
        let log_mass = inner.box_mass(&support).ln();
        Self {
            inner,
            support,
            cap: DEFAULT_TRIAL_CAP,
            log_mass,
        }
    }

    pub fn mass(&self) -> f64 {
        self.log_mass.exp()
    }
}

impl<P: Proposal + BoxMass> Proposal for Truncated<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn sample(&self, stream: &mut RandomStream, out: &mut [f64]) {
        // The box always has positive mass here, so the cap is a formality;
        // callers that need the trial count use `truncated_sample` directly.
        truncated_sample_into(&self.inner, &self.support, stream, self.cap, out)
            .expect("truncation box has negligible proposal mass");
    }

    fn log_g(&self, x: &[f64]) -> f64 {
        if self.support.contains(x) {
            self.inner.log_g(x) - self.log_mass
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Radially modulated 2-D target `exp(−r/4)·(sin 2r + 1)`.
#[derive(Clone, Debug)]
pub struct SyntheticTarget {
    support: Support,
}

impl SyntheticTarget {
    pub fn new(bounded: bool) -> Self {
        let support = if bounded {
            Support::cube(2, -2.0 * PI, 2.0 * PI)
        } else {
            Support::unbounded(2)
        };
        Self { support }
    }

    pub fn density(x1: f64, x2: f64) -> f64 {
        let r = x1.hypot(x2);
        (-0.25 * r).exp() * ((2.0 * r).sin() + 1.0)
    }
}

pub fn synthetic_target(bounded: bool) -> SyntheticTarget {
    SyntheticTarget::new(bounded)
}

impl Target for SyntheticTarget {
    fn dim(&self) -> usize {
        2
    }

    fn support(&self) -> Support {
        self.support.clone()
    }

    #[inline]
    fn log_f(&self, x: &[f64]) -> f64 {
        if !self.support.contains(x) {
            return f64::NEG_INFINITY;
        }
        Self::density(x[0], x[1]).ln()
    }
}

/// Unnormalized density `exp(log_f)` on the positive half line, given as a
/// closure. Used for quick one-off targets in experiments and tests.
pub struct FnTarget<F> {
    pub support: Support,
    pub log_f: F,
}

impl<F: Fn(f64) -> f64 + Sync> Target for FnTarget<F> {
    fn dim(&self) -> usize {
        1
    }

    fn support(&self) -> Support {
        self.support.clone()
    }

    fn log_f(&self, x: &[f64]) -> f64 {
        if self.support.contains(x) {
            (self.log_f)(x[0])
        } else {
            f64::NEG_INFINITY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, integrate_2d, integrate_to_inf};
    use crate::stats::{ks_statistic, mean, variance};

    fn draws<F: FnMut(&mut RandomStream) -> f64>(n: usize, seed: u64, mut f: F) -> Vec<f64> {
        let mut s = RandomStream::new(seed, 0);
        (0..n).map(|_| f(&mut s)).collect()
    }

    #[test]
    fn laplace_center_maps_to_zero() {
        assert_eq!(laplace_from_uniform(0.0, 4.0), 0.0);
    }

    #[test]
    fn laplace_abs_mean_and_variance() {
        let xs = draws(1_000_000, 1, |s| laplace_draw(s, 4.0));
        let abs: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
        let oracle_abs = 2.0 * integrate_to_inf(|x| x * (-x / 4.0).exp() / 8.0, 0.0, 1e-13, 1e-12);
        assert!((mean(&abs) - oracle_abs).abs() < 0.02);
        assert!((variance(&xs) - 32.0).abs() < 0.5);
    }

    #[test]
    fn builtin_proposals_integrate_to_one() {
        let e = ExpProposal::new(0.4);
        let m = integrate_to_inf(|x| e.log_g(&[x]).exp(), 0.0, 1e-14, 1e-12);
        assert!((m - 1.0).abs() < 1e-6);
        let l = LaplaceProduct::new(2, 4.0);
        let m = integrate_2d(
            |x, y| l.log_g(&[x, y]).exp(),
            (-400.0, 400.0),
            (-400.0, 400.0),
            1e-10,
        );
        assert!((m - 1.0).abs() < 1e-6);
        let tl = Truncated::new(l, Support::cube(2, -2.0 * PI, 2.0 * PI));
        let m = integrate_2d(
            |x, y| tl.log_g(&[x, y]).exp(),
            (-2.0 * PI, 2.0 * PI),
            (-2.0 * PI, 2.0 * PI),
            1e-10,
        );
        assert!((m - 1.0).abs() < 1e-6);
    }

    #[test]
    fn truncated_laplace_acceptance_rate() {
        let prop = LaplaceProduct::new(2, 4.0);
        let bx = Support::cube(2, -2.0 * PI, 2.0 * PI);
        let mut s = RandomStream::new(2, 0);
        let n = 100_000;
        let trials: u64 = (0..n)
            .map(|_| truncated_sample(&prop, &bx, &mut s, DEFAULT_TRIAL_CAP).unwrap().1)
            .sum();
        let rate = n as f64 / trials as f64;
        let expected = (1.0 - (-PI / 2.0).exp()).powi(2);
        assert!((expected - 0.63).abs() < 0.005);
        assert!((rate - expected).abs() < 0.01, "rate {rate}");
        assert!((prop.box_mass(&bx) - expected).abs() < 1e-14);
    }

    #[test]
    fn full_support_uses_one_trial() {
        let prop = ExpProposal::new(1.0);
        let mut s = RandomStream::new(3, 0);
        for _ in 0..1000 {
            let (_, t) = truncated_sample(&prop, &Support::unbounded(1), &mut s, 10).unwrap();
            assert_eq!(t, 1);
        }
    }

    #[test]
    fn truncated_exp_is_memoryless() {
        let prop = ExpProposal::new(1.0);
        let bx = Support {
            bounds: vec![(1.0, f64::INFINITY)],
        };
        let mut s = RandomStream::new(4, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| truncated_sample(&prop, &bx, &mut s, DEFAULT_TRIAL_CAP).unwrap().0[0])
            .collect();
        assert!((mean(&xs) - 2.0).abs() < 0.02);
        let d = ks_statistic(&xs, |x| 1.0 - (-(x - 1.0)).exp());
        assert!(d <= 0.01, "ks {d}");
    }

    #[test]
    fn truncated_laplace_1d_ks() {
        let prop = LaplaceProduct::new(1, 4.0);
        let c = 2.0 * PI;
        let bx = Support::cube(1, -c, c);
        let mut s = RandomStream::new(5, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| truncated_sample(&prop, &bx, &mut s, DEFAULT_TRIAL_CAP).unwrap().0[0])
            .collect();
        let lo = prop.cdf1(-c);
        let mass = prop.cdf1(c) - lo;
        let d = ks_statistic(&xs, |x| (prop.cdf1(x) - lo) / mass);
        assert!(d <= 0.01, "ks {d}");
    }

    #[test]
    fn exhausted_budget_is_an_error() {
        let prop = ExpProposal::new(1.0);
        let bx = Support {
            bounds: vec![(1e6, f64::INFINITY)],
        };
        let mut s = RandomStream::new(6, 0);
        assert_eq!(
            truncated_sample(&prop, &bx, &mut s, 100).unwrap_err(),
            Error::TrialBudgetExceeded { cap: 100 }
        );
    }

    fn truncated_normal_mean_oracle(m: f64) -> f64 {
        // scaled so the integrand is O(1) near the truncation point
        let dens = |z: f64| (-(z * z) / 2.0 + m * z - if m > 0.0 { m * m / 2.0 } else { 0.0 }).exp();
        let lo = 0.0f64.max(m - 40.0);
        let z = integrate(dens, lo, m.max(0.0) + 40.0, 1e-15, 1e-13);
        integrate(|x| x * dens(x), lo, m.max(0.0) + 40.0, 1e-15, 1e-13) / z
    }

    #[test]
    fn truncated_normal_means() {
        let oracle0 = truncated_normal_mean_oracle(0.0);
        assert!((oracle0 - (2.0 / PI).sqrt()).abs() < 1e-10);
        let xs = draws(1_000_000, 7, |s| truncated_normal_lower(0.0, s));
        assert!(xs.iter().all(|&x| x > 0.0));
        assert!((mean(&xs) - oracle0).abs() < 0.002);
        let xs = draws(100_000, 8, |s| truncated_normal_lower(10.0, s));
        assert!((mean(&xs) - truncated_normal_mean_oracle(10.0)).abs() < 0.01);
    }

    #[test]
    fn deep_tail_truncated_normal() {
        for &m in &[-3.0, -6.0, -12.0] {
            let xs = draws(200_000, 9, |s| truncated_normal_lower(m, s));
            assert!(xs.iter().all(|&x| x > 0.0));
            let oracle = truncated_normal_mean_oracle(m);
            let sd = variance(&xs).sqrt() / (xs.len() as f64).sqrt();
            assert!((mean(&xs) - oracle).abs() < 4.0 * sd, "m {m}");
        }
    }

    #[test]
    fn synthetic_target_values() {
        let t = synthetic_target(true);
        assert_eq!(t.log_f(&[0.0, 0.0]), 0.0);
        assert_eq!(t.log_f(&[7.0, 0.0]), f64::NEG_INFINITY);
        let u = synthetic_target(false);
        assert!(u.log_f(&[7.0, 0.0]).is_finite());
        let c = 2.0 * PI;
        let m = integrate_2d(SyntheticTarget::density, (-c, c), (-c, c), 1e-10);
        assert!((m / 51.74 - 1.0).abs() < 1e-3, "mass {m}");
    }

    #[test]
    fn gamma_target_is_normalized() {
        let g = GammaTarget::new(2.0, 1.0);
        let m = integrate_to_inf(|x| g.log_f(&[x]).exp(), 0.0, 1e-14, 1e-12);
        assert!((m - 1.0).abs() < 1e-10);
        assert!((g.cdf(2.0) - (1.0 - 3.0 * (-2.0f64).exp())).abs() < 1e-12);
    }
}
