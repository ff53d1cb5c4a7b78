//! Renewal processes: trace simulation, recurrence times, stationary laws,
//! a discretized renewal-equation solver and closed-form oracles for the
//! Poisson and Gamma(2, λ) cases.
//!
//! Counting follows the convention `N(t) = inf{n : Tₙ > t}` with the epoch at
//! zero counted, so a Poisson process has `U(t) = E[N(t)] = 1 + λt`.

use std::f64::consts::E;

use crate::dists::exp_draw;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_to_inf};
use crate::rng::RandomStream;
use crate::special::ln_gamma;

/// Interarrival laws with closed-form recurrence oracles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Interarrival {
    Exp { rate: f64 },
    Gamma2 { rate: f64 },
    Constant(f64),
}

impl Interarrival {
    #[inline]
    pub fn draw(&self, stream: &mut RandomStream) -> f64 {
        match *self {
            Interarrival::Exp { rate } => exp_draw(stream, rate),
            Interarrival::Gamma2 { rate } => exp_draw(stream, rate) + exp_draw(stream, rate),
            Interarrival::Constant(c) => c,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Interarrival::Exp { rate } => 1.0 / rate,
            Interarrival::Gamma2 { rate } => 2.0 / rate,
            Interarrival::Constant(c) => c,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Interarrival::Exp { rate } => 1.0 / (rate * rate),
            Interarrival::Gamma2 { rate } => 2.0 / (rate * rate),
            Interarrival::Constant(_) => 0.0,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            Interarrival::Exp { rate } => -(-rate * x).exp_m1(),
            Interarrival::Gamma2 { rate } => 1.0 - (-rate * x).exp() * (1.0 + rate * x),
            Interarrival::Constant(c) => {
                if x >= c {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Density; `None` for the lattice law.
    pub fn density(&self, x: f64) -> Option<f64> {
        if x < 0.0 {
            return Some(0.0);
        }
        match *self {
            Interarrival::Exp { rate } => Some(rate * (-rate * x).exp()),
            Interarrival::Gamma2 { rate } => Some(rate * rate * x * (-rate * x).exp()),
            Interarrival::Constant(_) => None,
        }
    }
}

/// Renewal epochs up to and including the first one past the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct RenewalTrace {
    pub delay: f64,
    pub epochs: Vec<f64>,
    pub horizon: f64,
}

/// Counting and recurrence processes at one query time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenewalState {
    pub t: f64,
    /// N(t)
    pub n: usize,
    /// E(t), age
    pub elapsed: f64,
    /// R(t), residual life
    pub residual: f64,
    /// C(t) = E(t) + R(t)
    pub current: f64,
}

/// Simulate a renewal process until the first epoch strictly past `horizon`.
pub fn simulate_renewal<I, D>(
    mut interarrival: I,
    delay: D,
    horizon: f64,
    stream: &mut RandomStream,
) -> Result<RenewalTrace>
where
    I: FnMut(&mut RandomStream) -> f64,
    D: FnOnce(&mut RandomStream) -> f64,
{
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let d = delay(stream);
    if d < 0.0 {
        return Err(Error::InvalidArgument(format!("negative delay {d}")));
    }
    let mut epochs = vec![d];
    let mut t = d;
    while t <= horizon {
        let x = interarrival(stream);
        if !(x > 0.0) {
            return Err(Error::NonpositiveInterarrival(x));
        }
        t += x;
        epochs.push(t);
    }
    Ok(RenewalTrace {
        delay: d,
        epochs,
        horizon,
    })
}

/// Zero delay, for use with [`simulate_renewal`].
pub fn zero_delay(_: &mut RandomStream) -> f64 {
    0.0
}

impl RenewalTrace {
    pub fn state_at(&self, t: f64) -> Result<RenewalState> {
        state_at(self, t)
    }
}

/// N(t), E(t), R(t), C(t) for a trace.
pub fn state_at(trace: &RenewalTrace, t: f64) -> Result<RenewalState> {
    if t > trace.horizon {
        return Err(Error::QueryPastHorizon {
            t,
            horizon: trace.horizon,
        });
    }
    let n = trace.epochs.partition_point(|&e| e <= t);
    let next = trace.epochs[n];
    let prev = if n == 0 { 0.0 } else { trace.epochs[n - 1] };
    Ok(RenewalState {
        t,
        n,
        elapsed: t - prev,
        residual: next - t,
        current: next - prev,
    })
}

/// Residual-life state at a single time without keeping the epochs. Same
/// result as `state_at(simulate_renewal(..), t)` for the same stream.
pub fn state_only<I, D>(
    mut interarrival: I,
    delay: D,
    t: f64,
    stream: &mut RandomStream,
) -> Result<RenewalState>
where
    I: FnMut(&mut RandomStream) -> f64,
    D: FnOnce(&mut RandomStream) -> f64,
{
    let mut prev = 0.0;
    let mut next = delay(stream);
    let mut n = 0usize;
    while next <= t {
        let x = interarrival(stream);
        if !(x > 0.0) {
            return Err(Error::NonpositiveInterarrival(x));
        }
        prev = next;
        next += x;
        n += 1;
    }
    Ok(RenewalState {
        t,
        n,
        elapsed: t - prev,
        residual: next - t,
        current: next - prev,
    })
}

type Eval = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Stationary (equilibrium) delay law F₀ and the length-biased law F₁.
pub struct StationaryLaw {
    pub mu: f64,
    cdf: Eval,
}

impl StationaryLaw {
    /// f₀(x) = F̄(x)/μ
    pub fn f0_density(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            (1.0 - (self.cdf)(x)) / self.mu
        }
    }

    pub fn f0_cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            integrate(|y| self.f0_density(y), 0.0, x, 1e-14, 1e-12)
        }
    }

    /// f₁(x) = x·f(x)/μ, with f obtained by central differences of F.
    pub fn f1_density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let h = 1e-5 * x.max(1.0);
        let lo = (x - h).max(0.0);
        let f = ((self.cdf)(x + h) - (self.cdf)(lo)) / (x + h - lo);
        x * f / self.mu
    }

    pub fn f1_mean(&self) -> f64 {
        integrate_to_inf(|x| x * self.f1_density(x), 0.0, 1e-12, 1e-10)
    }
}

pub fn stationary_law<F>(interarrival_cdf: F, mu: f64) -> StationaryLaw
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    assert!(mu.is_finite() && mu > 0.0, "mean interarrival must be finite and positive");
    StationaryLaw {
        mu,
        cdf: Box::new(interarrival_cdf),
    }
}

/// Quadrature rule for the convolution in [`solve_renewal_equation`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ConvolutionRule {
    /// Rectangle rule on the left endpoint of each cell; first order.
    LeftEndpoint,
    /// Trapezoid rule; second order for smooth data.
    #[default]
    Trapezoid,
}

impl ConvolutionRule {
    pub fn order(self) -> u32 {
        match self {
            ConvolutionRule::LeftEndpoint => 1,
            ConvolutionRule::Trapezoid => 2,
        }
    }
}

/// Solve `Z = z + F∗Z` on the grid `0, h, 2h, …, t_max` by forward recursion.
/// Returns `(tᵢ, Zᵢ)` pairs.
pub fn solve_renewal_equation<Z, F>(
    z: Z,
    interarrival_density: F,
    grid_step: f64,
    t_max: f64,
    rule: ConvolutionRule,
) -> Vec<(f64, f64)>
where
    Z: Fn(f64) -> f64,
    F: Fn(f64) -> f64,
{
    assert!(grid_step > 0.0);
    let n = (t_max / grid_step).round() as usize;
    let h = grid_step;
    let zs: Vec<f64> = (0..=n).map(|i| z(i as f64 * h)).collect();
    let fs: Vec<f64> = (0..=n).map(|i| interarrival_density(i as f64 * h)).collect();
    let mut out = vec![0.0; n + 1];
    out[0] = zs[0];
    for i in 1..=n {
        let mut conv = 0.0;
        for j in 1..i {
            conv += fs[j] * out[i - j];
        }
        out[i] = match rule {
            ConvolutionRule::Trapezoid => {
                (zs[i] + h * conv + 0.5 * h * fs[i] * out[0]) / (1.0 - 0.5 * h * fs[0])
            }
            ConvolutionRule::LeftEndpoint => (zs[i] + h * conv) / (1.0 - h * fs[0]),
        };
    }
    out.into_iter()
        .enumerate()
        .map(|(i, v)| (i as f64 * h, v))
        .collect()
}

/// Richardson ratio `(Z_h − Z_{h/2}) / (Z_{h/2} − Z_{h/4})` at time `t`.
/// Converges to `2^p` for a method of order `p`.
pub fn richardson_ratio<Z, F>(z: Z, f: F, h: f64, t: f64, rule: ConvolutionRule) -> f64
where
    Z: Fn(f64) -> f64,
    F: Fn(f64) -> f64,
{
    let at = |step: f64| {
        let sol = solve_renewal_equation(&z, &f, step, t, rule);
        sol.last().unwrap().1
    };
    let (a, b, c) = (at(h), at(h / 2.0), at(h / 4.0));
    (a - b) / (b - c)
}

/// Closed forms for the Poisson process with rate λ.
#[derive(Clone, Copy, Debug)]
pub struct PoissonOracle {
    pub lambda: f64,
}

pub fn poisson_oracle(lambda: f64) -> PoissonOracle {
    assert!(lambda > 0.0);
    PoissonOracle { lambda }
}

impl PoissonOracle {
    /// U(t) = 1 + λt
    pub fn renewal_function(&self, t: f64) -> f64 {
        1.0 + self.lambda * t
    }

    /// P(N(t) = n) = (λt)^{n−1} e^{−λt} / (n−1)!, n ≥ 1.
    pub fn count_pmf(&self, t: f64, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let k = (n - 1) as f64;
        let lt = self.lambda * t;
        if lt == 0.0 {
            return if n == 1 { 1.0 } else { 0.0 };
        }
        (k * lt.ln() - lt - ln_gamma(k + 1.0)).exp()
    }

    /// Law of R(t) for every t: Exp(λ).
    pub fn residual_cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-self.lambda * x).exp_m1()
        }
    }
}

/// Closed forms for the zero-delayed Gamma(2, λ) renewal process.
#[derive(Clone, Copy, Debug)]
pub struct Gamma2Oracle {
    pub lambda: f64,
}

pub fn gamma2_oracle(lambda: f64) -> Gamma2Oracle {
    assert!(lambda > 0.0);
    Gamma2Oracle { lambda }
}

impl Gamma2Oracle {
    /// Density of the absolutely continuous part of the renewal measure.
    pub fn u1(&self, x: f64) -> f64 {
        0.5 * self.lambda * -(-2.0 * self.lambda * x).exp_m1()
    }

    /// Weight of the Gamma(2, λ) component of the law of R(t); the rest is
    /// Exp(λ).
    pub fn residual_gamma_weight(&self, t: f64) -> f64 {
        0.5 * (1.0 + (-2.0 * self.lambda * t).exp())
    }

    /// F_R^t(x) = P(R(t) ≤ x)
    pub fn residual_cdf(&self, t: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let l = self.lambda;
        let ex = (-l * x).exp();
        1.0 - ex * (1.0 + 0.5 * l * x) - 0.5 * l * x * ex * (-2.0 * l * t).exp()
    }

    /// f_R^t(x) = (λ/2)e^{−λx}[(1 − e^{−2λt}) + λx(1 + e^{−2λt})]
    pub fn residual_density(&self, t: f64, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let l = self.lambda;
        let e = (-2.0 * l * t).exp();
        0.5 * l * (-l * x).exp() * ((1.0 - e) + l * x * (1.0 + e))
    }

    /// Stationary residual density f₀(x) = (λ/2)e^{−λx}(1 + λx).
    pub fn f0_density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let l = self.lambda;
        0.5 * l * (-l * x).exp() * (1.0 + l * x)
    }

    pub fn f0_cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let l = self.lambda;
        1.0 - (-l * x).exp() * (1.0 + 0.5 * l * x)
    }

    /// Closed-form TV distance between the law of R(t) and F₀,
    /// `e^{−2t}/(2e)`. Only exposed for λ = 1; other rates go through
    /// [`Gamma2Oracle::tv_quadrature`].
    pub fn tv(&self, t: f64) -> Option<f64> {
        if self.lambda == 1.0 {
            Some((-2.0 * t).exp() / (2.0 * E))
        } else {
            None
        }
    }

    /// ½∫|f_R^t − f₀| by quadrature, split at the crossing x = 1/λ.
    pub fn tv_quadrature(&self, t: f64) -> f64 {
        let d = |x: f64| (self.residual_density(t, x) - self.f0_density(x)).abs();
        let c = 1.0 / self.lambda;
        0.5 * (integrate(d, 0.0, c, 1e-16, 1e-13) + integrate_to_inf(d, c, 1e-16, 1e-13))
    }

    /// Draw from the law of R(t).
    pub fn sample_residual(&self, t: f64, stream: &mut RandomStream) -> f64 {
        self.sample_mixture(self.residual_gamma_weight(t), stream)
    }

    /// Draw from F₀.
    pub fn sample_f0(&self, stream: &mut RandomStream) -> f64 {
        self.sample_mixture(0.5, stream)
    }

    fn sample_mixture(&self, gamma_weight: f64, stream: &mut RandomStream) -> f64 {
        let x = exp_draw(stream, self.lambda);
        if stream.open01() < gamma_weight {
            x + exp_draw(stream, self.lambda)
        } else {
            x
        }
    }
}

/// TV distance between the law of R(t) for a zero-delayed Gamma(2, λ)
/// process and its stationary law F₀, estimated from observed ages E(t)
/// without a histogram.
///
/// Given the age `a`, R(t) is a mixture of Exp(λ) and Gamma(2, λ) with
/// Gamma weight `1/(1+λa)`, so averaging these weights over traces yields an
/// estimate of the whole density of R(t) of the same mixture form. The TV to
/// F₀ is then computed by quadrature.
pub fn gamma2_residual_tv_from_ages(ages: &[f64], lambda: f64) -> f64 {
    let m0 = crate::stats::mean(&ages.iter().map(|a| 1.0 / (1.0 + lambda * a)).collect::<Vec<_>>());
    let l = lambda;
    let fhat = |x: f64| l * (-l * x).exp() * ((1.0 - m0) + m0 * l * x);
    let f0 = |x: f64| 0.5 * l * (-l * x).exp() * (1.0 + l * x);
    let d = |x: f64| (fhat(x) - f0(x)).abs();
    let c = 1.0 / l;
    0.5 * (integrate(d, 0.0, c, 1e-16, 1e-12) + integrate_to_inf(d, c, 1e-16, 1e-12))
}
