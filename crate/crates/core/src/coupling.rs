//! Uniform-component decompositions and the checkpoint coupling of a
//! zero-delayed renewal process with a stationary copy.
//!
//! At checkpoint `t_k` both copies have residual lives `R`, `R′`. The next
//! checkpoint is `t_{k+1} = t_k + max(R, R′) + A`, by which time each copy has
//! aged at least `A` since its next renewal. A shared coin `U ~ Ber(δ)` then
//! decides whether both residuals are set to one shared `V ~ Unif(0, b)`
//! (coupling succeeds) or each is drawn from its own residual law.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::renewal::{gamma2_oracle, Gamma2Oracle};
use crate::rng::{stream_id, RandomStream};
use crate::dists::exp_draw;
use crate::stats::linear_fit;

const RESIDUAL_CAP: u64 = 1_000_000;

/// `f = ε·Unif(a, a+b) + (1−ε)·h`.
pub struct UniformComponent<'f> {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub eps: f64,
    density: Box<dyn Fn(f64) -> f64 + Sync + 'f>,
}

impl<'f> UniformComponent<'f> {
    /// Component with a known lower bound `alpha` on `(a, a+b)`.
    pub fn with_alpha<F: Fn(f64) -> f64 + Sync + 'f>(density: F, a: f64, b: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::DegenerateComponent { alpha });
        }
        Ok(Self {
            a,
            b,
            alpha,
            eps: (alpha * b).min(1.0),
            density: Box::new(density),
        })
    }

    #[inline]
    fn inside(&self, x: f64) -> bool {
        x > self.a && x < self.a + self.b
    }

    pub fn density(&self, x: f64) -> f64 {
        (self.density)(x)
    }

    /// h(x) = (f(x) − α·𝟙_{(a,a+b)}(x)) / (1 − ε)
    pub fn residual(&self, x: f64) -> f64 {
        if self.eps >= 1.0 {
            return 0.0;
        }
        let f = (self.density)(x);
        let lift = if self.inside(x) { self.alpha } else { 0.0 };
        ((f - lift) / (1.0 - self.eps)).max(0.0)
    }

    /// ε·(1/b)·𝟙 + (1−ε)·h, which must reproduce f.
    pub fn reconstruct(&self, x: f64) -> f64 {
        let u = if self.inside(x) { 1.0 / self.b } else { 0.0 };
        self.eps * u + (1.0 - self.eps) * self.residual(x)
    }
}

/// Infimum of `density` on `(a, a+b)` from a grid scan refined around the
/// smallest grid value.
pub fn uniform_component<'f, F: Fn(f64) -> f64 + Sync + 'f>(
    density: F,
    a: f64,
    b: f64,
) -> Result<UniformComponent<'f>> {
    const GRID: usize = 2048;
    let h = b / GRID as f64;
    let (imin, mut alpha) = (0..=GRID)
        .map(|i| (i, density(a + i as f64 * h)))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let mut lo = a + (imin.max(1) - 1) as f64 * h;
    let mut hi = a + (imin + 1).min(GRID) as f64 * h;
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if density(m1) < density(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    alpha = alpha.min(density(0.5 * (lo + hi)));
    UniformComponent::with_alpha(density, a, b, alpha)
}

/// A sampler and density that dominate a residual law:
/// `h(x) ≤ bound·density(x)`.
pub struct Envelope<'e> {
    pub sample: &'e (dyn Fn(&mut RandomStream) -> f64 + Sync),
    pub density: &'e (dyn Fn(f64) -> f64 + Sync),
    pub bound: f64,
}

/// Exact draw from the residual law `h` of `comp` by rejection from `env`.
pub fn residual_draw(comp: &UniformComponent<'_>, env: &Envelope<'_>, stream: &mut RandomStream) -> Result<f64> {
    for _ in 0..RESIDUAL_CAP {
        let x = (env.sample)(stream);
        let accept = comp.residual(x) / (env.bound * (env.density)(x));
        if stream.open01() <= accept {
            return Ok(x);
        }
    }
    Err(Error::TrialBudgetExceeded { cap: RESIDUAL_CAP })
}

/// Interarrival families with closed-form recurrence laws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    Exp { lambda: f64 },
    Gamma2 { lambda: f64 },
}

impl Family {
    pub fn lambda(&self) -> f64 {
        match *self {
            Family::Exp { lambda } | Family::Gamma2 { lambda } => lambda,
        }
    }

    /// Common lower bound on `(0, b)` for every recurrence law reached after
    /// a warm-up of at least `a_off`, and for the stationary law.
    pub fn alpha(&self, a_off: f64, b: f64) -> f64 {
        match *self {
            Family::Exp { lambda } => lambda * (-lambda * b).exp(),
            Family::Gamma2 { lambda } => {
                0.5 * lambda * (-lambda * b).exp() * -(-2.0 * lambda * a_off).exp_m1()
            }
        }
    }

    pub fn delta(&self, a_off: f64, b: f64) -> f64 {
        self.alpha(a_off, b) * b
    }

    /// Default warm-up offset and component width: A = 2μ, b = 1/λ.
    pub fn default_params(&self) -> (f64, f64) {
        match *self {
            Family::Exp { lambda } => (2.0 / lambda, 1.0 / lambda),
            Family::Gamma2 { lambda } => (4.0 / lambda, 1.0 / lambda),
        }
    }

    /// Density of R(s) for the zero-delayed process.
    pub fn residual_density(&self, s: f64, x: f64) -> f64 {
        match *self {
            Family::Exp { lambda } => {
                if x < 0.0 {
                    0.0
                } else {
                    lambda * (-lambda * x).exp()
                }
            }
            Family::Gamma2 { lambda } => gamma2_oracle(lambda).residual_density(s, x),
        }
    }

    pub fn stationary_density(&self, x: f64) -> f64 {
        match *self {
            Family::Exp { .. } => self.residual_density(0.0, x),
            Family::Gamma2 { lambda } => gamma2_oracle(lambda).f0_density(x),
        }
    }

    pub fn stationary_cdf(&self, x: f64) -> f64 {
        match *self {
            Family::Exp { lambda } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-lambda * x).exp_m1()
                }
            }
            Family::Gamma2 { lambda } => gamma2_oracle(lambda).f0_cdf(x),
        }
    }

    pub fn residual_cdf(&self, s: f64, x: f64) -> f64 {
        match *self {
            Family::Exp { .. } => self.stationary_cdf(x),
            Family::Gamma2 { lambda } => gamma2_oracle(lambda).residual_cdf(s, x),
        }
    }

    fn sample_residual(&self, s: f64, stream: &mut RandomStream) -> f64 {
        match *self {
            Family::Exp { lambda } => exp_draw(stream, lambda),
            Family::Gamma2 { lambda } => gamma2_oracle(lambda).sample_residual(s, stream),
        }
    }

    fn sample_stationary(&self, stream: &mut RandomStream) -> f64 {
        match *self {
            Family::Exp { lambda } => exp_draw(stream, lambda),
            Family::Gamma2 { lambda } => gamma2_oracle(lambda).sample_f0(stream),
        }
    }

    /// TV distance between the law of R(t) and the stationary law.
    pub fn tv(&self, t: f64) -> f64 {
        match *self {
            Family::Exp { .. } => 0.0,
            Family::Gamma2 { lambda } => {
                let o: Gamma2Oracle = gamma2_oracle(lambda);
                o.tv(t).unwrap_or_else(|| o.tv_quadrature(t))
            }
        }
    }
}

/// Residual draw for the family when the common component is `α·𝟙_{(0,b)}`.
/// The envelope is the recurrence law itself, which dominates its residual
/// with constant `1/(1−δ)`, so acceptance is `1 − α𝟙/f`.
fn family_residual(
    fam: Family,
    alpha: f64,
    b: f64,
    s: Option<f64>,
    stream: &mut RandomStream,
) -> Result<f64> {
    for _ in 0..RESIDUAL_CAP {
        let (x, f) = match s {
            Some(s) => {
                let x = fam.sample_residual(s, stream);
                (x, fam.residual_density(s, x))
            }
            None => {
                let x = fam.sample_stationary(stream);
                (x, fam.stationary_density(x))
            }
        };
        if x >= b || stream.open01() * f >= alpha {
            return Ok(x);
        }
    }
    Err(Error::TrialBudgetExceeded { cap: RESIDUAL_CAP })
}

/// State of both copies at one checkpoint. `s` and `s_prime` are the ages
/// since the last renewal of each copy at which the residual was drawn
/// (`NaN` at the initial checkpoint).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Checkpoint {
    pub t: f64,
    pub r: f64,
    pub r_prime: f64,
    pub s: f64,
    pub s_prime: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingRun {
    pub a_offset: f64,
    pub b: f64,
    pub delta: f64,
    /// Failed coin flips before the first success.
    pub sigma: u64,
    /// t_{σ+1} + L_{σ+1}
    pub coupling_time: f64,
    /// The shared uniform used at the successful step.
    pub v_final: f64,
    pub checkpoints: Vec<Checkpoint>,
}

/// Run the checkpoint coupling of a zero-delayed process (R(t₀) = 0) and a
/// stationary one (R′(t₀) ~ F₀).
pub fn coupled_simulation(fam: Family, a_off: f64, b: f64, stream: &mut RandomStream) -> Result<CouplingRun> {
    if !(a_off > 0.0 && b > 0.0) {
        return Err(Error::InvalidArgument("A and b must be positive".into()));
    }
    let alpha = fam.alpha(a_off, b);
    if !(alpha > 0.0) {
        return Err(Error::DegenerateComponent { alpha });
    }
    let delta = alpha * b;
    let mut t = 0.0;
    let mut r = 0.0;
    let mut rp = fam.sample_stationary(stream);
    let mut checkpoints = vec![Checkpoint {
        t,
        r,
        r_prime: rp,
        s: f64::NAN,
        s_prime: f64::NAN,
    }];
    let mut k = 0u64;
    loop {
        let l = r.max(rp);
        let s = l + a_off - r;
        let sp = l + a_off - rp;
        t += l + a_off;
        let u = stream.open01() < delta;
        let v = b * stream.open01();
        if u {
            checkpoints.push(Checkpoint {
                t,
                r: v,
                r_prime: v,
                s,
                s_prime: sp,
            });
            return Ok(CouplingRun {
                a_offset: a_off,
                b,
                delta,
                sigma: k,
                coupling_time: t + v,
                v_final: v,
                checkpoints,
            });
        }
        r = family_residual(fam, alpha, b, Some(s), stream)?;
        rp = family_residual(fam, alpha, b, None, stream)?;
        checkpoints.push(Checkpoint {
            t,
            r,
            r_prime: rp,
            s,
            s_prime: sp,
        });
        k += 1;
    }
}

/// Independent coupling runs on streams `stream_id(tag, 0..runs)`.
pub fn coupling_runs(fam: Family, a_off: f64, b: f64, runs: usize, seed: u64) -> Result<Vec<CouplingRun>> {
    (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = RandomStream::new(seed, stream_id(STREAM_TAG, i));
            coupled_simulation(fam, a_off, b, &mut s)
        })
        .collect()
}

const STREAM_TAG: u16 = 0x0c;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InequalityRow {
    pub t: f64,
    pub p_tail: f64,
    pub p_tail_stderr: f64,
    pub tv: f64,
    pub pass: bool,
}

/// Compare the closed-form TV distance with the empirical coupling-time tail
/// at each grid point: `TV(t) ≤ P̂(T > t) + 3·stderr`.
pub fn coupling_inequality_check(
    fam: Family,
    a_off: f64,
    b: f64,
    t_grid: &[f64],
    runs: usize,
    seed: u64,
) -> Result<Vec<InequalityRow>> {
    let times: Vec<f64> = coupling_runs(fam, a_off, b, runs, seed)?
        .into_iter()
        .map(|r| r.coupling_time)
        .collect();
    Ok(inequality_rows(fam, &times, t_grid))
}

pub fn inequality_rows(fam: Family, times: &[f64], t_grid: &[f64]) -> Vec<InequalityRow> {
    let n = times.len() as f64;
    t_grid
        .iter()
        .map(|&t| {
            let p = times.iter().filter(|&&x| x > t).count() as f64 / n;
            let se = (p * (1.0 - p) / n).sqrt();
            let tv = fam.tv(t);
            InequalityRow {
                t,
                p_tail: p,
                p_tail_stderr: se,
                tv,
                pass: tv <= p + 3.0 * se,
            }
        })
        .collect()
}

/// Slope of `ln P̂(T > t)` against `t` over grid points with at least
/// `min_count` exceedances.
pub fn tail_log_slope(times: &[f64], t_grid: &[f64], min_count: usize) -> Option<f64> {
    let n = times.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = t_grid
        .iter()
        .filter_map(|&t| {
            let c = times.iter().filter(|&&x| x > t).count();
            (c >= min_count).then(|| (t, (c as f64 / n).ln()))
        })
        .unzip();
    (xs.len() >= 3).then(|| linear_fit(&xs, &ys).0)
}

/// `points` equally spaced times from the sample median of T to its 0.99
/// quantile: the window over which the tail slope is fitted.
pub fn tail_window(times: &[f64], points: usize) -> Vec<f64> {
    let mut sorted = times.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let lo = crate::stats::quantile_sorted(&sorted, 0.5);
    let hi = crate::stats::quantile_sorted(&sorted, 0.99);
    let step = (hi - lo) / (points.max(2) - 1) as f64;
    (0..points.max(2)).map(|i| lo + step * i as f64).collect()
}

/// Monte Carlo estimate of E[e^{εT}].
pub fn exp_moment(times: &[f64], eps: f64) -> f64 {
    crate::stats::mean(&times.iter().map(|t| (eps * t).exp()).collect::<Vec<_>>())
}

/// χ² goodness of fit of the failed-flip counts σ against Geom(δ), pooling
/// σ ≥ `bins` into one tail cell. Returns (statistic, dof, p-value).
pub fn sigma_gof(runs: &[CouplingRun], delta: f64, bins: usize) -> (f64, usize, f64) {
    let mut obs = vec![0u64; bins + 1];
    for r in runs {
        obs[(r.sigma as usize).min(bins)] += 1;
    }
    let n = runs.len() as f64;
    let mut exp: Vec<f64> = (0..bins).map(|k| n * delta * (1.0 - delta).powi(k as i32)).collect();
    exp.push(n * (1.0 - delta).powi(bins as i32));
    crate::stats::chi_square_gof(&obs, &exp)
}
