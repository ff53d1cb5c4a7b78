//! Bayesian probit regression: the model, its exact derivatives, the MAP by
//! Newton's method, a Laplace-approximation proposal for RRS and the
//! data-augmentation Gibbs sampler.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use crate::dists::{std_normal, truncated_normal_lower, Proposal, Support, Target};
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::samplers::ChainTrace;
use crate::special::{inv_mills, ndtr_split};
use crate::stats::quantile_sorted;

const LUPUS_TABLE: &str = include_str!("../data/lupus.txt");

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LupusRecord {
    pub y: u8,
    pub igg_diff: f64,
    pub iga: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LupusData {
    pub rows: Vec<LupusRecord>,
}

impl LupusData {
    pub fn positives(&self) -> usize {
        self.rows.iter().filter(|r| r.y == 1).count()
    }
}

/// The embedded dataset (55 patients, 18 cases).
pub fn load_lupus() -> Result<LupusData> {
    parse_lupus(LUPUS_TABLE)
}

/// Parse the cell-grid text format: a `total <patients> <cases>` line, a
/// header `iga <col values…>`, then one row per IgG3−IgG4 value with cells
/// `a/b` or `-`. Lines starting with `#` are comments.
pub fn parse_lupus(text: &str) -> Result<LupusData> {
    let bad = |m: String| Error::DataIntegrity(m);
    let mut declared: Option<(usize, usize)> = None;
    let mut cols: Option<Vec<f64>> = None;
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let head = tok.next().unwrap();
        let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| bad(format!("line {}: bad number {s:?}", ln + 1))) };
        match head {
            "total" => {
                let v: Vec<usize> = tok
                    .map(|s| s.parse().map_err(|_| bad(format!("line {}: bad total", ln + 1))))
                    .collect::<Result<_>>()?;
                if v.len() != 2 {
                    return Err(bad(format!("line {}: total needs two counts", ln + 1)));
                }
                declared = Some((v[0], v[1]));
            }
            "iga" => cols = Some(tok.map(num).collect::<Result<_>>()?),
            _ => {
                let igg = num(head)?;
                let cols = cols.as_ref().ok_or_else(|| bad("cell row before the iga header".into()))?;
                let cells: Vec<&str> = tok.collect();
                if cells.len() != cols.len() {
                    return Err(bad(format!("line {}: expected {} cells, found {}", ln + 1, cols.len(), cells.len())));
                }
                for (cell, &iga) in cells.iter().zip(cols) {
                    if *cell == "-" {
                        continue;
                    }
                    let (a, b) = cell
                        .split_once('/')
                        .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
                        .ok_or_else(|| bad(format!("line {}: bad cell {cell:?}", ln + 1)))?;
                    if a > b {
                        return Err(bad(format!("line {}: {a} cases out of {b} patients", ln + 1)));
                    }
                    for i in 0..b {
                        rows.push(LupusRecord {
                            y: u8::from(i < a),
                            igg_diff: igg,
                            iga,
                        });
                    }
                }
            }
        }
    }
    let data = LupusData { rows };
    let (n, pos) = declared.ok_or_else(|| bad("missing total line".into()))?;
    if data.rows.len() != n || data.positives() != pos {
        return Err(bad(format!(
            "table expands to {}/{} but declares {n}/{pos}",
            data.rows.len(),
            data.positives()
        )));
    }
    Ok(data)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Prior {
    Flat,
    /// Independent N(0, σ²) on each coefficient.
    Gaussian(f64),
}

impl Prior {
    fn precision(&self) -> f64 {
        match *self {
            Prior::Flat => 0.0,
            Prior::Gaussian(s2) => 1.0 / s2,
        }
    }
}

/// Probit model with the sign-folded design `X̃ᵢ = (2yᵢ − 1)·xᵢ`.
#[derive(Clone, Debug)]
pub struct ProbitModel {
    pub x_signed: DMatrix<f64>,
    pub prior: Prior,
    rows: Vec<f64>,
    n: usize,
    k: usize,
    // Distinct signed rows with their multiplicities; grouped designs repeat rows.
    distinct: Vec<f64>,
    mult: Vec<f64>,
}

impl ProbitModel {
    /// `x` holds one covariate row per observation, intercept included.
    pub fn new(x: &DMatrix<f64>, y: &[u8], prior: Prior) -> Self {
        let mut xs = x.clone();
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0 {
                xs.row_mut(i).neg_mut();
            }
        }
        Self::from_signed(xs, prior)
    }

    pub fn from_signed(x_signed: DMatrix<f64>, prior: Prior) -> Self {
        let (n, k) = x_signed.shape();
        let rows: Vec<f64> = (0..n).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| x_signed[(i, j)]).collect();
        let mut distinct: Vec<f64> = Vec::new();
        let mut mult: Vec<f64> = Vec::new();
        for r in rows.chunks(k.max(1)).take(n) {
            match distinct.chunks(k.max(1)).position(|d| d == r) {
                Some(u) => mult[u] += 1.0,
                None => {
                    distinct.extend_from_slice(r);
                    mult.push(1.0);
                }
            }
        }
        Self {
            x_signed,
            prior,
            rows,
            n,
            k,
            distinct,
            mult,
        }
    }

    /// Intercept, IgG3−IgG4 and IgA columns.
    pub fn lupus(data: &LupusData, prior: Prior) -> Self {
        let x = DMatrix::from_fn(data.rows.len(), 3, |i, j| match j {
            0 => 1.0,
            1 => data.rows[i].igg_diff,
            _ => data.rows[i].iga,
        });
        let y: Vec<u8> = data.rows.iter().map(|r| r.y).collect();
        Self::new(&x, &y, prior)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    fn row_linear(&self, i: usize, beta: &[f64]) -> f64 {
        let r = &self.rows[i * self.k..(i + 1) * self.k];
        r.iter().zip(beta).map(|(a, b)| a * b).sum()
    }

    #[inline]
    fn linear(&self, u: usize, beta: &[f64]) -> f64 {
        let r = &self.distinct[u * self.k..(u + 1) * self.k];
        r.iter().zip(beta).map(|(a, b)| a * b).sum()
    }

    pub fn log_posterior(&self, beta: &[f64]) -> f64 {
        let mut q = 0.0;
        let mut prod = 1.0;
        for (u, &m) in self.mult.iter().enumerate() {
            let (qi, ri) = ndtr_split(self.linear(u, beta));
            q += m * qi;
            if ri < 1e-30 {
                q += m * ri.ln();
            } else {
                prod *= ri.powi(m as i32);
                if prod < 1e-250 {
                    q += prod.ln();
                    prod = 1.0;
                }
            }
        }
        q + prod.ln() - 0.5 * self.prior.precision() * beta.iter().map(|b| b * b).sum::<f64>()
    }

    /// ηᵀX̃ with ηᵢ = φ(X̃ᵢβ)/Φ(X̃ᵢβ).
    pub fn gradient(&self, beta: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(self.k);
        for (u, &m) in self.mult.iter().enumerate() {
            let eta = m * inv_mills(self.linear(u, beta));
            for j in 0..self.k {
                g[j] += eta * self.distinct[u * self.k + j];
            }
        }
        let p = self.prior.precision();
        for j in 0..self.k {
            g[j] -= p * beta[j];
        }
        g
    }

    /// X̃ᵀDX̃ with Dᵢᵢ = −uᵢηᵢ − ηᵢ², uᵢ = X̃ᵢβ.
    pub fn hessian(&self, beta: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.k, self.k);
        for (u, &m) in self.mult.iter().enumerate() {
            let lin = self.linear(u, beta);
            let eta = inv_mills(lin);
            let d = m * (-lin * eta - eta * eta);
            let r = &self.distinct[u * self.k..(u + 1) * self.k];
            for a in 0..self.k {
                for b in 0..self.k {
                    h[(a, b)] += d * r[a] * r[b];
                }
            }
        }
        let p = self.prior.precision();
        for j in 0..self.k {
            h[(j, j)] -= p;
        }
        h
    }
}

pub fn log_posterior(model: &ProbitModel, beta: &[f64]) -> f64 {
    model.log_posterior(beta)
}

pub fn gradient(model: &ProbitModel, beta: &[f64]) -> DVector<f64> {
    model.gradient(beta)
}

pub fn hessian(model: &ProbitModel, beta: &[f64]) -> DMatrix<f64> {
    model.hessian(beta)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MapResult {
    pub mode: Vec<f64>,
    #[serde(skip)]
    pub hessian: DMatrix<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
}

const MODE_NORM_GUARD: f64 = 1e3;

/// Posterior mode by damped Newton with Armijo backtracking and the exact
/// Hessian. Converged when `‖∇‖∞ ≤ tol` and the last Newton step is
/// negligible; a mode escaping to `‖β‖ > 10³` is reported as
/// non-convergence (separable data under a flat prior).
pub fn map_newton(model: &ProbitModel, beta0: &[f64], tol: f64, max_iter: usize) -> Result<MapResult> {
    let k = model.k();
    let mut beta = DVector::from_column_slice(beta0);
    let mut f = model.log_posterior(beta.as_slice());
    let mut g = model.gradient(beta.as_slice());
    for it in 1..=max_iter {
        let h = model.hessian(beta.as_slice());
        let neg = -&h;
        let dir = match Cholesky::new(neg.clone()) {
            Some(ch) => ch.solve(&g),
            None => {
                let shift = neg.symmetric_eigenvalues().min().min(0.0).abs() + 1e-6;
                let reg = neg + DMatrix::identity(k, k) * shift;
                Cholesky::new(reg).map(|c| c.solve(&g)).unwrap_or_else(|| g.clone())
            }
        };
        let slope = g.dot(&dir);
        let mut step = 1.0;
        let mut next = &beta + &dir;
        let mut f_next = model.log_posterior(next.as_slice());
        while !(f_next >= f + 1e-4 * step * slope) && step > 1e-12 {
            step *= 0.5;
            next = &beta + &dir * step;
            f_next = model.log_posterior(next.as_slice());
        }
        let moved = (&dir * step).amax();
        beta = next;
        f = f_next;
        g = model.gradient(beta.as_slice());
        let gn = g.amax();
        if beta.amax() > MODE_NORM_GUARD || !f.is_finite() {
            return Err(Error::NoConvergence {
                iterations: it,
                grad_norm: gn,
            });
        }
        if gn <= tol && moved <= 1e-6 * (1.0 + beta.amax()) {
            let hess = model.hessian(beta.as_slice());
            if Cholesky::new(-&hess).is_none() {
                return Err(Error::IndefiniteHessian);
            }
            return Ok(MapResult {
                mode: beta.as_slice().to_vec(),
                hessian: hess,
                iterations: it,
                grad_norm: gn,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        grad_norm: g.amax(),
    })
}

/// Gaussian proposal `N(μ_MAP, α²(−H)⁻¹)`.
#[derive(Clone, Debug)]
pub struct LaplaceProposal {
    pub mode: DVector<f64>,
    pub hessian: DMatrix<f64>,
    pub alpha2: f64,
    pub xi: f64,
    /// Lower Cholesky factor of α²(−H)⁻¹.
    pub chol: DMatrix<f64>,
    /// −H/α², the precision matrix.
    precision: DMatrix<f64>,
    log_norm: f64,
}

impl LaplaceProposal {
    pub fn new(mode: &[f64], hessian: &DMatrix<f64>, alpha2: f64, xi: f64) -> Result<Self> {
        let k = mode.len();
        let precision = -hessian / alpha2;
        let pc = Cholesky::new(precision.clone()).ok_or(Error::IndefiniteHessian)?;
        let cov = pc.inverse();
        let chol = Cholesky::new(cov).ok_or(Error::IndefiniteHessian)?.l();
        let log_det_cov: f64 = 2.0 * chol.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let log_norm = -0.5 * (k as f64 * (2.0 * std::f64::consts::PI).ln() + log_det_cov);
        Ok(Self {
            mode: DVector::from_column_slice(mode),
            hessian: hessian.clone(),
            alpha2,
            xi,
            chol,
            precision,
            log_norm,
        })
    }

    pub fn from_map(map: &MapResult, alpha2: f64, xi: f64) -> Result<Self> {
        Self::new(&map.mode, &map.hessian, alpha2, xi)
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.chol * self.chol.transpose()
    }

    /// ln of the normalizing constant, −½ ln det(2π·α²(−H)⁻¹).
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }
}

impl Proposal for LaplaceProposal {
    fn dim(&self) -> usize {
        self.mode.len()
    }

    fn sample(&self, stream: &mut RandomStream, out: &mut [f64]) {
        let k = self.mode.len();
        let mut z = [0.0f64; 16];
        for v in z.iter_mut().take(k) {
            *v = std_normal(stream);
        }
        for i in 0..k {
            let mut s = self.mode[i];
            for j in 0..=i {
                s += self.chol[(i, j)] * z[j];
            }
            out[i] = s;
        }
    }

    fn log_g(&self, x: &[f64]) -> f64 {
        let k = self.mode.len();
        let mut q = 0.0;
        for i in 0..k {
            let di = x[i] - self.mode[i];
            for j in 0..k {
                q += di * self.precision[(i, j)] * (x[j] - self.mode[j]);
            }
        }
        self.log_norm - 0.5 * q
    }
}

/// The posterior as an RRS target, scaled by `e^ξ`.
pub struct ProbitTarget<'m> {
    pub model: &'m ProbitModel,
    pub xi: f64,
}

impl Target for ProbitTarget<'_> {
    fn dim(&self) -> usize {
        self.model.k()
    }

    fn support(&self) -> Support {
        Support::unbounded(self.model.k())
    }

    fn log_f(&self, x: &[f64]) -> f64 {
        self.xi + self.model.log_posterior(x)
    }
}

/// W(β) = exp(ξ + ln π(β|X) − ln g(β)), with `g` the normalized Laplace
/// proposal density.
pub fn rrs_weight_probit(model: &ProbitModel, prop: &LaplaceProposal, beta: &[f64]) -> f64 {
    (prop.xi + model.log_posterior(beta) - prop.log_g(beta)).exp()
}

/// Conditional draws of the Albert–Chib sampler, with Σ factored once.
pub struct GibbsKernel<'m> {
    model: &'m ProbitModel,
    sigma: DMatrix<f64>,
    sigma_chol: DMatrix<f64>,
}

impl<'m> GibbsKernel<'m> {
    pub fn new(model: &'m ProbitModel) -> Result<Self> {
        let k = model.k();
        let xt = model.x_signed.transpose();
        let prec = &xt * &model.x_signed + DMatrix::identity(k, k) * model.prior.precision();
        let sigma = Cholesky::<f64, Dyn>::new(prec).ok_or(Error::SingularDesign)?.inverse();
        let sigma_chol = Cholesky::new(sigma.clone()).ok_or(Error::SingularDesign)?.l();
        Ok(Self {
            model,
            sigma,
            sigma_chol,
        })
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// z | β: componentwise N(X̃ᵢβ, 1) truncated to (0, ∞).
    pub fn draw_latent(&self, beta: &[f64], z: &mut [f64], stream: &mut RandomStream) {
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = truncated_normal_lower(self.model.row_linear(i, beta), stream);
        }
    }

    /// β | z ~ N(ΣX̃ᵀz, Σ).
    pub fn draw_beta(&self, z: &[f64], beta: &mut [f64], stream: &mut RandomStream) {
        let k = self.model.k();
        let n = self.model.n();
        let mut xtz = [0.0f64; 16];
        for i in 0..n {
            for j in 0..k {
                xtz[j] += self.model.rows[i * k + j] * z[i];
            }
        }
        let mut e = [0.0f64; 16];
        for v in e.iter_mut().take(k) {
            *v = std_normal(stream);
        }
        for a in 0..k {
            let mut s = 0.0;
            for b in 0..k {
                s += self.sigma[(a, b)] * xtz[b];
            }
            for b in 0..=a {
                s += self.sigma_chol[(a, b)] * e[b];
            }
            beta[a] = s;
        }
    }
}

/// Albert–Chib data-augmentation Gibbs sampler. The latent vector is not
/// retained.
pub fn gibbs_probit(model: &ProbitModel, beta0: &[f64], n_steps: usize, stream: &mut RandomStream) -> Result<ChainTrace> {
    let kern = GibbsKernel::new(model)?;
    let k = model.k();
    let mut beta = beta0.to_vec();
    let mut z = vec![0.0; model.n()];
    let mut states = Vec::with_capacity(n_steps * k);
    for _ in 0..n_steps {
        kern.draw_latent(&beta, &mut z, stream);
        kern.draw_beta(&z, &mut beta, stream);
        states.extend_from_slice(&beta);
    }
    Ok(ChainTrace::from_parts(k, states, vec![true; n_steps]))
}

/// Tukey boxplot statistics of one component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComponentSummary {
    pub mean: f64,
    pub sd: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub outliers: usize,
}

/// Per-component summaries of row-major samples with `dim` columns.
pub fn posterior_summary(samples: &[f64], dim: usize) -> Result<Vec<ComponentSummary>> {
    let n = samples.len() / dim;
    if n < 2 {
        return Err(Error::InvalidArgument("summary needs at least two samples".into()));
    }
    Ok((0..dim)
        .map(|j| {
            let mut xs: Vec<f64> = (0..n).map(|i| samples[i * dim + j]).collect();
            let (mean, se) = crate::stats::mean_stderr(&xs);
            let sd = se * (n as f64).sqrt();
            xs.sort_by(|a, b| a.total_cmp(b));
            let q1 = quantile_sorted(&xs, 0.25);
            let median = quantile_sorted(&xs, 0.5);
            let q3 = quantile_sorted(&xs, 0.75);
            let iqr = q3 - q1;
            let (lo_f, hi_f) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
            // Interpolated quartiles can leave every in-fence point inside the
            // box; whiskers then stop at the box edge.
            let whisker_lo = xs.iter().cloned().find(|&x| x >= lo_f).unwrap_or(q1).min(q1);
            let whisker_hi = xs.iter().rev().cloned().find(|&x| x <= hi_f).unwrap_or(q3).max(q3);
            let outliers = xs.iter().filter(|&&x| x < lo_f || x > hi_f).count();
            ComponentSummary {
                mean,
                sd,
                q1,
                median,
                q3,
                whisker_lo,
                whisker_hi,
                outliers,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn lupus_flat() -> ProbitModel {
        ProbitModel::lupus(&load_lupus().unwrap(), Prior::Flat)
    }

    #[test]
    fn lupus_expands_to_declared_totals() {
        let d = load_lupus().unwrap();
        assert_eq!((d.rows.len(), d.positives()), (55, 18));
        let cell = |g: f64, a: f64| d.rows.iter().filter(|r| r.igg_diff == g && r.iga == a).collect::<Vec<_>>();
        let c = cell(-2.0, 0.0);
        assert_eq!(c.len(), 7);
        assert!(c.iter().all(|r| r.y == 0));
        let c = cell(1.0, 2.0);
        assert_eq!(c.len(), 4);
        assert!(c.iter().all(|r| r.y == 1));
    }

    #[test]
    fn mismatched_totals_are_rejected() {
        let text = LUPUS_TABLE.replace("total 55 18", "total 55 19");
        assert!(matches!(parse_lupus(&text), Err(Error::DataIntegrity(_))));
    }

    #[test]
    fn log_posterior_at_zero() {
        let m = lupus_flat();
        assert!((m.log_posterior(&[0.0; 3]) + 55.0 * LN_2).abs() < 1e-12);
    }

    #[test]
    fn gradient_and_hessian_at_zero() {
        let m = lupus_flat();
        let g = m.gradient(&[0.0; 3]);
        let colsum = m.x_signed.row_sum();
        for j in 0..3 {
            assert!((g[j] - (2.0 / PI).sqrt() * colsum[j]).abs() < 1e-12);
        }
        let h = m.hessian(&[0.0; 3]);
        let expect = m.x_signed.transpose() * &m.x_signed * (-2.0 / PI);
        assert!((h - expect).amax() < 1e-12);
    }

    #[test]
    fn one_point_model() {
        let m = ProbitModel::from_signed(DMatrix::from_element(1, 1, 1.0), Prior::Flat);
        for &b in &[-3.0, 0.2, 4.0] {
            let g = m.gradient(&[b])[0];
            assert!((g - crate::special::norm_pdf(b) / crate::special::norm_cdf(b)).abs() < 1e-12);
        }
        assert!(matches!(map_newton(&m, &[0.0], 1e-8, 200), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn gaussian_prior_mode_exists() {
        let m = ProbitModel::from_signed(DMatrix::from_element(1, 1, 1.0), Prior::Gaussian(1.0));
        let r = map_newton(&m, &[0.0], 1e-10, 50).unwrap();
        assert!(r.grad_norm <= 1e-10);
        let lupus = ProbitModel::lupus(&load_lupus().unwrap(), Prior::Gaussian(1.0));
        assert!(map_newton(&lupus, &[0.0; 3], 1e-10, 50).is_ok());
    }

    #[test]
    fn lupus_map() {
        let r = map_newton(&lupus_flat(), &[0.0; 3], 1e-8, 50).unwrap();
        assert!(r.grad_norm <= 1e-8);
        let fixture = [-1.7775, 4.3739, 2.4283];
        for j in 0..3 {
            assert!((r.mode[j] - fixture[j]).abs() < 1e-3, "{:?}", r.mode);
        }
    }

    #[test]
    fn weight_at_mode_and_xi_shift() {
        let m = lupus_flat();
        let r = map_newton(&m, &[0.0; 3], 1e-8, 50).unwrap();
        let p = LaplaceProposal::from_map(&r, 5.0, 2.0).unwrap();
        let cov = p.covariance();
        let expect = 2.0 + m.log_posterior(&r.mode) + 0.5 * (2.0 * PI * cov).determinant().ln();
        assert!((rrs_weight_probit(&m, &p, &r.mode).ln() - expect).abs() < 1e-10);
        let p0 = LaplaceProposal::from_map(&r, 5.0, 0.0).unwrap();
        let b = [-1.0, 3.0, 2.0];
        let ratio = rrs_weight_probit(&m, &p, &b) / rrs_weight_probit(&m, &p0, &b);
        assert!((ratio.ln() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn summary_basics() {
        let s = posterior_summary(&[1.5; 10], 1).unwrap();
        assert_eq!(s[0].sd, 0.0);
        assert_eq!(s[0].q1, s[0].q3);
        let alt: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(posterior_summary(&alt, 1).unwrap()[0].median, 0.0);
    }
}
