use super::args::{Method, MomentTarget, MomentsArgs, SampleArgs, TargetName};
use super::output::{emit_table, Cell, Check, Kind, Report, RunReport, Schema, Table};
use super::{new_report, nonzero, positive, CliError, Ctx, TAG_SAMPLE};
use crate::dists::{
    ExpProposal, GammaTarget, LaplaceProduct, Proposal, Support, SyntheticTarget, Target, Truncated,
};
use crate::probit::{load_lupus, map_newton, LaplaceProposal, Prior, ProbitModel, ProbitTarget};
use crate::quadrature::{integrate_2d, integrate_to_inf};
use crate::rng::stream_id;
use crate::samplers::{
    acf, cycle_moments, gamma_exp_rrs_cdf, imh_chain, moment_stability, rejection_sample, rrs_subsampled,
    rrs_terminal, rwm_chain, threshold_select, ChainTrace,
};
use crate::stats::{autocorr_stderr, ks_statistic, mean};
use crate::RandomStream;
use rayon::prelude::*;
use serde_json::json;
use std::f64::consts::PI;

const BOX: f64 = 2.0 * PI;

/// ∫f∝ over the box, or over the plane by its radial form.
fn synthetic_mass(bounded: bool) -> f64 {
    if bounded {
        integrate_2d(SyntheticTarget::density, (-BOX, BOX), (-BOX, BOX), 1e-10)
    } else {
        2.0 * PI * integrate_to_inf(|r| r * SyntheticTarget::density(r, 0.0), 0.0, 1e-14, 1e-12)
    }
}

/// Grid maximum of f/g over the box with a 5% margin.
fn synthetic_bound<P: Proposal>(prop: &P) -> f64 {
    let k = 800;
    let step = 2.0 * BOX / k as f64;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=k {
        for j in 0..=k {
            let x = [-BOX + i as f64 * step, -BOX + j as f64 * step];
            best = best.max(SyntheticTarget::density(x[0], x[1]).ln() - prop.log_g(&x));
        }
    }
    1.05 * best.exp()
}

/// What the checks know about a target.
struct TargetInfo {
    dim: usize,
    /// ∫f∝, the mean cycle length.
    mass: f64,
    mean: Vec<f64>,
    default_t: f64,
    default_c: Option<f64>,
    default_step: f64,
    x0: Vec<f64>,
    /// CDF of the first coordinate under the target.
    cdf: Option<Box<dyn Fn(f64) -> f64 + Sync>>,
    /// CDF of the RRS output at threshold t, when known in closed form.
    rrs_cdf: Option<fn(f64, f64) -> f64>,
}

pub fn sample(a: &SampleArgs, ctx: &Ctx) -> Result<Report, CliError> {
    match a.target {
        TargetName::GammaExp => {
            let rate = match a.proposal_rate {
                Some(r) => positive("proposal-rate", r)?,
                None if matches!(a.method, Method::Rs | Method::Imh) => 0.4,
                None => 1.0,
            };
            let target = GammaTarget::new(2.0, 1.0);
            let prop = ExpProposal::new(rate);
            // sup x e^{-x} / (β e^{-βx}) = 1 / ((1-β) β e) for β < 1
            let default_c = (rate < 1.0).then(|| 1.0 / ((1.0 - rate) * rate * std::f64::consts::E));
            let info = TargetInfo {
                dim: 1,
                mass: 1.0,
                mean: vec![2.0],
                default_t: 10.0,
                default_c,
                default_step: 1.0,
                x0: vec![1.0],
                cdf: Some(Box::new(move |x| GammaTarget::new(2.0, 1.0).cdf(x))),
                rrs_cdf: (rate == 1.0).then_some(gamma_exp_rrs_cdf as fn(f64, f64) -> f64),
            };
            sample_with(a, ctx, &target, &prop, &info)
        }
        TargetName::SyntheticBounded => {
            let target = SyntheticTarget::new(true);
            let prop = Truncated::new(LaplaceProduct::new(2, 4.0), Support::cube(2, -BOX, BOX));
            let mass = synthetic_mass(true);
            let default_c = matches!(a.method, Method::Rs).then(|| synthetic_bound(&prop));
            let info = synthetic_info(mass, default_c);
            sample_with(a, ctx, &target, &prop, &info)
        }
        TargetName::SyntheticUnbounded => {
            let target = SyntheticTarget::new(false);
            let prop = LaplaceProduct::new(2, 4.0);
            let info = synthetic_info(synthetic_mass(false), None);
            sample_with(a, ctx, &target, &prop, &info)
        }
    }
}

fn synthetic_info(mass: f64, default_c: Option<f64>) -> TargetInfo {
    TargetInfo {
        dim: 2,
        mass,
        mean: vec![0.0, 0.0],
        default_t: threshold_select(10_000, 1000, 10_000, mass),
        default_c,
        default_step: 4.0,
        x0: vec![0.0, 0.0],
        cdf: None,
        rrs_cdf: None,
    }
}

fn point_columns(dim: usize) -> Vec<String> {
    (1..=dim).map(|j| format!("x{j}")).collect()
}

fn sample_with<T: Target, P: Proposal>(
    a: &SampleArgs,
    ctx: &Ctx,
    target: &T,
    prop: &P,
    info: &TargetInfo,
) -> Result<Report, CliError> {
    let seed = ctx.seed;
    let dim = info.dim;
    let names = point_columns(dim);
    let mut cols: Vec<(&str, Kind)> = names.iter().map(|n| (n.as_str(), Kind::Float)).collect();
    let mut checks = Vec::new();
    let mut summary = serde_json::Map::new();
    let stream = |i: u64| RandomStream::new(seed, stream_id(TAG_SAMPLE, i));
    let start = std::time::Instant::now();

    // Points row-major, plus per-row extra cells.
    let (points, extras, run): (Vec<f64>, Vec<Vec<Cell>>, RunReport) = match a.method {
        Method::Rs => {
            let n = nonzero("n", a.n)?;
            let c = match a.c.or(info.default_c) {
                Some(c) => positive("c", c)?,
                None => return Err(CliError::Usage("this target has no finite bound on f/g; pass --c".into())),
            };
            let draws: Vec<(Vec<f64>, u64)> = (0..n as u64)
                .into_par_iter()
                .map(|i| rejection_sample(target, prop, c, &mut stream(i)))
                .collect::<crate::Result<_>>()?;
            let trials: u64 = draws.iter().map(|d| d.1).sum();
            let acc = n as f64 / trials as f64;
            let expect = info.mass / c;
            let tol = 4.0 * (expect * (1.0 - expect) / trials as f64).sqrt();
            checks.push(Check::new(
                "acceptance",
                (acc - expect).abs() <= tol,
                format!("observed {acc:.6}, expected {expect:.6}, tolerance {tol:.2e}"),
            ));
            summary.insert("c".into(), json!(c));
            summary.insert("acceptance".into(), json!(acc));
            cols.push(("trials", Kind::Int));
            let extras = draws.iter().map(|d| vec![Cell::from(d.1)]).collect();
            let points = draws.into_iter().flat_map(|d| d.0).collect();
            (points, extras, RunReport::new(trials, n as u64))
        }
        Method::Rrs => {
            let n = nonzero("n", a.n)?;
            let t = positive("t", a.t.unwrap_or(info.default_t))?;
            let draws: Vec<_> = (0..n as u64)
                .into_par_iter()
                .map(|i| rrs_terminal(target, prop, t, &mut stream(i)))
                .collect::<crate::Result<_>>()?;
            let total: u64 = draws.iter().map(|d| d.n_draws).sum();
            summary.insert("t".into(), json!(t));
            if let Some(law) = info.rrs_cdf {
                let xs: Vec<f64> = draws.iter().map(|d| d.point[0]).collect();
                let ks = ks_statistic(&xs, |y| law(t, y));
                let tol = 1.63 / (n as f64).sqrt();
                checks.push(Check::new(
                    "ks_rrs_output_law",
                    ks <= tol,
                    format!("sup distance {ks:.5} to the closed-form output law, tolerance {tol:.5}"),
                ));
            }
            cols.push(("n_draws", Kind::Int));
            cols.push(("total_weight", Kind::Float));
            let extras = draws
                .iter()
                .map(|d| vec![Cell::from(d.n_draws), Cell::from(d.total_weight)])
                .collect();
            let points = draws.into_iter().flat_map(|d| d.point).collect();
            (points, extras, RunReport::new(total, n as u64))
        }
        Method::RrsSub => {
            let n = nonzero("n", a.n)?;
            let t = positive("t", a.t.unwrap_or(info.default_t))?;
            let run = rrs_subsampled(target, prop, t, n, &mut stream(0))?;
            summary.insert("t".into(), json!(t));
            if let Some(cdf) = &info.cdf {
                let xs: Vec<f64> = run.points.chunks(dim).map(|p| p[0]).collect();
                summary.insert("ks_target".into(), json!(ks_statistic(&xs, cdf)));
            }
            let draws = run.proposal_draws;
            (run.points, vec![Vec::new(); n], RunReport::new(draws, n as u64))
        }
        Method::Imh | Method::Rwm => {
            let steps = nonzero("steps", a.steps)?;
            let total = a.burnin + steps;
            let trace: ChainTrace = if a.method == Method::Imh {
                imh_chain(target, prop, total, &info.x0, &mut stream(0))?
            } else {
                let scale = positive("step-scale", a.step_scale.unwrap_or(info.default_step))?;
                let step = LaplaceProduct::new(dim, scale);
                rwm_chain(target, &step, total, &info.x0, &mut stream(0))?
            };
            summary.insert("acceptance_rate".into(), json!(trace.acceptance_rate));
            for j in 0..dim {
                let xs = trace.component(j, a.burnin);
                let (m, se) = (mean(&xs), autocorr_stderr(&xs));
                let err = (m - info.mean[j]).abs();
                checks.push(Check::new(
                    format!("mean_x{}", j + 1),
                    err <= 3.0 * se,
                    format!("mean {m:.5}, target {}, 3 stderr {:.5}", info.mean[j], 3.0 * se),
                ));
            }
            cols.push(("accepted", Kind::Bool));
            let extras = trace.accepts[a.burnin..].iter().map(|&b| vec![Cell::from(b)]).collect();
            let points = trace.states[a.burnin * dim..].to_vec();
            (points, extras, RunReport::new(total as u64, steps as u64))
        }
    };

    let mut table = Table::new("points", &cols);
    for (p, extra) in points.chunks(dim).zip(extras) {
        let mut row: Vec<Cell> = p.iter().map(|&x| Cell::from(x)).collect();
        row.extend(extra);
        table.push(row);
    }
    let mut report = new_report("sample", ctx);
    report.tables.push(table);
    if let Some(k) = a.emit_acf {
        report.tables.push(acf_table(&points, dim, k)?);
    }
    let mut run = run;
    if ctx.timing {
        run = run.with_wall(start.elapsed().as_secs_f64());
    }
    report.run = run;
    report.checks = checks;
    report.summary = serde_json::Value::Object(summary);
    Ok(report)
}

/// ACF of each coordinate of row-major points.
pub(super) fn acf_table(points: &[f64], dim: usize, max_lag: usize) -> Result<Table, CliError> {
    let names: Vec<String> = point_columns(dim);
    let mut cols = vec![("lag", Kind::Int)];
    cols.extend(names.iter().map(|n| (n.as_str(), Kind::Float)));
    let series: Vec<Vec<f64>> = (0..dim)
        .map(|j| acf(&points.iter().skip(j).step_by(dim).copied().collect::<Vec<_>>(), max_lag))
        .collect::<crate::Result<_>>()?;
    let mut t = Table::new("acf", &cols);
    for k in 0..=max_lag {
        let mut row = vec![Cell::from(k)];
        row.extend(series.iter().map(|s| Cell::from(s[k])));
        t.push(row);
    }
    Ok(t)
}

pub fn moments(a: &MomentsArgs, ctx: &Ctx) -> Result<Report, CliError> {
    let m = a.m;
    if m < 1000 {
        return Err(CliError::Usage("--M must be at least 1000".into()));
    }
    nonzero("batches", a.batches)?;
    nonzero("n-target", a.n_target)?;
    nonzero("n-sub", a.n_sub)?;
    let (cm, oracle) = match a.target {
        MomentTarget::GammaExp => {
            let shape = positive("shape", a.shape)?;
            let rate = positive("proposal-rate", a.proposal_rate)?;
            let cm = cycle_moments(&GammaTarget::new(shape, 1.0), &ExpProposal::new(rate), m, ctx.seed)?;
            (cm, Some(1.0))
        }
        MomentTarget::SyntheticBounded => {
            let prop = Truncated::new(LaplaceProduct::new(2, 4.0), Support::cube(2, -BOX, BOX));
            let cm = cycle_moments(&SyntheticTarget::new(true), &prop, m, ctx.seed)?;
            (cm, Some(synthetic_mass(true)))
        }
        MomentTarget::SyntheticUnbounded => {
            let cm = cycle_moments(&SyntheticTarget::new(false), &LaplaceProduct::new(2, 4.0), m, ctx.seed)?;
            (cm, Some(synthetic_mass(false)))
        }
        MomentTarget::Probit => {
            let model = ProbitModel::lupus(&load_lupus()?, Prior::Flat);
            let map = map_newton(&model, &[0.0; 3], 1e-10, 100)?;
            let prop = LaplaceProposal::from_map(&map, positive("alpha2", a.alpha2)?, a.xi)?;
            let target = ProbitTarget { model: &model, xi: a.xi };
            (cycle_moments(&target, &prop, m, ctx.seed)?, None)
        }
    };
    let stab = moment_stability(&cm.weights, a.batches);
    let t_sel = threshold_select(a.n_target, a.burnin, a.n_sub, cm.mu);

    let mut checks = vec![Check::new(
        "jensen",
        cm.mu2 >= cm.mu * cm.mu,
        format!("mu2 {:.6e} >= mu^2 {:.6e}", cm.mu2, cm.mu * cm.mu),
    )];
    if let (Some(o), true) = (oracle, stab.stable) {
        let tol = 4.0 * cm.stderr[0];
        checks.push(Check::new(
            "mean_cycle_vs_quadrature",
            (cm.mu - o).abs() <= tol,
            format!("mu {:.6}, quadrature {o:.6}, 4 stderr {tol:.2e}", cm.mu),
        ));
    }

    let mut table = Table::new(
        "moments",
        &[
            ("mu", Kind::Float),
            ("mu2", Kind::Float),
            ("mu3", Kind::Float),
            ("stderr_mu", Kind::Float),
            ("stderr_mu2", Kind::Float),
            ("stderr_mu3", Kind::Float),
            ("n_samples", Kind::Int),
            ("batch_cv", Kind::Float),
            ("stable", Kind::Bool),
            ("t_selected", Kind::Float),
        ],
    );
    table.push(vec![
        cm.mu.into(),
        cm.mu2.into(),
        cm.mu3.into(),
        cm.stderr[0].into(),
        cm.stderr[1].into(),
        cm.stderr[2].into(),
        cm.n_samples.into(),
        stab.batch_cv.into(),
        stab.stable.into(),
        t_sel.into(),
    ]);
    if let Some(path) = &a.dump_w {
        let rows: Vec<Vec<Cell>> = cm.weights.iter().map(|&w| vec![Cell::from(w)]).collect();
        emit_table(&rows, &Schema::new(&[("w", Kind::Float)]), path)?;
    }
    let mut report = new_report("moments", ctx);
    report.summary = json!({
        "mu": cm.mu,
        "mu2": cm.mu2,
        "mu3": cm.mu3,
        "stderr": cm.stderr,
        "n_samples": cm.n_samples,
        "batch_cv": stab.batch_cv,
        "stable": stab.stable,
        "t_selected": t_sel,
        "mu_quadrature": oracle,
    });
    report.checks = checks;
    report.tables.push(table);
    report.run = RunReport::new(m as u64, m as u64);
    Ok(report)
}
