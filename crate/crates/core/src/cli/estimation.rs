use super::args::{BiasSweepArgs, EstimateArgs};
use super::output::{Check, Kind, Report, RunReport, Table};
use super::{h_bound, h_mean_gamma2, h_value, new_report, nonzero, positive, CliError, Ctx, TAG_ESTIMATE};
use crate::dists::{ExpProposal, GammaTarget};
use crate::estimators::{self, bias_sweep as sweep, loglog_slope, mcmc_bias_reference};
use crate::rng::stream_id;
use crate::samplers::{cycle_moments, rrs_path};
use crate::stats::mean;
use crate::RandomStream;
use rayon::prelude::*;
use serde_json::json;

/// Slope of |bias| on t within [10, 100], when at least two grid points fall
/// there.
fn slope_in_window(ts: &[f64], bias: &[f64]) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = ts
        .iter()
        .zip(bias)
        .filter(|(t, _)| (10.0..=100.0).contains(*t))
        .map(|(&t, &b)| (t, b.abs()))
        .unzip();
    (x.len() >= 2).then(|| loglog_slope(&x, &y))
}

pub fn bias_sweep(a: &BiasSweepArgs, ctx: &Ctx) -> Result<Report, CliError> {
    let k = h_bound(a.h).ok_or_else(|| CliError::Usage("--h must be bounded: tanh, logistic or tail1".into()))?;
    nonzero("M", a.m)?;
    if a.t_grid.is_empty() {
        return Err(CliError::Usage("--t-grid is empty".into()));
    }
    for &t in &a.t_grid {
        positive("t-grid", t)?;
    }
    let h = a.h;
    let hf = move |x: &[f64]| h_value(h, x[0]);
    let target = GammaTarget::new(2.0, 1.0);
    let prop = ExpProposal::new(1.0);
    let q = h_mean_gamma2(h);
    let moments = cycle_moments(&target, &prop, a.moment_draws.max(1000), ctx.seed)?;
    let rows = sweep(&target, &prop, hf, k, &a.t_grid, a.m, ctx.seed, q, &moments)?;

    let mut table = Table::new(
        "bias",
        &[
            ("t", Kind::Float),
            ("bias_qt", Kind::Float),
            ("bias_drop", Kind::Float),
            ("bound", Kind::Float),
            ("stderr", Kind::Float),
            ("stderr_drop", Kind::Float),
            ("pass", Kind::Bool),
        ],
    );
    let mut checks = Vec::new();
    for r in &rows {
        table.push(vec![
            r.t.into(),
            r.bias_fixed_time.into(),
            r.bias_drop_last.into(),
            r.bound.into(),
            r.stderr_fixed_time.into(),
            r.stderr_drop_last.into(),
            r.pass.into(),
        ]);
        checks.push(Check::new(
            format!("bias_below_bound@t={}", r.t),
            r.pass,
            format!("|bias| {:.3e} vs bound {:.3e}", r.bias_fixed_time.abs(), r.bound),
        ));
    }
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let fixed: Vec<f64> = rows.iter().map(|r| r.bias_fixed_time).collect();
    let drop: Vec<f64> = rows.iter().map(|r| r.bias_drop_last).collect();
    let slope_fixed = slope_in_window(&ts, &fixed);
    let slope_drop = slope_in_window(&ts, &drop);
    if let Some(s) = slope_fixed {
        checks.push(Check::new(
            "slope_fixed_time",
            (s + 2.0).abs() <= 0.4,
            format!("log-log slope {s:.3} on t in [10,100], expected -2 +- 0.4"),
        ));
    }
    if let Some(s) = slope_drop {
        checks.push(Check::new(
            "slope_drop_last",
            (s + 1.0).abs() <= 0.4,
            format!("log-log slope {s:.3} on t in [10,100], expected -1 +- 0.4"),
        ));
    }

    let mut report = new_report("bias-sweep", ctx);
    let mut summary = json!({
        "q": q,
        "K": k,
        "moments": { "mu": moments.mu, "mu2": moments.mu2, "mu3": moments.mu3 },
        "slope_fixed_time": slope_fixed,
        "slope_drop_last": slope_drop,
    });
    report.tables.push(table);

    if !a.mcmc_grid.is_empty() {
        if a.mcmc_grid.contains(&0) {
            return Err(CliError::Usage("--mcmc-grid entries must be positive".into()));
        }
        let chains = nonzero("mcmc-m", a.mcmc_m.unwrap_or(a.m))?;
        let imh_prop = ExpProposal::new(0.4);
        let c = 1.0 / (0.6 * 0.4 * std::f64::consts::E);
        let mrows = mcmc_bias_reference(&target, &imh_prop, c, &[a.mcmc_x0], hf, &a.mcmc_grid, chains, ctx.seed)?;
        let mut mt = Table::new("mcmc", &[("n", Kind::Int), ("bias", Kind::Float), ("stderr", Kind::Float)]);
        for r in &mrows {
            mt.push(vec![r.n.into(), r.bias.into(), r.stderr.into()]);
        }
        if mrows.len() >= 2 {
            let x: Vec<f64> = mrows.iter().map(|r| r.n as f64).collect();
            let y: Vec<f64> = mrows.iter().map(|r| r.bias.abs()).collect();
            let s = loglog_slope(&x, &y);
            checks.push(Check::new(
                "slope_mcmc",
                (s + 1.0).abs() <= 0.4,
                format!("log-log slope {s:.3}, expected -1 +- 0.4"),
            ));
            summary["slope_mcmc"] = json!(s);
        }
        report.tables.push(mt);
    }
    report.summary = summary;
    report.checks = checks;
    report.run = RunReport::new(0, (a.m * a.t_grid.len()) as u64);
    Ok(report)
}

pub fn estimate(a: &EstimateArgs, ctx: &Ctx) -> Result<Report, CliError> {
    let t = positive("t", a.t)?;
    let reps = nonzero("replicates", a.replicates)?;
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(CliError::Usage(format!("--level must lie in (0, 1), got {}", a.level)));
    }
    let h = a.h;
    let hf = move |x: &[f64]| h_value(h, x[0]);
    let target = GammaTarget::new(2.0, 1.0);
    let prop = ExpProposal::new(1.0);
    let q = h_mean_gamma2(h);
    let moments = match h_bound(h) {
        Some(_) => Some(cycle_moments(&target, &prop, a.moment_draws.max(1000), ctx.seed)?),
        None => None,
    };
    let bound = h_bound(h).zip(moments.as_ref());
    let results: Vec<(estimators::RatioEstimate, u64)> = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = RandomStream::new(ctx.seed, stream_id(TAG_ESTIMATE, i));
            let path = rrs_path(&target, &prop, t, &mut s)?;
            let draws = path.len() as u64;
            estimators::estimate(&path, hf, a.level, bound).map(|e| (e, draws))
        })
        .collect::<crate::Result<_>>()?;
    let draws: u64 = results.iter().map(|r| r.1).sum();

    let mut report = new_report("estimate", ctx);
    let mut table = Table::new(
        "estimates",
        &[
            ("replicate", Kind::Int),
            ("value", Kind::Float),
            ("n_cycles", Kind::Int),
            ("sigma2", Kind::Float),
            ("eta2", Kind::Float),
            ("s2", Kind::Float),
            ("ci_lo", Kind::Float),
            ("ci_hi", Kind::Float),
            ("covers_q", Kind::Bool),
        ],
    );
    for (i, (e, _)) in results.iter().enumerate() {
        table.push(vec![
            i.into(),
            e.value.into(),
            e.n_cycles.into(),
            e.sigma2.into(),
            e.eta2.into(),
            e.s2.into(),
            e.ci.lo.into(),
            e.ci.hi.into(),
            (e.ci.lo <= q && q <= e.ci.hi).into(),
        ]);
    }
    let covered = results.iter().filter(|(e, _)| e.ci.lo <= q && q <= e.ci.hi).count();
    let coverage = covered as f64 / reps as f64;
    if reps == 1 {
        report.summary = serde_json::to_value(&results[0].0).expect("estimate serializes");
        report.summary["q"] = json!(q);
    } else {
        let values: Vec<f64> = results.iter().map(|(e, _)| e.value).collect();
        report.summary = json!({
            "q": q,
            "replicates": reps,
            "mean_value": mean(&values),
            "coverage": coverage,
            "level": a.level,
        });
        if reps >= 100 {
            let (lo, hi) = (a.level - 0.03, a.level + 0.02);
            report.checks.push(Check::new(
                "coverage",
                (lo..=hi).contains(&coverage),
                format!("{covered}/{reps} intervals cover q = {q:.6}; band [{lo:.2}, {hi:.2}]"),
            ));
        }
    }
    report.tables.push(table);
    report.run = RunReport::new(draws, reps as u64);
    Ok(report)
}
