use super::args::{BenchArgs, BenchTask, ProbitArgs, ProbitMethod};
use super::output::{Check, Kind, Report, RunReport, Table};
use super::sampling::acf_table;
use super::{new_report, nonzero, positive, CliError, Ctx, TAG_BENCH, TAG_PROBIT};
use crate::probit::{
    gibbs_probit, load_lupus, map_newton, parse_lupus, posterior_summary, LaplaceProposal, MapResult, Prior,
    ProbitModel, ProbitTarget,
};
use crate::rng::stream_id;
use crate::samplers::{acf, cycle_moments, rrs_subsampled, threshold_select};
use crate::RandomStream;
use serde_json::json;
use std::path::Path;
use std::time::Instant;

const MAP_TOL: f64 = 1e-10;
const MAP_ITER: usize = 100;

fn load_model(data: Option<&Path>, prior: Prior) -> Result<ProbitModel, CliError> {
    let d = match data {
        Some(p) => parse_lupus(&std::fs::read_to_string(p)?)?,
        None => load_lupus()?,
    };
    Ok(ProbitModel::lupus(&d, prior))
}

/// Samples kept, row-major, plus proposal draws or Gibbs sweeps spent.
struct Draws {
    points: Vec<f64>,
    cost: u64,
}

fn run_rrs(model: &ProbitModel, prop: &LaplaceProposal, xi: f64, t: f64, n: usize, s: &mut RandomStream) -> Result<Draws, CliError> {
    let target = ProbitTarget { model, xi };
    let run = rrs_subsampled(&target, prop, t, n, s)?;
    Ok(Draws {
        points: run.points,
        cost: run.proposal_draws,
    })
}

fn run_gibbs(model: &ProbitModel, map: &MapResult, burnin: usize, n: usize, s: &mut RandomStream) -> Result<Draws, CliError> {
    let trace = gibbs_probit(model, &map.mode, burnin + n, s)?;
    let k = trace.dim;
    Ok(Draws {
        points: trace.states[burnin * k..].to_vec(),
        cost: (burnin + n) as u64,
    })
}

/// Threshold from the estimated mean cycle length.
fn auto_threshold(
    model: &ProbitModel,
    prop: &LaplaceProposal,
    xi: f64,
    n: usize,
    burnin: usize,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64), CliError> {
    let target = ProbitTarget { model, xi };
    let cm = cycle_moments(&target, prop, draws.max(1000), seed)?;
    Ok((threshold_select(n, burnin, n, cm.mu), cm.mu))
}

pub fn probit(a: &ProbitArgs, ctx: &Ctx) -> Result<Report, CliError> {
    let n = nonzero("N", a.n)?;
    if n < 2 {
        return Err(CliError::Usage("--N must be at least 2".into()));
    }
    let alpha2 = positive("alpha2", a.alpha2)?;
    if !a.xi.is_finite() {
        return Err(CliError::Usage("--xi must be finite".into()));
    }
    let model = load_model(a.data.as_deref(), a.prior.0)?;
    let k = model.k();
    if k != 3 {
        return Err(CliError::Usage(format!("expected 3 coefficients, model has {k}")));
    }
    let map = map_newton(&model, &vec![0.0; k], MAP_TOL, MAP_ITER)?;
    let start = Instant::now();

    let mut summary = json!({
        "method": match a.method { ProbitMethod::Rrs => "rrs", ProbitMethod::Gibbs => "gibbs" },
        "map": map.mode,
        "map_iterations": map.iterations,
        "map_grad_norm": map.grad_norm,
    });
    let draws = match a.method {
        ProbitMethod::Rrs => {
            let prop = LaplaceProposal::from_map(&map, alpha2, a.xi)?;
            let t = match a.t {
                Some(t) => positive("t", t)?,
                None => {
                    let (t, mu) = auto_threshold(&model, &prop, a.xi, n, a.burnin, a.moment_draws, ctx.seed)?;
                    summary["mu_w"] = json!(mu);
                    t
                }
            };
            summary["t"] = json!(t);
            let mut s = RandomStream::new(ctx.seed, stream_id(TAG_PROBIT, 0));
            run_rrs(&model, &prop, a.xi, t, n, &mut s)?
        }
        ProbitMethod::Gibbs => {
            let mut s = RandomStream::new(ctx.seed, stream_id(TAG_PROBIT, 1));
            run_gibbs(&model, &map, a.burnin, n, &mut s)?
        }
    };
    let wall = start.elapsed().as_secs_f64();
    let post = posterior_summary(&draws.points, k)?;
    summary["posterior"] = json!(post);
    let lags: Vec<usize> = [10, 100].into_iter().filter(|&l| l < n / 4).collect();
    let acf_at: Vec<serde_json::Value> = (0..k)
        .map(|j| {
            let col: Vec<f64> = draws.points.iter().skip(j).step_by(k).copied().collect();
            let r = acf(&col, lags.last().copied().unwrap_or(0))?;
            Ok(json!(lags.iter().map(|&l| (l.to_string(), json!(r[l]))).collect::<serde_json::Map<_, _>>()))
        })
        .collect::<crate::Result<_>>()?;
    summary["acf"] = json!(acf_at);

    let mut table = Table::new(
        "samples",
        &[("intercept", Kind::Float), ("igg_diff", Kind::Float), ("iga", Kind::Float)],
    );
    for p in draws.points.chunks_exact(k) {
        table.push(vec![p[0].into(), p[1].into(), p[2].into()]);
    }

    let mut report = new_report("probit", ctx);
    report.checks.push(Check::new(
        "map_gradient",
        map.grad_norm <= 1e-8,
        format!("max |grad| at mode {:.3e} after {} Newton steps", map.grad_norm, map.iterations),
    ));
    report.summary = summary;
    report.tables.push(table);
    if let Some(lag) = a.emit_acf {
        report.tables.push(acf_table(&draws.points, k, lag)?);
    }
    let mut run = RunReport::new(draws.cost, n as u64);
    if ctx.timing {
        run = run.with_wall(wall);
    }
    report.run = run;
    Ok(report)
}

pub fn bench(a: &BenchArgs, ctx: &Ctx) -> Result<Report, CliError> {
    let BenchTask::Probit = a.task;
    let reps = nonzero("reps", a.reps)?;
    let n = nonzero("N", a.n)?;
    let alpha2 = positive("alpha2", a.alpha2)?;
    if a.method.is_empty() {
        return Err(CliError::Usage("--method list is empty".into()));
    }
    let model = load_model(None, Prior::Flat)?;
    let map = map_newton(&model, &[0.0; 3], MAP_TOL, MAP_ITER)?;
    let prop = LaplaceProposal::from_map(&map, alpha2, a.xi)?;
    // Threshold selection is setup, not sampling, and stays outside the clock.
    let (t, mu) = auto_threshold(&model, &prop, a.xi, n, a.burnin, a.moment_draws, ctx.seed)?;

    let mut table = Table::new(
        "bench",
        &[
            ("method", Kind::Str),
            ("reps", Kind::Int),
            ("samples_emitted", Kind::Int),
            ("proposal_draws", Kind::Int),
            ("wall_seconds", Kind::Float),
            ("samples_per_second", Kind::Float),
        ],
    );
    let mut rates = Vec::new();
    let (mut total_cost, mut total_samples) = (0u64, 0u64);
    for (mi, &m) in a.method.iter().enumerate() {
        let mut cost = 0u64;
        let start = Instant::now();
        for rep in 0..reps as u64 {
            let mut s = RandomStream::new(ctx.seed, stream_id(TAG_BENCH, ((mi as u64) << 32) | rep));
            let d = match m {
                ProbitMethod::Rrs => run_rrs(&model, &prop, a.xi, t, n, &mut s)?,
                ProbitMethod::Gibbs => run_gibbs(&model, &map, a.burnin, n, &mut s)?,
            };
            cost += d.cost;
        }
        let wall = start.elapsed().as_secs_f64();
        let emitted = (reps * n) as u64;
        let rate = emitted as f64 / wall;
        let name = match m {
            ProbitMethod::Rrs => "rrs",
            ProbitMethod::Gibbs => "gibbs",
        };
        table.push(vec![name.into(), reps.into(), emitted.into(), cost.into(), wall.into(), rate.into()]);
        rates.push((m, wall / reps as f64));
        total_cost += cost;
        total_samples += emitted;
    }

    let mut report = new_report("bench", ctx);
    let per_run = |m: ProbitMethod| rates.iter().find(|r| r.0 == m).map(|r| r.1);
    if let (Some(r), Some(g)) = (per_run(ProbitMethod::Rrs), per_run(ProbitMethod::Gibbs)) {
        report.checks.push(Check::new(
            "rrs_faster_than_gibbs",
            r < g,
            format!("mean seconds per run: rrs {r:.4e}, gibbs {g:.4e}"),
        ));
        report.summary = json!({ "t": t, "mu_w": mu, "rrs_seconds": r, "gibbs_seconds": g, "speedup": g / r });
    } else {
        report.summary = json!({ "t": t, "mu_w": mu });
    }
    report.tables.push(table);
    report.run = RunReport::new(total_cost, total_samples);
    Ok(report)
}
