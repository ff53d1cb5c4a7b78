use super::args::{CouplingArgs, FamilyName, RenewalArgs};
use super::output::{Check, Kind, Report, RunReport, Table};
use super::{new_report, nonzero, positive, CliError, Ctx, TAG_RENEWAL, TAG_RENEWAL_TV};
use crate::coupling::{coupling_runs, inequality_rows, sigma_gof, tail_log_slope, tail_window, Family};
use crate::dists::exp_draw;
use crate::quadrature::{integrate, integrate_to_inf};
use crate::renewal::{
    gamma2_oracle, gamma2_residual_tv_from_ages, poisson_oracle, richardson_ratio, state_only, zero_delay,
    ConvolutionRule, Interarrival, RenewalState,
};
use crate::rng::stream_id;
use crate::stats::{ks_statistic, mean};
use crate::RandomStream;
use rayon::prelude::*;
use serde_json::json;

pub fn renewal_verify(a: &RenewalArgs, ctx: &Ctx) -> Result<Report, CliError> {
    let lam = positive("lambda", a.lambda)?;
    let horizon = positive("horizon", a.horizon)?;
    let h = positive("grid-step", a.grid_step)?;
    nonzero("traces", a.traces)?;
    nonzero("tv-traces", a.tv_traces)?;
    for &t in &a.tv_grid {
        positive("tv-grid", t)?;
    }
    let seed = ctx.seed;
    let mut table = Table::new(
        "checks",
        &[
            ("check_name", Kind::Str),
            ("t", Kind::Float),
            ("empirical", Kind::Float),
            ("oracle", Kind::Float),
            ("abs_error", Kind::Float),
            ("tolerance", Kind::Float),
            ("pass", Kind::Bool),
        ],
    );
    let mut checks = Vec::new();
    let mut row = |name: &str, t: f64, emp: f64, oracle: f64, tol: f64| {
        let err = (emp - oracle).abs();
        let pass = err <= tol;
        table.push(vec![
            name.into(),
            t.into(),
            emp.into(),
            oracle.into(),
            err.into(),
            tol.into(),
            pass.into(),
        ]);
        checks.push(Check::new(
            format!("{name}@t={t}"),
            pass,
            format!("empirical {emp:.6e}, oracle {oracle:.6e}, tolerance {tol:.3e}"),
        ));
    };

    // Poisson: counts and residual life at the horizon.
    let states: Vec<RenewalState> = (0..a.traces as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = RandomStream::new(seed, stream_id(TAG_RENEWAL, i));
            state_only(|s| exp_draw(s, lam), zero_delay, horizon, &mut s)
        })
        .collect::<crate::Result<_>>()?;
    let n = states.len() as f64;
    let counts: Vec<f64> = states.iter().map(|s| s.n as f64).collect();
    let oracle = poisson_oracle(lam);
    row(
        "poisson_mean_count",
        horizon,
        mean(&counts),
        oracle.renewal_function(horizon),
        4.0 * (lam * horizon / n).sqrt(),
    );
    let residuals: Vec<f64> = states.iter().map(|s| s.residual).collect();
    row(
        "poisson_residual_ks",
        horizon,
        ks_statistic(&residuals, |x| oracle.residual_cdf(x)),
        0.0,
        1.63 / n.sqrt(),
    );

    // Gamma(2): residual-life law against its stationary limit.
    let g2 = gamma2_oracle(lam);
    let law = Interarrival::Gamma2 { rate: lam };
    for (k, &t) in a.tv_grid.iter().enumerate() {
        let tv = g2.tv(t).unwrap_or_else(|| g2.tv_quadrature(t));
        let d = |x: f64| (g2.residual_density(t, x) - g2.f0_density(x)).abs();
        let l1 = integrate(d, 0.0, 1.0 / lam, 1e-16, 1e-13) + integrate_to_inf(d, 1.0 / lam, 1e-16, 1e-13);
        row("gamma2_l1_vs_2tv", t, l1, 2.0 * tv, 1e-6);
        let ages: Vec<f64> = (0..a.tv_traces as u64)
            .into_par_iter()
            .map(|i| {
                let mut s = RandomStream::new(seed, stream_id(TAG_RENEWAL_TV, ((k as u64) << 32) | i));
                state_only(|s| law.draw(s), zero_delay, t, &mut s).map(|st| st.elapsed)
            })
            .collect::<crate::Result<_>>()?;
        row("gamma2_residual_tv", t, gamma2_residual_tv_from_ages(&ages, lam), tv, 0.15 * tv);
    }

    // Discretized renewal equation: observed convergence order.
    let z = |t: f64| (-t).exp();
    let f = |s: f64| law.density(s).unwrap_or(0.0);
    let t_eq = 4.0;
    row(
        "richardson_left_endpoint",
        t_eq,
        richardson_ratio(z, f, h, t_eq, ConvolutionRule::LeftEndpoint),
        2.0,
        0.2,
    );
    row(
        "richardson_trapezoid",
        t_eq,
        richardson_ratio(z, f, h, t_eq, ConvolutionRule::Trapezoid),
        4.0,
        0.4,
    );

    let mut report = new_report("renewal-verify", ctx);
    let failed = checks.iter().filter(|c| !c.pass).count();
    report.summary = json!({ "checks": checks.len(), "failed": failed });
    report.checks = checks;
    report.tables.push(table);
    report.run = RunReport::new(0, (a.traces + a.tv_traces * a.tv_grid.len()) as u64);
    Ok(report)
}

pub fn coupling(a: &CouplingArgs, ctx: &Ctx) -> Result<Report, CliError> {
    let lam = positive("lambda", a.lambda)?;
    nonzero("runs", a.runs)?;
    nonzero("bins", a.bins)?;
    let fam = match a.family {
        FamilyName::Gamma2 => Family::Gamma2 { lambda: lam },
        FamilyName::Exp => Family::Exp { lambda: lam },
    };
    let (a0, b0) = fam.default_params();
    let a_off = positive("a", a.a.unwrap_or(a0))?;
    let b = positive("b", a.b.unwrap_or(b0))?;
    let runs = coupling_runs(fam, a_off, b, a.runs, ctx.seed)?;
    let times: Vec<f64> = runs.iter().map(|r| r.coupling_time).collect();
    let rows = inequality_rows(fam, &times, &a.t_grid);

    let mut table = Table::new(
        "coupling",
        &[
            ("t", Kind::Float),
            ("p_tail", Kind::Float),
            ("p_tail_stderr", Kind::Float),
            ("tv_oracle", Kind::Float),
            ("pass", Kind::Bool),
        ],
    );
    for r in &rows {
        table.push(vec![
            r.t.into(),
            r.p_tail.into(),
            r.p_tail_stderr.into(),
            r.tv.into(),
            r.pass.into(),
        ]);
    }
    let mut checks = Vec::new();
    let violations: Vec<f64> = rows.iter().filter(|r| !r.pass).map(|r| r.t).collect();
    checks.push(Check::new(
        "coupling_inequality",
        violations.is_empty(),
        format!("TV(t) <= P(T>t) + 3 stderr; violated at {violations:?}"),
    ));

    let delta = fam.delta(a_off, b);
    let (stat, dof, p) = sigma_gof(&runs, delta, a.bins);
    checks.push(Check::new(
        "sigma_geometric",
        p > 0.01,
        format!("chi2 {stat:.4} on {dof} dof, p {p:.4}, delta {delta:.6}"),
    ));

    let half = times.len() / 2;
    let window = tail_window(&times, 12);
    let slope = tail_log_slope(&times, &window, 30);
    let s1 = tail_log_slope(&times[..half], &window, 15);
    let s2 = tail_log_slope(&times[half..], &window, 15);
    let stable = match (slope, s1, s2) {
        (Some(s), Some(x), Some(y)) => s < 0.0 && x < 0.0 && y < 0.0 && (x - y).abs() <= 0.25 * s.abs(),
        _ => false,
    };
    checks.push(Check::new(
        "tail_slope",
        stable,
        format!(
            "log P(T>t) slope {slope:?} on t in [{:.2}, {:.2}], halves {s1:?} {s2:?}",
            window[0],
            window[window.len() - 1]
        ),
    ));

    let sigma_mean = mean(&runs.iter().map(|r| r.sigma as f64).collect::<Vec<_>>());
    let mut report = new_report("coupling", ctx);
    report.summary = json!({
        "a": a_off,
        "b": b,
        "delta": delta,
        "sigma_mean": sigma_mean,
        "sigma_mean_oracle": (1.0 - delta) / delta,
        "coupling_time_mean": mean(&times),
        "chi2": { "stat": stat, "dof": dof, "p": p },
        "tail_slope": slope,
        "tail_slope_halves": [s1, s2],
        "tail_window": [window[0], window[window.len() - 1]],
    });
    report.checks = checks;
    report.tables.push(table);
    report.run = RunReport::new(0, runs.len() as u64);
    Ok(report)
}
