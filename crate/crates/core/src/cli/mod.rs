//! Batch experiment runner behind the `regensim` binary.
//!
//! Each subcommand builds a [`Report`]: resolved config, seed, pass/fail
//! checks, a JSON summary and one or more tables. Reports render as CSV with a
//! `#` preamble or as a single JSON document, and are written atomically.
//! Exit status is 0 when every check passes, 1 when one fails or the run
//! errors, 2 on usage errors.

pub mod args;
pub mod config;
pub mod output;

mod estimation;
mod probit_cmd;
mod renewal_cmd;
mod sampling;

use crate::Error;
use args::{Cli, Command, Format, HName};
use clap::Parser;
use output::Report;
use std::ffi::OsString;
use std::fmt;
use std::io::{self, Write};

pub use args::GlobalArgs;

// Stream tags for the subcommands; the library claims its own.
const TAG_RENEWAL: u16 = 0x2e;
const TAG_RENEWAL_TV: u16 = 0x2f;
const TAG_SAMPLE: u16 = 0x5a;
const TAG_ESTIMATE: u16 = 0xe5;
const TAG_PROBIT: u16 = 0x9b;
const TAG_BENCH: u16 = 0xbe;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
    Io(io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Run(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => CliError::Usage(m),
            Error::DataIntegrity(m) => CliError::Usage(format!("data: {m}")),
            e => CliError::Run(e),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Per-run settings shared by every subcommand.
#[derive(Clone, Copy, Debug)]
pub struct Ctx {
    pub seed: u64,
    pub timing: bool,
}

/// Parse `argv`, run the subcommand, write its output and return the exit
/// status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match config::merge_config(argv) {
        Ok(a) => a,
        Err(m) => {
            eprintln!("error: {m}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.global.workers.get()).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 1;
        }
    };
    let ctx = Ctx {
        seed: cli.global.seed,
        timing: cli.global.timing,
    };
    let result = pool.install(|| dispatch(&cli.command, &ctx));
    let report = match result {
        Ok(mut r) => {
            r.config = resolved_config(&cli);
            r
        }
        Err(e) => {
            eprintln!("error: {e}");
            return if matches!(e, CliError::Usage(_)) { 2 } else { 1 };
        }
    };
    for c in &report.checks {
        let status = if c.pass { "pass" } else { "FAIL" };
        eprintln!("{status} {}: {}", c.name, c.detail);
    }
    if let Err(e) = write_report(&report, &cli.global) {
        eprintln!("error: writing output: {e}");
        return 1;
    }
    if report.passed() {
        0
    } else {
        1
    }
}

fn dispatch(cmd: &Command, ctx: &Ctx) -> Result<Report, CliError> {
    match cmd {
        Command::RenewalVerify(a) => renewal_cmd::renewal_verify(a, ctx),
        Command::Coupling(a) => renewal_cmd::coupling(a, ctx),
        Command::Sample(a) => sampling::sample(a, ctx),
        Command::Moments(a) => sampling::moments(a, ctx),
        Command::BiasSweep(a) => estimation::bias_sweep(a, ctx),
        Command::Estimate(a) => estimation::estimate(a, ctx),
        Command::Probit(a) => probit_cmd::probit(a, ctx),
        Command::Bench(a) => probit_cmd::bench(a, ctx),
    }
}

/// Everything that can change the output. Worker count and output path are
/// left out since they cannot.
fn resolved_config(cli: &Cli) -> serde_json::Value {
    serde_json::json!({
        "command": cli.command.name(),
        "seed": cli.global.seed,
        "format": cli.global.format,
        "timing": cli.global.timing,
        "args": cli.command.config_json(),
    })
}

fn write_report(report: &Report, g: &GlobalArgs) -> io::Result<()> {
    let bytes = match g.format {
        Format::Csv => report.render_csv()?,
        Format::Json => report.render_json()?,
    };
    match &g.out {
        Some(p) => output::write_atomic(p, &bytes),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(&bytes)?;
            out.flush()
        }
    }
}

fn new_report(command: &'static str, ctx: &Ctx) -> Report {
    Report {
        command,
        config: serde_json::Value::Null,
        seed: ctx.seed,
        checks: Vec::new(),
        summary: serde_json::Value::Null,
        tables: Vec::new(),
        run: output::RunReport::default(),
    }
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Usage(format!("--{name} must be positive and finite, got {x}")))
    }
}

fn nonzero(name: &str, n: usize) -> Result<usize, CliError> {
    if n > 0 {
        Ok(n)
    } else {
        Err(CliError::Usage(format!("--{name} must be at least 1")))
    }
}

fn h_value(h: HName, x: f64) -> f64 {
    match h {
        HName::Id => x,
        HName::Tanh => x.tanh(),
        HName::Logistic => 1.0 / (1.0 + (-x).exp()),
        HName::Tail1 => {
            if x > 1.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

fn h_bound(h: HName) -> Option<f64> {
    match h {
        HName::Id => None,
        _ => Some(1.0),
    }
}

/// E[h(X)] for X ~ Gamma(2,1), split at the indicator's jump.
fn h_mean_gamma2(h: HName) -> f64 {
    use crate::quadrature::{integrate, integrate_to_inf};
    let f = move |x: f64| h_value(h, x) * x * (-x).exp();
    integrate(f, 0.0, 1.0, 1e-15, 1e-13) + integrate_to_inf(f, 1.0, 1e-15, 1e-13)
}
