//! `storesize` command-line front end.
//!
//! [`run`] parses arguments, merges an optional JSON scenario file, runs one
//! task and writes a single table. Exit codes: 0 on success, 2 for invalid
//! input, 3 for numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::Parser;

mod args;
mod commands;
pub mod config;
pub mod output;

use args::{Cli, Command, OutputArgs};
use config::{resolve, Resolved};
use output::{emit, Metadata};

/// Version string stamped into every row.
pub const VERSION: &str = concat!("storesize ", env!("CARGO_PKG_VERSION"));

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Core(#[from] storesize::Error),
}

impl CliError {
    pub fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        CliError::Invalid {
            field,
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_INVALID,
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("STORESIZE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::invalid(
            "STORESIZE_THREADS",
            format!("expected a positive integer, got `{raw}`"),
        )
    })?;
    // A pool configured earlier in this process is kept.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn execute(command: Command) -> Result<(commands::Outcome, Resolved, &'static str), CliError> {
    fn prep<T: serde::Serialize>(a: &T, out: &OutputArgs) -> Result<Resolved, CliError> {
        resolve(out.config.as_deref(), a)
    }
    let (name, resolved) = match &command {
        Command::Size(a) => ("size", prep(a, &a.output)?),
        Command::Outage(a) => ("outage", prep(a, &a.output)?),
        Command::Capacity(a) => ("capacity", prep(a, &a.output)?),
        Command::Contour(a) => ("contour", prep(a, &a.output)?),
        Command::Sweep(a) => ("sweep", prep(a, &a.output)?),
        Command::Simulate(a) => ("simulate", prep(a, &a.output)?),
        Command::Asymptotic(a) => ("asymptotic", prep(a, &a.output)?),
        Command::Compare(a) => ("compare", prep(a, &a.output)?),
        Command::Units(a) => ("units", prep(a, &a.output)?),
    };
    let cfg = &resolved.config;
    let outcome = match command {
        Command::Size(_) => commands::size(cfg),
        Command::Outage(_) => commands::outage(cfg),
        Command::Capacity(_) => commands::capacity(cfg),
        Command::Contour(_) => commands::contour_cmd(cfg),
        Command::Sweep(_) => commands::sweep_cmd(cfg),
        Command::Simulate(_) => commands::simulate_cmd(cfg),
        Command::Asymptotic(_) => commands::asymptotic_cmd(cfg),
        Command::Compare(_) => commands::compare_cmd(cfg),
        Command::Units(_) => commands::units_cmd(cfg),
    }?;
    Ok((outcome, resolved, name))
}

fn report(err: &CliError) -> i32 {
    eprintln!("error: {err}");
    err.exit_code()
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();

    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    if let Err(e) = configure_threads() {
        return report(&e);
    }

    let (outcome, resolved, name) = match execute(cli.command) {
        Ok(v) => v,
        Err(e) => return report(&e),
    };

    let meta = Metadata {
        version: VERSION.to_string(),
        command: name.to_string(),
        config: resolved.to_json(),
        overrides: resolved.overrides.clone(),
    };
    let format = resolved.config.format.unwrap_or_default();
    let path = resolved.config.output.as_deref();
    let stdout_body = match emit(&outcome.table, &meta, format, path) {
        Ok(b) => b,
        Err(e) => return report(&e),
    };

    let mut stdout = std::io::stdout().lock();
    match stdout_body {
        Some(body) => {
            let _ = stdout.write_all(&body);
            eprintln!("{}", outcome.summary);
        }
        None => {
            let dest = path
                .map(Path::display)
                .map(|d| d.to_string())
                .unwrap_or_default();
            let _ = writeln!(stdout, "{} -> {dest}", outcome.summary);
        }
    }
    for o in &resolved.overrides {
        log::info!("override {o}");
    }

    match outcome.total_failure {
        Some(e) => report(&e),
        None => EXIT_OK,
    }
}
