//! Command-line harness for the lattice tensor experiments: storage and
//! rank tables, dominant/minimal/generalized eigenvalue sweeps and bounds.
//!
//! Every command writes a header row followed by one row per grid cell in
//! `(n, d)` order, so a fixed `--seed` gives byte-identical output.

pub mod cache;
pub mod commands;
pub mod config;
pub mod selftest;

use std::io::Write;

use anyhow::{Context, Result};

pub use commands::Report;
pub use config::{Cli, Command, ExperimentSpec, Kind, Opts};

/// Runs a parsed command line; returns the process exit code.
pub fn main_with(cli: Cli) -> Result<i32> {
    let (kind, opts) = match (&cli.command, cli.selftest) {
        (Some(cmd), false) => (cmd.kind(), cmd.opts().clone()),
        (None, true) => (Kind::Selftest, Opts::default()),
        (Some(Command::Selftest(o)), true) => (Kind::Selftest, o.clone()),
        (Some(_), true) => anyhow::bail!("--selftest cannot be combined with a command"),
        (None, false) => anyhow::bail!("no command given; see --help"),
    };
    let spec = ExperimentSpec::resolve(kind, &opts)?;
    let report = commands::run(&spec)?;
    emit(&spec, &report)?;
    let ok = kind != Kind::Selftest || selftest::passed(&report);
    Ok(if ok { 0 } else { 1 })
}

fn emit(spec: &ExperimentSpec, report: &Report) -> Result<()> {
    match &spec.out {
        Some(path) => std::fs::write(path, &report.body).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(report.body.as_bytes())?;
            out.flush()?;
        }
    }
    let mut err = std::io::stderr().lock();
    for note in &report.notes {
        writeln!(err, "{note}")?;
    }
    Ok(())
}
