//! `ssr-lab`: runs skew stickiness ratio experiments from JSON model configs
//! and writes CSV or JSON tables.

pub mod args;
pub mod commands;
pub mod manifest;
pub mod output;
pub mod selftest;

use std::process::ExitCode;

use ssr_core::SsrError;

use crate::args::{Cli, Command};
use crate::commands::{cmd_estimate, cmd_limit, cmd_sweep_eps, cmd_sweep_t, Report};
use crate::manifest::{CommandKind, RunManifest, WORKERS_ENV};
use crate::output::emit;

pub const EXIT_SELFTEST_FAILED: u8 = 1;
pub const EXIT_INPUT_ERROR: u8 = 2;
pub const EXIT_NUMERICAL_ERROR: u8 = 3;

pub fn exit_code(err: &SsrError) -> u8 {
    if err.is_input_error() {
        EXIT_INPUT_ERROR
    } else {
        EXIT_NUMERICAL_ERROR
    }
}

/// Runs a parsed command line. Diagnostics go to standard error.
pub fn run(cli: Cli) -> ExitCode {
    let env_workers = std::env::var(WORKERS_ENV).ok();
    match dispatch(cli, env_workers.as_deref()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("ssr-lab: error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(cli: Cli, env_workers: Option<&str>) -> ssr_core::Result<u8> {
    let (manifest, report) = match &cli.command {
        Command::Estimate(a) => {
            let m = RunManifest::from_args(CommandKind::Estimate, &a.common, env_workers)?;
            let dump = a.dump_paths.as_deref().map(|p| (p, a.dump_limit));
            let r = cmd_estimate(&m, dump)?;
            (m, r)
        }
        Command::Limit(a) => {
            let m = RunManifest::from_args(CommandKind::Limit, a, env_workers)?;
            let r = cmd_limit(&m)?;
            (m, r)
        }
        Command::SweepEps(a) => {
            let m = RunManifest::from_args(CommandKind::SweepEps, &a.common, env_workers)?;
            let r = cmd_sweep_eps(&m, &a.values)?;
            (m, r)
        }
        Command::SweepT(a) => {
            let m = RunManifest::from_args(CommandKind::SweepT, &a.common, env_workers)?;
            let r = cmd_sweep_t(&m, &a.values)?;
            (m, r)
        }
        Command::Selftest(a) => {
            let m = RunManifest::from_args(CommandKind::Selftest, &a.common, env_workers)?;
            return run_selftest(&m, a.bad_tolerance.as_deref());
        }
    };
    finish(&manifest, &report)?;
    Ok(0)
}

fn finish(manifest: &RunManifest, report: &Report) -> ssr_core::Result<()> {
    for w in &report.warnings {
        eprintln!("ssr-lab: warning: {w}");
    }
    emit(&report.table.render(manifest.format)?, manifest.output_path.as_deref())
}

fn run_selftest(manifest: &RunManifest, broken: Option<&str>) -> ssr_core::Result<u8> {
    if let Some(name) = broken {
        if !selftest::SUITES.contains(&name) {
            return Err(SsrError::Validation(format!(
                "unknown suite `{name}`; suites are {}",
                selftest::SUITES.join(", ")
            )));
        }
    }
    let results = selftest::run_selftest(manifest.seed, manifest.workers.threads(), broken)?;
    for r in &results {
        let status = if r.passed { "pass" } else { "FAIL" };
        eprintln!("ssr-lab: selftest {:<12} {status} {:>8.3} s", r.name, r.seconds);
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if !failed.is_empty() {
        eprintln!("ssr-lab: failing suites: {}", failed.join(", "));
    }
    emit(
        &selftest::results_table(&results).render(manifest.format)?,
        manifest.output_path.as_deref(),
    )?;
    Ok(if failed.is_empty() { 0 } else { EXIT_SELFTEST_FAILED })
}
