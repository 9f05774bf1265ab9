//! `qtrack` command-line entry point.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data or validation errors.

mod args;
mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use config::RunConfig;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

fn run(cli: &Cli) -> anyhow::Result<bool> {
    if let Some(k) = cli.threads {
        anyhow::ensure!(k > 0, "--threads must be positive");
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global()?;
    }
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let ok = match &cli.command {
        Command::Track(a) => commands::track(a, cfg, &mut out).map(|_| true),
        Command::EvalDet(a) => commands::eval_det(a, cfg, &mut out).map(|_| true),
        Command::EvalTrack(a) => commands::eval_track(a, cfg, &mut out).map(|_| true),
        Command::Report(a) => commands::report(a, cfg, &mut out).map(|_| true),
        Command::Synth(a) => commands::synth(a, &mut out).map(|_| true),
        Command::LossCheck(a) => commands::loss_check(a, cfg, &mut out).map(|_| true),
        Command::Selfcheck => commands::selfcheck(&cfg, &mut out),
    }?;
    out.flush()?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            log::error!("self-check failed");
            ExitCode::from(EXIT_DATA)
        }
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(EXIT_DATA)
        }
    }
}
